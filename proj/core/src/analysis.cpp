#include "maskprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "maskprobe/errors.hpp"
#include "maskprobe/losses.hpp"
#include "maskprobe/png_io.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/text.hpp"

namespace maskprobe::analysis {

namespace {

std::string format_u64(std::uint64_t v) { return std::to_string(v); }

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError("not an unsigned integer: '" + std::string(s) + "'");
  }
  return v;
}

void map_to_panel(const std::vector<double>& values, int h, int w,
                  const std::string& colormap, std::vector<double>& rgb,
                  int panel, int panels) {
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double t =
          std::clamp(values[static_cast<std::size_t>(r) * w + c], 0.0, 1.0);
      double rr, gg, bb;
      if (colormap == "heat") {
        rr = std::min(1.0, 2.0 * t);
        gg = std::clamp(2.0 * t - 0.8, 0.0, 1.0);
        bb = 0.25 * (1.0 - t);
      } else {  // gray
        rr = gg = bb = t;
      }
      const std::size_t base =
          (static_cast<std::size_t>(r) * w * panels + panel * w + c) * 3;
      rgb[base] = rr;
      rgb[base + 1] = gg;
      rgb[base + 2] = bb;
    }
  }
}

}  // namespace

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open sweep csv for writing: " + path);
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    out << format_double(r.lambda) << ',' << format_double(r.rmse_m) << ','
        << format_double(r.rmse_mprime) << ',' << format_double(r.sparseness)
        << ',' << format_u64(r.seed) << '\n';
  }
  if (!out) throw IoError("failed writing sweep csv: " + path);
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sweep csv: " + path);
  std::string line;
  if (!std::getline(in, line) || std::string(trim(line)) != kSweepCsvHeader) {
    throw IoError("bad sweep csv header in " + path);
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split(t, ',');
    if (fields.size() != 5) {
      throw IoError("bad sweep csv row in " + path + ": '" + line + "'");
    }
    SweepRow r;
    r.lambda = parse_double(fields[0]);
    r.rmse_m = parse_double(fields[1]);
    r.rmse_mprime = parse_double(fields[2]);
    r.sparseness = parse_double(fields[3]);
    r.seed = parse_u64(fields[4]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<optimize::TrainSample> split_view(
    const synthgen::Dataset& ds, const std::vector<std::size_t>& split) {
  std::vector<optimize::TrainSample> view;
  view.reserve(split.size());
  for (std::size_t i : split) {
    view.push_back({&ds.entries[i].image, &ds.entries[i].depth});
  }
  return view;
}

MaskEval evaluate_mask_net(models::DepthNet& n, models::MaskNet& g,
                           const synthgen::Dataset& ds,
                           const std::vector<std::size_t>& split, double eps) {
  if (split.empty()) throw AnalysisError("evaluate_mask_net: empty split");
  MaskEval ev;
  for (std::size_t i : split) {
    const auto& e = ds.entries[i];
    const Mask m = g.predict(e.image);
    const Mask mp = binarize(m, eps);
    ev.rmse_m += losses::rmse(e.depth, n.predict(apply_mask(e.image, m)));
    ev.rmse_mprime +=
        losses::rmse(e.depth, n.predict(apply_mask(e.image, mp)));
    ev.sparseness += sparseness(mp).fraction_nonzero;
  }
  const double inv = 1.0 / static_cast<double>(split.size());
  ev.rmse_m *= inv;
  ev.rmse_mprime *= inv;
  ev.sparseness *= inv;
  return ev;
}

void SweepOptions::validate() const {
  if (lambdas.empty()) throw ParameterError("sweep: empty lambda list");
  if (seeds.empty()) throw ParameterError("sweep: empty seed list");
  for (double l : lambdas) {
    if (!std::isfinite(l) || l < 0.0) {
      throw ParameterError("sweep: lambda must be finite and >= 0");
    }
  }
  if (binarize_eps < 0.0 || binarize_eps > 1.0) {
    throw ParameterError("sweep: binarize threshold outside [0,1]");
  }
}

std::vector<SweepRow> lambda_sweep(models::DepthNet& n,
                                   const synthgen::Dataset& ds,
                                   const SweepOptions& options) {
  options.validate();
  if (!n.frozen()) {
    throw ContractViolationError("lambda_sweep: target network must be frozen");
  }
  const auto train_view = split_view(ds, ds.train);
  std::vector<SweepRow> rows;
  for (double lambda : options.lambdas) {
    for (std::uint64_t seed : options.seeds) {
      models::ModelConfig mcfg = options.mask_config;
      mcfg.seed = derive_seed(seed, "mask-init");
      auto g = models::build_mask_net(mcfg);

      optimize::MaskTrainOptions t = options.train;
      t.lambda = lambda;
      t.seed = seed;
      t.binarize_eps = options.binarize_eps;
      optimize::train_mask_net(*g, n, train_view, t);

      const MaskEval ev =
          evaluate_mask_net(n, *g, ds, ds.test, options.binarize_eps);
      rows.push_back({lambda, ev.rmse_m, ev.rmse_mprime, ev.sparseness, seed});
    }
  }
  return rows;
}

std::vector<EdgePoint> edge_curve(models::DepthNet& n,
                                  const synthgen::Dataset& ds,
                                  const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw AnalysisError("edge_curve: empty threshold grid");
  if (ds.test.empty()) throw AnalysisError("edge_curve: empty test split");
  std::vector<EdgePoint> points;
  points.reserve(thresholds.size());
  for (double tau : thresholds) {
    EdgePoint p;
    p.threshold = tau;
    for (std::size_t i : ds.test) {
      const auto& e = ds.entries[i];
      const Image raw =
          e.image.normalized ? denormalize_zscore(e.image, ds.stats) : e.image;
      const Mask em = binarize(edge_map(raw), tau);
      p.rmse += losses::rmse(e.depth, n.predict(apply_mask(e.image, em)));
      p.sparseness += sparseness(em).fraction_nonzero;
    }
    const double inv = 1.0 / static_cast<double>(ds.test.size());
    p.rmse *= inv;
    p.sparseness *= inv;
    points.push_back(p);
  }
  return points;
}

EdgeBaselineReport edge_baseline(models::DepthNet& n,
                                 const synthgen::Dataset& ds,
                                 const std::vector<double>& thresholds,
                                 const std::vector<SweepRow>& learned) {
  if (learned.empty()) {
    throw AnalysisError(
        "edge_baseline: no learned-mask rows to pair against");
  }
  const auto points = edge_curve(n, ds, thresholds);
  EdgeBaselineReport report;
  for (const auto& p : points) {
    const SweepRow* best = nullptr;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& row : learned) {
      const double gap = std::fabs(row.sparseness - p.sparseness);
      if (gap < best_gap ||
          (gap == best_gap && best && row.lambda < best->lambda)) {
        best_gap = gap;
        best = &row;
      }
    }
    report.rows.push_back({p.threshold, p.sparseness, p.rmse, best->lambda,
                           best->sparseness, best->rmse_m});
  }
  return report;
}

std::string EdgeBaselineReport::to_json_string() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"threshold", r.threshold},
                      {"edge_sparseness", r.edge_sparseness},
                      {"edge_rmse", r.edge_rmse},
                      {"learned_lambda", r.learned_lambda},
                      {"learned_sparseness", r.learned_sparseness},
                      {"learned_rmse", r.learned_rmse}});
  }
  nlohmann::json j;
  j["note"] =
      "trend comparison on synthetic data; absolute values are not "
      "comparable across datasets or architectures";
  j["rows"] = std::move(rows_j);
  return j.dump(2);
}

AblationReport loss_ablation(const synthgen::Dataset& ds,
                             const AblationOptions& options) {
  const auto train_view = split_view(ds, ds.train);
  const auto val_view = split_view(ds, ds.val);

  AblationReport report;
  const optimize::LossCombo combos[] = {optimize::LossCombo::d,
                                        optimize::LossCombo::dg,
                                        optimize::LossCombo::dgn};
  for (const auto combo : combos) {
    models::ModelConfig dcfg = options.depth_config;
    dcfg.seed = derive_seed(options.seed, "depth-init");
    auto n = models::build_depth_net(dcfg);

    optimize::DepthTrainOptions dt = options.depth_train;
    dt.combo = combo;
    dt.seed = options.seed;
    const auto dreport = optimize::train_depth_net(*n, train_view, val_view, dt);
    n->freeze();

    models::ModelConfig mcfg = options.mask_config;
    mcfg.seed = derive_seed(options.seed, "mask-init");
    auto g = models::build_mask_net(mcfg);
    optimize::MaskTrainOptions mt = options.mask_train;
    mt.lambda = options.lambda;
    mt.seed = options.seed;
    mt.binarize_eps = options.binarize_eps;
    optimize::train_mask_net(*g, *n, train_view, mt);

    AblationRow row;
    row.combo = optimize::combo_name(combo);
    row.val_rmse = dreport.epochs.back().val_rmse;
    const MaskEval ev =
        evaluate_mask_net(*n, *g, ds, ds.test, options.binarize_eps);
    row.masked_rmse = ev.rmse_m;
    row.mask_sparseness = ev.sparseness;
    {
      nn::NoGradGuard guard;
      double tv = 0.0;
      for (std::size_t i : ds.test) {
        tv += mask_total_variation(g->predict(ds.entries[i].image));
      }
      row.mask_tv = tv / static_cast<double>(ds.test.size());
    }
    if (!options.figure_dir.empty()) {
      if (ds.test.empty()) throw AnalysisError("ablation: empty test split");
      std::filesystem::create_directories(options.figure_dir);
      const auto& e = ds.entries[ds.test.front()];
      const Image raw =
          e.image.normalized ? denormalize_zscore(e.image, ds.stats) : e.image;
      const Mask mask = g->predict(e.image);
      const DepthMap yhat = n->predict(apply_mask(e.image, mask));
      row.overlay_path =
          options.figure_dir + "/ablation-" + row.combo + ".png";
      render_overlay(raw, mask, yhat, e.depth, options.colormap,
                     row.overlay_path);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string AblationReport::to_json_string() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json e = {{"combo", r.combo},
                        {"val_rmse", r.val_rmse},
                        {"masked_rmse", r.masked_rmse},
                        {"mask_sparseness", r.mask_sparseness},
                        {"mask_tv", r.mask_tv}};
    if (!r.overlay_path.empty()) e["overlay"] = r.overlay_path;
    rows_j.push_back(std::move(e));
  }
  nlohmann::json j;
  j["note"] =
      "trend comparison on synthetic data; absolute values are not "
      "comparable across datasets or architectures";
  j["rows"] = std::move(rows_j);
  return j.dump(2);
}

OverlayFigure render_overlay(const Image& raw_image, const Mask& m,
                             const DepthMap& yhat, const DepthMap& gt,
                             const std::string& colormap,
                             const std::string& png_path) {
  if (colormap != "gray" && colormap != "heat") {
    throw ParameterError("render_overlay: unknown colormap '" + colormap +
                         "' (known: gray, heat)");
  }
  const int h = raw_image.height, w = raw_image.width;
  if (m.height != h || m.width != w || yhat.height != h || yhat.width != w ||
      gt.height != h || gt.width != w) {
    throw DimensionError("render_overlay: panel sizes differ");
  }

  OverlayFigure fig;
  fig.panel_height = h;
  fig.panel_width = w;
  fig.colormap = colormap;
  fig.rgb.assign(static_cast<std::size_t>(h) * w * 4 * 3, 0.0);

  // Panel 0: the raw image itself.
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t base = (static_cast<std::size_t>(r) * w * 4 + c) * 3;
      for (int ch = 0; ch < 3; ++ch) {
        const int src_ch = raw_image.channels == 3 ? ch : 0;
        fig.rgb[base + ch] = std::clamp(raw_image.at(r, c, src_ch), 0.0, 1.0);
      }
    }
  }
  // Panel 1: mask, monochrome, 1 = white.
  map_to_panel(m.data, h, w, "gray", fig.rgb, 1, 4);
  // Panels 2 and 3: prediction and ground truth on a shared scale.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : yhat.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : gt.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  auto rescale = [&](const std::vector<double>& src) {
    std::vector<double> out(src.size(), 0.5);
    if (span > 1e-12) {
      for (std::size_t i = 0; i < src.size(); ++i)
        out[i] = (src[i] - lo) / span;
    }
    return out;
  };
  map_to_panel(rescale(yhat.data), h, w, colormap, fig.rgb, 2, 4);
  map_to_panel(rescale(gt.data), h, w, colormap, fig.rgb, 3, 4);

  write_png_rgb8(png_path, h, w * 4, fig.rgb);
  return fig;
}

MaskStatsReport mask_statistics(const Mask& m,
                                const synthgen::CueAnnotations& cues) {
  MaskStatsReport report;
  report.notes.push_back(
      "descriptive statistics on synthetic data; not acceptance-gated");
  double acc = 0.0;
  for (double v : m.data) acc += v;
  report.global_mean = acc / static_cast<double>(m.data.size());

  auto add_cue = [&](const std::string& name,
                     const std::vector<std::uint32_t>& pixels) {
    if (pixels.empty()) {
      report.notes.push_back("cue '" + name + "' has no pixels; skipped");
      return;
    }
    CueStat stat;
    stat.cue = name;
    stat.pixels = pixels.size();
    double sum = 0.0;
    for (std::uint32_t p : pixels) {
      if (p >= m.data.size()) {
        throw DimensionError("mask_statistics: cue pixel out of range");
      }
      sum += m.data[p];
    }
    stat.mean = sum / static_cast<double>(pixels.size());
    stat.ratio = report.global_mean > 0.0
                     ? stat.mean / report.global_mean
                     : std::numeric_limits<double>::quiet_NaN();
    report.cues.push_back(std::move(stat));
  };
  add_cue("edges", cues.edges);
  add_cue("object_interior", cues.object_interior);
  add_cue("vanishing_region", cues.vanishing_region);
  return report;
}

std::string MaskStatsReport::to_json_string() const {
  nlohmann::json cues_j = nlohmann::json::array();
  for (const auto& c : cues) {
    nlohmann::json e;
    e["cue"] = c.cue;
    e["pixels"] = c.pixels;
    e["mean"] = c.mean;
    if (std::isfinite(c.ratio)) {
      e["ratio"] = c.ratio;
    } else {
      e["ratio"] = nullptr;
    }
    cues_j.push_back(std::move(e));
  }
  nlohmann::json j;
  j["global_mean"] = global_mean;
  j["cues"] = std::move(cues_j);
  j["notes"] = notes;
  return j.dump(2);
}

}  // namespace maskprobe::analysis
