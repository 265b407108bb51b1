#include "maskprobe/selfcheck.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "maskprobe/analysis.hpp"
#include "maskprobe/errors.hpp"
#include "maskprobe/image_ops.hpp"
#include "maskprobe/losses.hpp"
#include "maskprobe/models.hpp"
#include "maskprobe/optimize.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/synthgen.hpp"

namespace maskprobe::selfcheck {

namespace {

namespace fs = std::filesystem;

std::string temp_path(const std::string& tag) {
  std::ostringstream os;
  os << "maskprobe-verify-" << tag << "-" << ::getpid();
  return (fs::temp_directory_path() / os.str()).string();
}

DepthMap random_depth(int h, int w, Rng& rng) {
  DepthMap d(h, w);
  for (auto& v : d.data) v = rng.uniform(0.5, 10.0);
  return d;
}

struct Expect {
  std::ostringstream os;
  bool ok = true;

  void truth(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) os << "; ";
      os << what;
      ok = false;
    }
  }
  void close(double got, double want, double tol, const std::string& what) {
    if (!(std::fabs(got - want) < tol)) {
      if (!ok) os << "; ";
      os << what << ": got " << got << ", want " << want;
      ok = false;
    }
  }
};

void check_loss_constants(Expect& e) {
  Rng rng(11);
  const double ln_half = std::log(0.5);
  for (int i = 0; i < 3; ++i) {
    const DepthMap y = random_depth(12, 12, rng);
    e.close(losses::l_depth(y, y), ln_half, 1e-12, "l_depth(Y,Y)");
    e.close(losses::l_grad(y, y), 2.0 * ln_half, 1e-12, "l_grad(Y,Y)");
    e.close(losses::l_normal(y, y), 0.0, 1e-12, "l_normal(Y,Y)");
    const auto b = losses::l_dif(y, y);
    e.close(b.l_dif, 3.0 * ln_half, 1e-12, "l_dif(Y,Y)");
  }
}

void check_dual_route(Expect& e) {
  Rng rng(12);
  const DepthMap y = random_depth(8, 8, rng);
  const DepthMap yhat = random_depth(8, 8, rng);
  const auto val = losses::l_dif(y, yhat);
  const auto nodes =
      losses::l_dif_nodes(nn::depth_node(y), nn::depth_node(yhat));
  e.truth(nodes.l_depth->scalar() == val.l_depth, "l_depth routes differ");
  e.truth(nodes.l_grad->scalar() == val.l_grad, "l_grad routes differ");
  e.truth(nodes.l_normal->scalar() == val.l_normal, "l_normal routes differ");
  e.truth(nodes.l_dif->scalar() == val.l_dif, "l_dif routes differ");
}

void check_gradient_spot(Expect& e) {
  Rng rng(13);
  const int h = 6, w = 6;
  DepthMap y = random_depth(h, w, rng);
  DepthMap yhat = y;
  // Keep every error term away from the |.| kink.
  for (auto& v : yhat.data) v += 0.1 + 0.2 * rng.uniform();

  auto yhat_node = nn::from_values({1, 1, h, w}, yhat.data, true);
  auto loss = losses::l_depth_node(nn::depth_node(y), yhat_node);
  nn::backward(loss);

  const std::size_t idx = 7;
  const double analytic = yhat_node->grad[idx];
  const double step = 1e-4;
  DepthMap plus = yhat, minus = yhat;
  plus.data[idx] += step;
  minus.data[idx] -= step;
  const double numeric =
      (losses::l_depth(y, plus) - losses::l_depth(y, minus)) / (2.0 * step);
  const double rel = std::fabs(analytic - numeric) /
                     std::max(1e-12, std::fabs(numeric));
  e.truth(rel < 1e-4, "l_depth gradient relative error " + std::to_string(rel));
}

synthgen::Sample tiny_sample(std::uint64_t seed) {
  const auto scene = synthgen::generate_scene(seed, "corridor");
  return synthgen::render(scene, 16, 16);
}

void check_identity_mask(Expect& e) {
  models::ModelConfig cfg;
  cfg.architecture = "depth-ed2";
  cfg.base_width = 4;
  cfg.seed = 21;
  auto net = models::build_depth_net(cfg);

  const auto sample = tiny_sample(31);
  const Mask ones(16, 16, 1.0);
  const DepthMap a = net->predict(sample.image);
  const DepthMap b = net->predict(apply_mask(sample.image, ones));
  e.truth(a.data == b.data, "N(I (*) 1) differs from N(I)");
}

void check_freeze_digest(Expect& e) {
  models::ModelConfig ncfg;
  ncfg.architecture = "depth-ed2";
  ncfg.base_width = 4;
  ncfg.seed = 5;
  auto n = models::build_depth_net(ncfg);
  n->freeze();

  models::ModelConfig gcfg;
  gcfg.architecture = "mask-ed1";
  gcfg.base_width = 4;
  gcfg.seed = 6;
  auto g = models::build_mask_net(gcfg);

  std::vector<synthgen::Sample> samples;
  for (std::uint64_t s = 0; s < 4; ++s) samples.push_back(tiny_sample(s));
  std::vector<optimize::TrainSample> train;
  for (const auto& s : samples) train.push_back({&s.image, &s.depth});

  optimize::MaskTrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 2;
  opt.seed = 7;
  const auto report = optimize::train_mask_net(*g, *n, train, opt);
  e.truth(report.digest_before == report.digest_after,
          "target digest changed during mask training");
  e.truth(std::isfinite(report.epochs.at(0).objective),
          "epoch-0 objective not finite");
}

void check_rng_determinism(Expect& e) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    if (a.uniform() != b.uniform()) {
      e.truth(false, "identical seeds diverged at draw " + std::to_string(i));
      return;
    }
  }
  e.truth(derive_seed(42, "x") == derive_seed(42, "x"),
          "derive_seed not stable");
  e.truth(derive_seed(42, "x") != derive_seed(42, "y"),
          "derive_seed ignores label");
}

void check_checkpoint_roundtrip(Expect& e) {
  models::ModelConfig cfg;
  cfg.architecture = "depth-ed2";
  cfg.base_width = 4;
  cfg.seed = 9;
  auto net = models::build_depth_net(cfg);
  const std::string digest = net->digest();

  const std::string path = temp_path("ckpt");
  models::save_checkpoint(*net, cfg, path, 3);
  const auto info = models::read_checkpoint_info(path);
  auto loaded = models::load_depth_checkpoint(path);
  fs::remove(path);

  e.truth(info.epoch == 3, "epoch not preserved");
  e.truth(info.digest == digest, "stored digest differs");
  e.truth(loaded->digest() == digest, "reloaded digest differs");
}

void check_csv_roundtrip(Expect& e) {
  const std::vector<analysis::SweepRow> rows = {
      {0.5, 0.1234567890123, 0.2, 0.9, 1},
      {8.0, 0.75, 0.8000000001, 0.125, 2},
  };
  const std::string p1 = temp_path("csv1");
  const std::string p2 = temp_path("csv2");
  analysis::write_sweep_csv(p1, rows);
  const auto back = analysis::read_sweep_csv(p1);
  analysis::write_sweep_csv(p2, back);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  fs::remove(p1);
  fs::remove(p2);
  e.truth(s1.str() == s2.str(), "csv round trip not byte-identical");
}

void check_render_determinism(Expect& e) {
  const auto scene = synthgen::generate_scene(17, "cluttered");
  const auto a = synthgen::render(scene, 16, 16);
  const auto b = synthgen::render(scene, 16, 16);
  e.truth(a.image.data == b.image.data, "renders differ (image)");
  e.truth(a.depth.data == b.depth.data, "renders differ (depth)");
  bool positive = true;
  for (double v : a.depth.data) positive = positive && v > 0.0;
  e.truth(positive, "non-positive ground-truth depth");
}

void check_binarize_contract(Expect& e) {
  Rng rng(23);
  Mask m(8, 8);
  for (auto& v : m.data) v = rng.uniform();
  m.data[3] = 0.025;
  const Mask b = binarize(m, 0.025);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const double want = m.data[i] >= 0.025 ? 1.0 : 0.0;
    if (b.data[i] != want) {
      e.truth(false, "binarize mismatch at " + std::to_string(i));
      return;
    }
  }
  e.truth(b.binary, "binarized mask not flagged binary");
}

CheckResult run_one(const std::string& name,
                    const std::function<void(Expect&)>& body) {
  CheckResult r;
  r.name = name;
  try {
    Expect e;
    body(e);
    r.passed = e.ok;
    r.detail = e.ok ? "ok" : e.os.str();
  } catch (const std::exception& ex) {
    r.passed = false;
    r.detail = std::string("exception: ") + ex.what();
  }
  return r;
}

}  // namespace

std::vector<CheckResult> run_all() {
  std::vector<CheckResult> results;
  results.push_back(run_one("loss-constants", check_loss_constants));
  results.push_back(run_one("dual-route-agreement", check_dual_route));
  results.push_back(run_one("gradient-spot-check", check_gradient_spot));
  results.push_back(run_one("identity-mask", check_identity_mask));
  results.push_back(run_one("freeze-digest", check_freeze_digest));
  results.push_back(run_one("rng-determinism", check_rng_determinism));
  results.push_back(run_one("checkpoint-roundtrip", check_checkpoint_roundtrip));
  results.push_back(run_one("sweep-csv-roundtrip", check_csv_roundtrip));
  results.push_back(run_one("render-determinism", check_render_determinism));
  results.push_back(run_one("binarize-contract", check_binarize_contract));
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

}  // namespace maskprobe::selfcheck
