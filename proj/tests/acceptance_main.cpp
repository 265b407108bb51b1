// Acceptance suite: ten end-to-end criteria, one [PASS]/[FAIL] line
// each, exit code = number of failures. Optional argv[1] is the path to
// the command-line binary (used by the determinism criterion).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance_config.hpp"
#include "maskprobe/analysis.hpp"
#include "maskprobe/errors.hpp"
#include "maskprobe/image_ops.hpp"
#include "maskprobe/losses.hpp"
#include "maskprobe/models.hpp"
#include "maskprobe/optimize.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/synthgen.hpp"
#include "maskprobe/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace maskprobe;
namespace an = maskprobe::analysis;
namespace ls = maskprobe::losses;
namespace md = maskprobe::models;
namespace op = maskprobe::optimize;
namespace sg = maskprobe::synthgen;
namespace ac = acceptance;
using testutil::LinearNet;
using testutil::random_depth;
using testutil::random_image;
using testutil::random_mask;

namespace {

struct Failure {
  std::string detail;
};

void require(bool ok, const std::string& detail) {
  if (!ok) throw Failure{detail};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------
// Shared fixture: one synthetic corpus and one trained, frozen target.

struct Fixture {
  std::string scratch;
  std::string cli;  // empty when the binary path was not supplied

  std::unique_ptr<sg::Dataset> corpus_;
  std::unique_ptr<md::DepthNet> target_;
  std::vector<an::SweepRow> sweep_;
  bool sweep_ready = false;

  sg::Dataset& corpus() {
    if (!corpus_) {
      std::fprintf(stderr, "note: building %d-sample corridor corpus at %dx%d\n",
                   ac::kCorpusSamples, ac::kCorpusSize, ac::kCorpusSize);
      sg::DatasetConfig cfg;
      cfg.n_samples = ac::kCorpusSamples;
      cfg.seed = ac::kCorpusSeed;
      cfg.height = ac::kCorpusSize;
      cfg.width = ac::kCorpusSize;
      cfg.difficulty = "corridor";
      cfg.out_dir = (fs::path(scratch) / "corpus").string();
      sg::build_dataset(cfg);
      corpus_ = std::make_unique<sg::Dataset>(sg::load_dataset(cfg.out_dir));
    }
    return *corpus_;
  }

  md::DepthNet& target() {
    if (!target_) {
      sg::Dataset& ds = corpus();
      std::fprintf(stderr, "note: training target net (%s, width %d, %d epochs)\n",
                   ac::kTargetArch, ac::kBaseWidth, ac::kTargetEpochs);
      md::ModelConfig mc;
      mc.architecture = ac::kTargetArch;
      mc.base_width = ac::kBaseWidth;
      mc.seed = derive_seed(ac::kCorpusSeed, "target-init");
      target_ = md::build_depth_net(mc);

      op::DepthTrainOptions topt;
      topt.epochs = ac::kTargetEpochs;
      topt.lr = ac::kTargetLr;
      topt.batch_size = ac::kSweepBatch;
      topt.seed = derive_seed(ac::kCorpusSeed, "target-train");
      const auto train = an::split_view(ds, ds.train);
      const auto val = an::split_view(ds, ds.val);
      const auto report = op::train_depth_net(*target_, train, val, topt);
      std::fprintf(stderr, "note: target val rmse %.4f after %d epochs\n",
                   report.epochs.back().val_rmse, ac::kTargetEpochs);
      target_->freeze();
    }
    return *target_;
  }

  op::MaskTrainOptions mask_options(double lambda, std::uint64_t seed) const {
    op::MaskTrainOptions mo;
    mo.lambda = lambda;
    mo.epochs = ac::kSweepEpochs;
    mo.lr = ac::kSweepLr;
    mo.batch_size = ac::kSweepBatch;
    mo.binarize_eps = ac::kBinarizeEps;
    mo.seed = seed;
    return mo;
  }

  const std::vector<an::SweepRow>& sweep_rows() {
    if (!sweep_ready) {
      an::SweepOptions so;
      so.lambdas = ac::kSweepLambdas;
      so.seeds = ac::kSweepSeeds;
      so.binarize_eps = ac::kBinarizeEps;
      so.mask_config.architecture = ac::kMaskArch;
      so.mask_config.base_width = ac::kBaseWidth;
      so.train = mask_options(0.0, 0);
      sweep_ = an::lambda_sweep(target(), corpus(), so);
      sweep_ready = true;
      for (const auto& row : sweep_) {
        std::fprintf(stderr,
                     "note: sweep lambda %.2g seed %llu: sparseness %.3f "
                     "rmse_m %.4f rmse_m' %.4f\n",
                     row.lambda, static_cast<unsigned long long>(row.seed),
                     row.sparseness, row.rmse_m, row.rmse_mprime);
      }
    }
    return sweep_;
  }

  double lambda_mean(double lambda,
                     const std::function<double(const an::SweepRow&)>& of) {
    double acc = 0.0;
    int count = 0;
    for (const auto& row : sweep_rows()) {
      if (row.lambda == lambda) {
        acc += of(row);
        ++count;
      }
    }
    require(count > 0, "no sweep rows at lambda " + fmt(lambda));
    return acc / count;
  }
};

// ---------------------------------------------------------------------
// Criteria.

void criterion_constants(Fixture&) {
  const double ln_half = std::log(0.5);
  Rng rng(811);
  for (int i = 0; i < 20; ++i) {
    const DepthMap y = random_depth(8, 8, rng, 0.5, 10.0);
    const auto breakdown = ls::l_dif(y, y);
    require(std::fabs(breakdown.l_depth - ln_half) <= ac::kConstantTol,
            "l_depth(y,y) = " + fmt(breakdown.l_depth));
    require(std::fabs(breakdown.l_grad - 2.0 * ln_half) <= ac::kConstantTol,
            "l_grad(y,y) = " + fmt(breakdown.l_grad));
    require(std::fabs(breakdown.l_normal) <= ac::kConstantTol,
            "l_normal(y,y) = " + fmt(breakdown.l_normal));
    require(std::fabs(breakdown.l_dif - 3.0 * ln_half) <= ac::kConstantTol,
            "l_dif(y,y) = " + fmt(breakdown.l_dif));
  }
}

void criterion_oracle_equivalence(Fixture&) {
  Rng rng(823);
  double worst = 0.0;
  std::string worst_name = "none";
  auto track = [&](const char* name, double got, double want) {
    const double err = oracle::rel_err(got, want);
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  };
  for (int i = 0; i < 50; ++i) {
    const DepthMap y = random_depth(8, 8, rng, 0.5, 10.0);
    const DepthMap yhat = random_depth(8, 8, rng, 0.5, 10.0);
    track("l_depth", ls::l_depth(y, yhat), oracle::l_depth(y, yhat));
    track("l_grad", ls::l_grad(y, yhat), oracle::l_grad(y, yhat));
    track("l_normal", ls::l_normal(y, yhat), oracle::l_normal(y, yhat));
    track("rmse", ls::rmse(y, yhat), oracle::rmse(y, yhat));

    // Objectives run the prediction through a 1x1-conv net; the oracle
    // recomputes that prediction with plain per-pixel arithmetic.
    LinearNet net(3, 9000 + static_cast<std::uint64_t>(i));
    net.freeze();
    const auto& params = net.parameters();
    const std::vector<double>& w = params[0].node->value;
    const double b = params[1].node->value[0];
    Image img = random_image(8, 8, 3, rng, 0.1, 1.0);
    const Mask m = random_mask(8, 8, rng);
    DepthMap y0(8, 8), ym(8, 8);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        double full = b, masked = b;
        for (int ch = 0; ch < 3; ++ch) {
          full += w[ch] * img.at(r, c, ch);
          masked += w[ch] * (img.at(r, c, ch) * m.at(r, c));
        }
        y0.at(r, c) = full;
        ym.at(r, c) = masked;
      }
    }
    const double lambda = rng.uniform(0.0, 8.0);
    track("objective_preserve", op::objective_preserve(net, y0, img, m, lambda),
          oracle::objective_preserve(y0, ym, m, lambda));
    track("objective_delete", op::objective_delete(net, y0, img, m, lambda),
          oracle::objective_delete(y0, ym, m, lambda));
  }
  require(worst <= ac::kOracleTol,
          "worst relative error " + fmt(worst) + " in " + worst_name);
}

void criterion_gradients(Fixture& fx) {
  // Loss gradients, probed away from the |.| kinks: the prediction sits
  // 0.1..0.4 above the target with adjacent offsets differing by a full
  // 0.05 step, so +-1e-4 probes never cross a kink.
  const int H = 8, W = 8;
  Rng rng(829);
  const DepthMap y = random_depth(H, W, rng, 2.0, 6.0);
  DepthMap yhat = y;
  for (int i = 0; i < H * W; ++i) {
    yhat.data[i] += 0.1 + 0.05 * (i % 7);
  }

  struct Variant {
    const char* name;
    nn::NodePtr (*make)(const nn::NodePtr&, const nn::NodePtr&);
  };
  const Variant variants[] = {{"l_depth", &ls::l_depth_node},
                              {"l_grad", &ls::l_grad_node},
                              {"l_normal", &ls::l_normal_node}};
  for (const auto& variant : variants) {
    auto leaf = nn::from_values({1, 1, H, W}, yhat.data, true);
    nn::backward(variant.make(nn::depth_node(y), leaf));
    for (int probe = 0; probe < 8; ++probe) {
      const std::size_t idx = rng.uniform_int(yhat.data.size());
      std::vector<double> values = yhat.data;
      const auto eval = [&]() {
        nn::NoGradGuard guard;
        return variant.make(nn::depth_node(y),
                            nn::from_values({1, 1, H, W}, values, false))
            ->scalar();
      };
      const double num = oracle::central_diff(eval, values[idx], ac::kFdStep);
      const double err = oracle::rel_err(leaf->grad[idx], num);
      require(err < ac::kLossGradTol,
              std::string(variant.name) + " grad at " + std::to_string(idx) +
                  ": rel err " + fmt(err));
    }
  }

  // Through the mask net and the frozen target in one graph.
  sg::Dataset& ds = fx.corpus();
  md::DepthNet& n = fx.target();
  const Image& img = ds.entries[ds.train.front()].image;
  md::ModelConfig mc;
  mc.architecture = ac::kMaskArch;
  mc.base_width = ac::kBaseWidth;
  mc.seed = derive_seed(ac::kCorpusSeed, "grad-check");
  auto g = md::build_mask_net(mc);
  Rng jitter(derive_seed(ac::kCorpusSeed, "grad-jitter"));
  testutil::jitter_params(*g, jitter);
  const DepthMap y_img = n.predict(img);

  auto objective = [&](bool grad) {
    auto build = [&] {
      auto m = g->forward(nn::image_node(img));
      auto yhat_node = n.forward(nn::broadcast_mul(nn::image_node(img), m));
      auto nodes = ls::l_dif_nodes(nn::depth_node(y_img), yhat_node);
      return nn::add(nodes.l_dif,
                     nn::affine(nn::mean_all(nn::abs_(m)), 2.0, 0.0));
    };
    if (grad) return build();
    nn::NoGradGuard guard;
    return build();
  };
  g->zero_grad();
  nn::backward(objective(true));
  int checked = 0;
  for (const auto& p : g->parameters()) {
    if (checked >= 6) break;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < p.node->grad.size(); ++i) {
      if (std::fabs(p.node->grad[i]) > std::fabs(p.node->grad[idx])) idx = i;
    }
    if (std::fabs(p.node->grad[idx]) < 1e-7) continue;
    const auto eval = [&]() { return objective(false)->scalar(); };
    double num = 0.0;
    if (!oracle::stable_central_diff(eval, p.node->value[idx], ac::kFdStep,
                                     num)) {
      continue;  // a kink sits inside the probe interval
    }
    const double err = oracle::rel_err(p.node->grad[idx], num);
    require(err < ac::kNetGradTol,
            "through-network grad of " + p.name + ": rel err " + fmt(err));
    ++checked;
  }
  require(checked >= 4, "only " + std::to_string(checked) +
                            " through-network parameters had usable signal");
}

void criterion_freeze(Fixture& fx) {
  sg::Dataset& ds = fx.corpus();
  md::DepthNet& n = fx.target();
  const std::string before = n.digest();

  md::ModelConfig mc;
  mc.architecture = ac::kMaskArch;
  mc.base_width = ac::kBaseWidth;
  mc.seed = derive_seed(ac::kCorpusSeed, "freeze-check");
  auto g = md::build_mask_net(mc);

  op::MaskTrainOptions mo = fx.mask_options(ac::kReferenceLambda, 99);
  mo.epochs = 2;
  const auto train = an::split_view(ds, ds.train);
  require(train.size() >= 64, "train split has fewer than 64 samples");
  const auto report = op::train_mask_net(*g, n, train, mo);

  require(report.digest_before == before,
          "digest before training does not match the trained target");
  require(report.digest_after == before, "digest changed during training");
  require(n.digest() == before, "live digest changed after training");
}

void criterion_identity_mask(Fixture& fx) {
  sg::Dataset& ds = fx.corpus();
  md::DepthNet& n = fx.target();
  const Mask ones(ac::kCorpusSize, ac::kCorpusSize, 1.0);
  int compared = 0;
  for (std::size_t i = 0; i < ds.entries.size() && compared < 20; ++i) {
    const Image& img = ds.entries[i].image;
    const DepthMap a = n.predict(img);
    const DepthMap b = n.predict(apply_mask(img, ones));
    require(a.data == b.data,
            "prediction differs under the all-ones mask on sample " +
                ds.entries[i].id);
    ++compared;
  }
  require(compared == 20, "fewer than 20 samples compared");
}

void criterion_sweep_trend(Fixture& fx) {
  fx.sweep_rows();
  std::vector<double> lambdas = ac::kSweepLambdas;
  std::sort(lambdas.begin(), lambdas.end());

  std::vector<double> mean_sparseness;
  for (const double l : lambdas) {
    mean_sparseness.push_back(
        fx.lambda_mean(l, [](const an::SweepRow& r) { return r.sparseness; }));
  }
  int violations = 0;
  double worst_gap = 0.0;
  for (std::size_t i = 1; i < mean_sparseness.size(); ++i) {
    const double gap = mean_sparseness[i] - mean_sparseness[i - 1];
    if (gap > 0.0) {
      ++violations;
      worst_gap = std::max(worst_gap, gap);
    }
  }
  std::ostringstream trend;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    trend << (i ? ", " : "") << fmt(lambdas[i]) << "->"
          << fmt(mean_sparseness[i]);
  }
  require(violations <= ac::kMaxAdjacentViolations,
          std::to_string(violations) + " adjacent sparseness violations (" +
              trend.str() + ")");
  require(worst_gap < ac::kSparsenessSlack,
          "sparseness violation of " + fmt(worst_gap) + " (" + trend.str() +
              ")");

  const double rmse_lo = fx.lambda_mean(
      lambdas.front(), [](const an::SweepRow& r) { return r.rmse_m; });
  const double rmse_hi = fx.lambda_mean(
      lambdas.back(), [](const an::SweepRow& r) { return r.rmse_m; });
  require(rmse_hi >= rmse_lo, "rmse at lambda " + fmt(lambdas.back()) + " (" +
                                  fmt(rmse_hi) + ") below rmse at lambda " +
                                  fmt(lambdas.front()) + " (" + fmt(rmse_lo) +
                                  ")");
}

void criterion_binarization_stability(Fixture& fx) {
  fx.sweep_rows();
  std::vector<double> lambdas = ac::kSweepLambdas;
  std::sort(lambdas.begin(), lambdas.end());
  for (std::size_t i = 0; i < 2; ++i) {
    const double l = lambdas[i];
    const double rmse_m =
        fx.lambda_mean(l, [](const an::SweepRow& r) { return r.rmse_m; });
    const double rmse_mp =
        fx.lambda_mean(l, [](const an::SweepRow& r) { return r.rmse_mprime; });
    const double gap = std::fabs(rmse_mp - rmse_m) / rmse_m;
    require(gap < ac::kBinarizedRelGap,
            "binarization gap " + fmt(gap) + " at lambda " + fmt(l) +
                " (rmse_m " + fmt(rmse_m) + ", rmse_m' " + fmt(rmse_mp) + ")");
  }
}

void criterion_edge_baseline(Fixture& fx) {
  sg::Dataset& ds = fx.corpus();
  md::DepthNet& n = fx.target();
  const auto curve = an::edge_curve(n, ds, ac::edge_thresholds());

  int wins = 0;
  std::ostringstream log;
  for (const std::uint64_t seed : ac::kBaselineSeeds) {
    md::ModelConfig mc;
    mc.architecture = ac::kMaskArch;
    mc.base_width = ac::kBaseWidth;
    mc.seed = derive_seed(seed, "mask-init");
    auto g = md::build_mask_net(mc);
    op::train_mask_net(*g, n, an::split_view(ds, ds.train),
                       fx.mask_options(ac::kReferenceLambda, seed));
    const auto eval =
        an::evaluate_mask_net(n, *g, ds, ds.test, ac::kBinarizeEps);

    const an::EdgePoint* nearest = nullptr;
    for (const auto& p : curve) {
      if (!nearest || std::fabs(p.sparseness - eval.sparseness) <
                          std::fabs(nearest->sparseness - eval.sparseness)) {
        nearest = &p;
      }
    }
    const double ds_gap = std::fabs(nearest->sparseness - eval.sparseness);
    const bool matched = ds_gap <= ac::kSparsenessMatch;
    const bool won = matched && eval.rmse_mprime <= nearest->rmse;
    wins += won ? 1 : 0;
    log << " seed " << seed << ": learned (s " << fmt(eval.sparseness)
        << ", rmse " << fmt(eval.rmse_mprime) << ") vs edge (s "
        << fmt(nearest->sparseness) << ", rmse " << fmt(nearest->rmse) << ") "
        << (matched ? (won ? "win" : "loss") : "unmatched") << ";";
  }
  std::fprintf(stderr, "note: edge baseline:%s\n", log.str().c_str());
  require(wins >= 4, "learned mask won only " + std::to_string(wins) +
                         " of 5 seed runs:" + log.str());
}

void criterion_direct_oracle(Fixture&) {
  int hits = 0;
  std::ostringstream log;
  for (int i = 0; i < ac::kDirectInstances; ++i) {
    Rng rng(500 + static_cast<std::uint64_t>(i));
    Image img = random_image(4, 4, 3, rng, 0.2, 1.0);
    LinearNet net(3, 700 + static_cast<std::uint64_t>(i));
    net.freeze();

    const auto& params = net.parameters();
    const std::vector<double>& w = params[0].node->value;
    const double b = params[1].node->value[0];
    DepthMap y(4, 4);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        double acc = b;
        for (int ch = 0; ch < 3; ++ch) acc += w[ch] * img.at(r, c, ch);
        y.at(r, c) = acc;
      }
    }
    const auto eval = [&](const Mask& m) {
      DepthMap yhat(4, 4);
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
          double acc = b;
          for (int ch = 0; ch < 3; ++ch) {
            acc += w[ch] * (img.at(r, c, ch) * m.at(r, c));
          }
          yhat.at(r, c) = acc;
        }
      }
      return oracle::objective_preserve(y, yhat, m, ac::kDirectLambda);
    };

    Mask start(4, 4, 0.5);
    const double oracle_best =
        oracle::coordinate_descent(start, eval, ac::kOracleLevels,
                                   ac::kOracleMaxSweeps);
    const auto direct = op::optimize_mask_direct(
        net, img, ac::kDirectLambda, ac::kDirectSteps, ac::kDirectLr);
    const bool hit = direct.final_objective <= oracle_best + ac::kDirectTol;
    hits += hit ? 1 : 0;
    log << " #" << i << ": direct " << fmt(direct.final_objective)
        << " vs oracle " << fmt(oracle_best) << (hit ? "" : " MISS") << ";";
  }
  std::fprintf(stderr, "note: direct oracle:%s\n", log.str().c_str());
  require(hits >= 9, "reached the oracle in only " + std::to_string(hits) +
                         " of 10 instances:" + log.str());
}

// ---------------------------------------------------------------------
// Criterion 10 drives the installed binary.

int run_cli(const std::string& bin, const std::string& args,
            const std::string& stdout_path) {
  std::string cmd = "\"" + bin + "\" " + args;
  cmd += stdout_path.empty() ? " > /dev/null" : " > " + stdout_path;
  cmd += " 2> /dev/null";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) throw Failure{"failed to launch: " + cmd};
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{"cannot read " + path};
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string line_containing(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.find(what) != std::string::npos) return line;
  }
  throw Failure{"no line containing '" + what + "' in: " + text};
}

void criterion_cli_determinism(Fixture& fx) {
  require(!fx.cli.empty(),
          "path to the command-line binary was not supplied");
  const fs::path root = fs::path(fx.scratch) / "determinism";
  fs::create_directories(root);
  const std::string data = (root / "data").string();
  const std::string cap = (root / "out.txt").string();

  require(run_cli(fx.cli,
                  "gen-data --n 8 --height 16 --width 16 --seed 7 --out " +
                      data,
                  "") == 0,
          "gen-data failed");
  require(run_cli(fx.cli,
                  "train-target --data " + data + " --out " +
                      (root / "target").string() +
                      " --arch depth-ed2 --base-width 2 --epochs 1 --batch 4"
                      " --seed 7",
                  cap) == 0,
          "train-target failed");
  const std::string target = line_containing(slurp(cap), ".ckpt");

  const std::string mask_args =
      "train-mask --data " + data + " --target " + target +
      " --arch mask-ed1 --base-width 2 --lambda 1 --epochs 1 --batch 4"
      " --seed 7 --out ";
  std::vector<std::string> digests;
  for (const char* run : {"mask-a", "mask-b"}) {
    require(run_cli(fx.cli, mask_args + (root / run).string(), cap) == 0,
            std::string("train-mask failed in ") + run);
    const std::string ckpt = line_containing(slurp(cap), "mask.ckpt");
    digests.push_back(md::read_checkpoint_info(ckpt).digest);
  }
  require(digests[0] == digests[1],
          "mask digests differ: " + digests[0] + " vs " + digests[1]);

  const std::string sweep_args =
      "sweep --data " + data + " --target " + target +
      " --lambdas 0.5,1 --seeds 1 --epochs 1 --batch 4 --out ";
  std::vector<std::string> csvs;
  for (const char* run : {"sweep-a", "sweep-b"}) {
    require(run_cli(fx.cli, sweep_args + (root / run).string(), cap) == 0,
            std::string("sweep failed in ") + run);
    csvs.push_back(slurp(line_containing(slurp(cap), "sweep.csv")));
  }
  require(csvs[0] == csvs[1], "sweep csv bytes differ between identical runs");
  require(!csvs[0].empty(), "sweep csv is empty");
}

// ---------------------------------------------------------------------

struct Criterion {
  int number;
  const char* label;
  double budget_seconds;  // 0 = no budget stated
  std::function<void(Fixture&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  Fixture fx;
  fx.scratch = fs::absolute("acceptance-scratch").string();
  fs::remove_all(fx.scratch);
  fs::create_directories(fx.scratch);
  if (argc > 1) fx.cli = argv[1];

  const std::vector<Criterion> criteria = {
      {1, "loss constants on identical maps", 1.0, criterion_constants},
      {2, "oracle equivalence of losses and objectives", 10.0,
       criterion_oracle_equivalence},
      {3, "finite-difference gradient checks", 30.0, criterion_gradients},
      {4, "frozen target unchanged by mask training", 300.0,
       criterion_freeze},
      {5, "all-ones mask preserves predictions bit-exactly", 5.0,
       criterion_identity_mask},
      {6, "sparseness falls and rmse rises across the lambda sweep", 2700.0,
       criterion_sweep_trend},
      {7, "binarization changes rmse by less than 25% at small lambda", 0.0,
       criterion_binarization_stability},
      {8, "learned masks beat sobel edges at matched sparseness", 1200.0,
       criterion_edge_baseline},
      {9, "direct optimization reaches the coordinate-descent oracle", 300.0,
       criterion_direct_oracle},
      {10, "identical runs give identical digests and csv bytes", 0.0,
       criterion_cli_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    try {
      criterion.run(fx);
    } catch (const Failure& f) {
      detail = f.detail;
    } catch (const std::exception& e) {
      detail = std::string("unexpected exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (detail.empty() && criterion.budget_seconds > 0.0 &&
        seconds > criterion.budget_seconds) {
      detail = "exceeded the " + fmt(criterion.budget_seconds) +
               "s budget (took " + fmt(seconds) + "s)";
    }
    if (detail.empty()) {
      std::printf("[PASS] criterion %d: %s (%.2fs)\n", criterion.number,
                  criterion.label, seconds);
    } else {
      std::printf("[FAIL] criterion %d: %s (%.2fs): %s\n", criterion.number,
                  criterion.label, seconds, detail.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
