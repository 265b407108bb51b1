#include <doctest.h>

#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "maskprobe/errors.hpp"
#include "maskprobe/image_ops.hpp"
#include "maskprobe/losses.hpp"
#include "maskprobe/models.hpp"
#include "maskprobe/optimize.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace maskprobe;
using namespace testutil;
namespace op = maskprobe::optimize;
namespace md = maskprobe::models;

namespace {

md::ModelConfig tiny(const std::string& arch, std::uint64_t seed) {
  md::ModelConfig cfg;
  cfg.architecture = arch;
  cfg.base_width = 2;
  cfg.seed = seed;
  return cfg;
}

struct TinyCorpus {
  std::vector<Image> images;
  std::vector<DepthMap> depths;
  std::vector<op::TrainSample> samples;
};

TinyCorpus make_corpus(int n, int h, int w, std::uint64_t seed,
                       md::DepthNet* labeler = nullptr) {
  TinyCorpus c;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Image img = random_image(h, w, 3, rng, -1.0, 1.0);
    img.normalized = true;
    c.images.push_back(std::move(img));
  }
  for (int i = 0; i < n; ++i) {
    if (labeler) {
      c.depths.push_back(labeler->predict(c.images[i]));
    } else {
      c.depths.push_back(random_depth(h, w, rng, 1.0, 8.0));
    }
  }
  for (int i = 0; i < n; ++i) {
    c.samples.push_back({&c.images[i], &c.depths[i]});
  }
  return c;
}

}  // namespace

TEST_CASE("objective variants have stable names") {
  CHECK(op::variant_name(op::ObjectiveVariant::preserve) == "preserve");
  CHECK(op::variant_name(op::ObjectiveVariant::delete_mask) == "delete");
  CHECK(op::variant_name(op::ObjectiveVariant::direct) == "direct");
  for (const char* n : {"preserve", "delete", "direct"}) {
    CHECK(op::variant_name(op::variant_from_name(n)) == n);
  }
  CHECK_THROWS_AS(op::variant_from_name("bogus"), ConfigError);

  CHECK(op::combo_name(op::LossCombo::d) == "d");
  CHECK(op::combo_name(op::LossCombo::dg) == "d+g");
  CHECK(op::combo_name(op::LossCombo::dgn) == "d+g+n");
  for (const char* n : {"d", "d+g", "d+g+n"}) {
    CHECK(op::combo_name(op::combo_from_name(n)) == n);
  }
  CHECK_THROWS_AS(op::combo_from_name("g"), ConfigError);
}

TEST_CASE("option validation rejects bad hyperparameters") {
  op::MaskTrainOptions mo;
  CHECK_NOTHROW(mo.validate());
  mo.lambda = -1.0;
  CHECK_THROWS_AS(mo.validate(), ParameterError);
  mo.lambda = 5.0;
  mo.epochs = 0;
  CHECK_THROWS_AS(mo.validate(), ParameterError);
  mo.epochs = 1;
  mo.lr = 0.0;
  CHECK_THROWS_AS(mo.validate(), ParameterError);
  mo.lr = 1e-4;
  mo.binarize_eps = 1.5;
  CHECK_THROWS_AS(mo.validate(), ParameterError);

  op::DepthTrainOptions dopt;
  CHECK_NOTHROW(dopt.validate());
  dopt.batch_size = 0;
  CHECK_THROWS_AS(dopt.validate(), ParameterError);
}

TEST_CASE("objective values match the closed-form oracle") {
  Rng rng(31);
  LinearNet net(3, 5);
  net.freeze();
  for (int i = 0; i < 20; ++i) {
    Image img = random_image(6, 6, 3, rng, 0.1, 1.0);
    const Mask m = random_mask(6, 6, rng);
    const DepthMap y = [&] {
      nn::NoGradGuard guard;
      return nn::depth_from_node(*net.forward(nn::image_node(img)));
    }();
    const DepthMap yhat = [&] {
      nn::NoGradGuard guard;
      return nn::depth_from_node(
          *net.forward(nn::image_node(apply_mask(img, m))));
    }();
    const double lambda = rng.uniform(0.0, 8.0);
    CHECK(oracle::rel_err(op::objective_preserve(net, y, img, m, lambda),
                          oracle::objective_preserve(y, yhat, m, lambda)) <
          1e-12);
    CHECK(oracle::rel_err(op::objective_delete(net, y, img, m, lambda),
                          oracle::objective_delete(y, yhat, m, lambda)) <
          1e-12);
  }
}

TEST_CASE("preserve and delete are exact negations at lambda zero") {
  Rng rng(32);
  LinearNet net(3, 6);
  net.freeze();
  const Image img = random_image(6, 6, 3, rng, 0.1, 1.0);
  const Mask m = random_mask(6, 6, rng);
  const DepthMap y = [&] {
    nn::NoGradGuard guard;
    return nn::depth_from_node(*net.forward(nn::image_node(img)));
  }();
  const double p = op::objective_preserve(net, y, img, m, 0.0);
  const double d = op::objective_delete(net, y, img, m, 0.0);
  CHECK(p == -d);
}

TEST_CASE("objective is affine in lambda for a fixed mask") {
  Rng rng(33);
  LinearNet net(3, 7);
  net.freeze();
  const Image img = random_image(6, 6, 3, rng, 0.1, 1.0);
  const Mask m = random_mask(6, 6, rng);
  const DepthMap y = [&] {
    nn::NoGradGuard guard;
    return nn::depth_from_node(*net.forward(nn::image_node(img)));
  }();
  const double at0 = op::objective_preserve(net, y, img, m, 0.0);
  const double at2 = op::objective_preserve(net, y, img, m, 2.0);
  const double at4 = op::objective_preserve(net, y, img, m, 4.0);
  CHECK(at4 - at2 == doctest::Approx(at2 - at0).epsilon(1e-12));
  CHECK(at2 >= at0);
}

TEST_CASE("through-network gradients match finite differences") {
  const int H = 8, W = 8;
  Rng rng(34);
  Image img = random_image(H, W, 3, rng, -1.0, 1.0);
  img.normalized = true;

  auto n = md::build_depth_net(tiny("depth-ed2", 41));
  n->freeze();
  auto g = md::build_mask_net(tiny("mask-ed1", 42));
  Rng jitter(43);
  jitter_params(*g, jitter);

  const DepthMap y = n->predict(img);
  const double lambda = 2.0;

  // The training objective, assembled from public pieces: G and the
  // frozen N in one graph, l_dif plus the weighted mask l1 mean.
  auto objective = [&](bool grad) {
    nn::NodePtr out;
    auto build = [&] {
      auto m = g->forward(nn::image_node(img));
      auto yhat = n->forward(nn::broadcast_mul(nn::image_node(img), m));
      auto nodes = losses::l_dif_nodes(nn::depth_node(y), yhat);
      return nn::add(nodes.l_dif,
                     nn::affine(nn::mean_all(nn::abs_(m)), lambda, 0.0));
    };
    if (grad) return build();
    nn::NoGradGuard guard;
    return build();
  };

  g->zero_grad();
  nn::backward(objective(true));

  int checked = 0;
  for (const auto& p : g->parameters()) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < p.node->grad.size(); ++i) {
      if (std::fabs(p.node->grad[i]) > std::fabs(p.node->grad[idx])) idx = i;
    }
    if (std::fabs(p.node->grad[idx]) < 1e-7) continue;
    const auto eval = [&]() { return objective(false)->scalar(); };
    double num = 0.0;
    if (!oracle::stable_central_diff(eval, p.node->value[idx], 1e-4, num)) {
      continue;  // a kink sits inside the probe interval
    }
    CAPTURE(p.name);
    CHECK(oracle::rel_err(p.node->grad[idx], num) < 1e-3);
    ++checked;
  }
  CHECK(checked >= 4);
  for (const auto& p : n->parameters()) {
    CHECK(p.node->grad.empty());
  }
}

TEST_CASE("direct mask search honours its contracts") {
  Rng rng(35);
  LinearNet net(3, 8);
  Image img = random_image(8, 8, 3, rng, 0.2, 1.0);
  CHECK_THROWS_AS(op::optimize_mask_direct(net, img, 1.0, 10, 0.05),
                  ContractViolationError);
  net.freeze();
  CHECK_THROWS_AS(op::optimize_mask_direct(net, img, -1.0, 10, 0.05),
                  ParameterError);
  CHECK_THROWS_AS(op::optimize_mask_direct(net, img, 1.0, 0, 0.05),
                  ParameterError);
  CHECK_THROWS_AS(op::optimize_mask_direct(net, img, 1.0, 10, 0.0),
                  ParameterError);

  const auto res = op::optimize_mask_direct(net, img, 1.0, 60, 0.1);
  CHECK(res.trace.size() == 61);
  CHECK(res.initial_objective == res.trace.front());
  CHECK(res.final_objective <= res.initial_objective);
  double best = res.trace.front();
  for (double v : res.trace) best = std::min(best, v);
  CHECK(res.final_objective == best);
  CHECK(res.final_objective < res.initial_objective - 1e-6);
  CHECK_NOTHROW(res.mask.validate());

  const auto again = op::optimize_mask_direct(net, img, 1.0, 60, 0.1);
  CHECK(again.mask.data == res.mask.data);
  CHECK(again.trace == res.trace);
}

TEST_CASE("sparsity pressure grows with lambda in direct search") {
  Rng rng(36);
  LinearNet net(3, 9);
  net.freeze();
  Image img = random_image(8, 8, 3, rng, 0.2, 1.0);
  const auto loose = op::optimize_mask_direct(net, img, 0.0, 120, 0.15);
  const auto tight = op::optimize_mask_direct(net, img, 40.0, 120, 0.15);
  const double s_loose =
      sparseness(binarize(loose.mask, kDefaultBinarizeEps)).fraction_nonzero;
  const double s_tight =
      sparseness(binarize(tight.mask, kDefaultBinarizeEps)).fraction_nonzero;
  CHECK(s_tight < s_loose);
}

TEST_CASE("mask training freezes the target and lowers the objective") {
  auto n = md::build_depth_net(tiny("depth-ed2", 51));
  auto corpus = make_corpus(4, 16, 16, 52, n.get());
  auto g = md::build_mask_net(tiny("mask-ed1", 53));

  op::MaskTrainOptions opts;
  opts.lambda = 1.0;
  opts.epochs = 4;
  opts.lr = 5e-3;
  opts.batch_size = 2;
  opts.seed = 54;

  CHECK_THROWS_AS(op::train_mask_net(*g, *n, corpus.samples, opts),
                  ContractViolationError);  // target not frozen yet
  n->freeze();
  CHECK_THROWS_AS(
      op::train_mask_net(*g, *n, std::span<const op::TrainSample>{}, opts),
      ParameterError);

  const std::string g_before = g->digest();
  const std::string n_before = n->digest();
  const auto report = op::train_mask_net(*g, *n, corpus.samples, opts);

  CHECK(report.digest_before == n_before);
  CHECK(report.digest_after == n_before);
  CHECK(n->digest() == n_before);
  CHECK(g->digest() != g_before);
  CHECK(report.epochs.size() == 4);
  CHECK(report.seed == 54);
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    CHECK(report.epochs[e].epoch == static_cast<int>(e));
    CHECK(std::isfinite(report.epochs[e].objective));
    CHECK(report.epochs[e].sparseness >= 0.0);
    CHECK(report.epochs[e].sparseness <= 1.0);
    if (e >= 2) {
      const double prev = report.epochs[e - 1].objective;
      CHECK(report.epochs[e].objective <= prev + 0.1 * std::fabs(prev));
    }
  }
  CHECK(report.final_sparseness == report.epochs.back().sparseness);

  // A frozen mask net is not trainable.
  g->freeze();
  CHECK_THROWS_AS(op::train_mask_net(*g, *n, corpus.samples, opts),
                  ContractViolationError);
}

TEST_CASE("preserve pulls the fit loss down, delete pushes it up") {
  auto n = md::build_depth_net(tiny("depth-ed2", 61));
  n->freeze();
  auto corpus = make_corpus(4, 16, 16, 62, n.get());

  op::MaskTrainOptions opts;
  opts.lambda = 0.0;
  opts.epochs = 4;
  opts.lr = 1e-2;
  opts.batch_size = 2;
  opts.seed = 63;

  auto ldif_of = [](const op::EpochStats& s) {
    return s.l_depth + s.l_grad + s.l_normal;
  };

  opts.variant = op::ObjectiveVariant::preserve;
  auto gp = md::build_mask_net(tiny("mask-ed1", 64));
  const auto rp = op::train_mask_net(*gp, *n, corpus.samples, opts);
  CHECK(ldif_of(rp.epochs.back()) < ldif_of(rp.epochs.front()));

  opts.variant = op::ObjectiveVariant::delete_mask;
  auto gd = md::build_mask_net(tiny("mask-ed1", 64));
  const auto rd = op::train_mask_net(*gd, *n, corpus.samples, opts);
  CHECK(ldif_of(rd.epochs.back()) > ldif_of(rd.epochs.front()));
}

TEST_CASE("depth training fits its own labels") {
  auto corpus = make_corpus(6, 16, 16, 71);
  auto n = md::build_depth_net(tiny("depth-ed2", 72));
  const std::string before = n->digest();

  op::DepthTrainOptions opts;
  opts.epochs = 4;
  opts.lr = 1e-2;
  opts.batch_size = 2;
  opts.seed = 73;

  std::span<const op::TrainSample> all(corpus.samples);
  const auto report = op::train_depth_net(*n, all.subspan(0, 4),
                                          all.subspan(4, 2), opts);
  CHECK(n->digest() != before);
  CHECK(report.epochs.size() == 4);
  CHECK(std::isfinite(report.epochs.back().val_rmse));
  CHECK(report.epochs.back().objective < report.epochs.front().objective);

  for (const auto combo : {op::LossCombo::d, op::LossCombo::dg}) {
    auto net = md::build_depth_net(tiny("depth-ed2", 74));
    op::DepthTrainOptions o = opts;
    o.combo = combo;
    o.epochs = 1;
    const auto r = op::train_depth_net(*net, all.subspan(0, 2), {}, o);
    CHECK(std::isfinite(r.epochs.back().objective));
  }
}

TEST_CASE("training reports serialize to csv and json") {
  ScratchDir dir("optimize-report");
  auto n = md::build_depth_net(tiny("depth-ed2", 81));
  n->freeze();
  auto corpus = make_corpus(2, 16, 16, 82, n.get());
  auto g = md::build_mask_net(tiny("mask-ed1", 83));
  op::MaskTrainOptions opts;
  opts.epochs = 2;
  opts.batch_size = 2;
  const auto report = op::train_mask_net(*g, *n, corpus.samples, opts);

  const std::string csv = dir.file("train.csv");
  report.write_csv(csv);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,objective,l_depth,l_grad,l_normal,l1_term,sparseness");
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2);

  const std::string json = report.to_json_string();
  for (const char* key :
       {"epochs", "final_sparseness", "digest_before", "digest_after"}) {
    CHECK(json.find(key) != std::string::npos);
  }
}

TEST_CASE("adam takes bias-corrected steps and rejects frozen params") {
  auto w = nn::from_values({1, 1, 1, 1}, {1.0}, true);
  nn::AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  nn::Adam adam({{"w", w}}, cfg);
  CHECK(adam.step_count() == 0);

  w->grad.assign(1, 0.5);
  adam.step();
  CHECK(adam.step_count() == 1);
  // First bias-corrected step moves by almost exactly lr.
  CHECK(w->value[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));

  // Gradient descent on (w - 3)^2 converges to the minimum.
  for (int i = 0; i < 400; ++i) {
    adam.zero_grad();
    w->grad[0] = 2.0 * (w->value[0] - 3.0);
    adam.step();
  }
  CHECK(w->value[0] == doctest::Approx(3.0).epsilon(1e-2));

  auto frozen = nn::from_values({1, 1, 1, 1}, {1.0}, false);
  CHECK_THROWS_AS(nn::Adam({{"frozen", frozen}}, cfg),
                  ContractViolationError);
}

TEST_CASE("weight decay shrinks parameters absent any gradient signal") {
  auto w = nn::from_values({1, 1, 1, 1}, {2.0}, true);
  nn::AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 1.0;
  nn::Adam adam({{"w", w}}, cfg);
  for (int i = 0; i < 50; ++i) {
    w->grad.assign(1, 0.0);
    adam.step();
  }
  CHECK(std::fabs(w->value[0]) < 2.0);
}
