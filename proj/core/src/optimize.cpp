#include "maskprobe/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "maskprobe/errors.hpp"
#include "maskprobe/losses.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/text.hpp"

namespace maskprobe::optimize {

using nn::NodePtr;

namespace {

DepthMap eval_depth(nn::Network& net, const Image& image) {
  nn::NoGradGuard guard;
  auto out = net.forward(nn::image_node(image));
  return nn::depth_from_node(*out);
}

struct ObjectiveNodes {
  losses::LossNodes diff;
  NodePtr l1;  // lambda-weighted sparsity term
  NodePtr objective;
};

ObjectiveNodes make_objective(ObjectiveVariant variant, double lambda,
                              const NodePtr& y, const NodePtr& yhat,
                              const NodePtr& m) {
  ObjectiveNodes o;
  o.diff = losses::l_dif_nodes(y, yhat);
  if (variant == ObjectiveVariant::delete_mask) {
    o.l1 = nn::affine(nn::mean_all(nn::abs_(nn::affine(m, -1.0, 1.0))),
                      lambda, 0.0);
    o.objective = nn::add(nn::affine(o.diff.l_dif, -1.0, 0.0), o.l1);
  } else {
    o.l1 = nn::affine(nn::mean_all(nn::abs_(m)), lambda, 0.0);
    o.objective = nn::add(o.diff.l_dif, o.l1);
  }
  return o;
}

void check_lambda(double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ParameterError("lambda must be finite and >= 0, got " +
                         std::to_string(lambda));
  }
}

std::string trace_tail(const std::vector<double>& trace, std::size_t n = 5) {
  std::ostringstream os;
  const std::size_t start = trace.size() > n ? trace.size() - n : 0;
  for (std::size_t i = start; i < trace.size(); ++i) {
    if (i > start) os << " ";
    os << trace[i];
  }
  return os.str();
}

double fraction_at_least(const std::vector<double>& v, double eps) {
  std::size_t count = 0;
  for (double x : v)
    if (x >= eps) ++count;
  return static_cast<double>(count) / static_cast<double>(v.size());
}

nlohmann::json epoch_to_json(const EpochStats& e) {
  nlohmann::json j;
  j["epoch"] = e.epoch;
  j["objective"] = e.objective;
  j["l_depth"] = e.l_depth;
  j["l_grad"] = e.l_grad;
  j["l_normal"] = e.l_normal;
  j["l1_term"] = e.l1_term;
  j["sparseness"] = e.sparseness;
  if (std::isfinite(e.val_rmse)) {
    j["val_rmse"] = e.val_rmse;
  } else {
    j["val_rmse"] = nullptr;
  }
  return j;
}

}  // namespace

std::string variant_name(ObjectiveVariant v) {
  switch (v) {
    case ObjectiveVariant::preserve: return "preserve";
    case ObjectiveVariant::delete_mask: return "delete";
    case ObjectiveVariant::direct: return "direct";
  }
  throw ParameterError("bad objective variant");
}

ObjectiveVariant variant_from_name(const std::string& name) {
  if (name == "preserve") return ObjectiveVariant::preserve;
  if (name == "delete") return ObjectiveVariant::delete_mask;
  if (name == "direct") return ObjectiveVariant::direct;
  throw ConfigError("unknown objective variant '" + name +
                    "' (known: preserve, delete, direct)");
}

void ObjectiveConfig::validate() const { check_lambda(lambda); }

double objective_preserve(nn::Network& net, const DepthMap& y, const Image& i,
                          const Mask& m, double lambda) {
  check_lambda(lambda);
  const Image masked = apply_mask(i, m);
  const DepthMap yhat = eval_depth(net, masked);
  const losses::LossBreakdown bd = losses::l_dif(y, yhat);
  double acc = 0.0;
  for (double v : m.data) acc += std::fabs(v);
  const double l1 =
      lambda * (acc * (1.0 / static_cast<double>(m.data.size())));
  return bd.l_dif + l1;
}

double objective_delete(nn::Network& net, const DepthMap& y, const Image& i,
                        const Mask& m, double lambda) {
  check_lambda(lambda);
  const Image masked = apply_mask(i, m);
  const DepthMap yhat = eval_depth(net, masked);
  const losses::LossBreakdown bd = losses::l_dif(y, yhat);
  double acc = 0.0;
  for (double v : m.data) acc += std::fabs(1.0 - v);
  const double l1 =
      lambda * (acc * (1.0 / static_cast<double>(m.data.size())));
  return -bd.l_dif + l1;
}

DirectMaskResult optimize_mask_direct(nn::Network& net, const Image& image,
                                      double lambda, int steps, double lr) {
  if (!net.frozen()) {
    throw ContractViolationError(
        "optimize_mask_direct: target network must be frozen");
  }
  check_lambda(lambda);
  if (steps < 1) throw ParameterError("optimize_mask_direct: steps < 1");
  if (lr <= 0.0) throw ParameterError("optimize_mask_direct: lr <= 0");

  const DepthMap y = eval_depth(net, image);
  auto y_node = nn::depth_node(y);
  auto i_node = nn::image_node(image);
  auto logits =
      nn::leaf(nn::Shape{1, 1, image.height, image.width}, true);

  nn::AdamConfig acfg;
  acfg.lr = lr;
  acfg.weight_decay = 0.0;  // decay would distort the sparsity objective
  nn::Adam adam({{"logits", logits}}, acfg);

  DirectMaskResult res;
  res.mask = Mask(image.height, image.width);
  double best = std::numeric_limits<double>::infinity();

  auto evaluate = [&](bool with_grad) -> double {
    NodePtr m, obj;
    if (with_grad) {
      m = nn::sigmoid(logits);
      auto yhat = net.forward(nn::broadcast_mul(i_node, m));
      auto nodes = make_objective(ObjectiveVariant::direct, lambda, y_node,
                                  yhat, m);
      obj = nodes.objective;
    } else {
      nn::NoGradGuard guard;
      m = nn::sigmoid(logits);
      auto yhat = net.forward(nn::broadcast_mul(i_node, m));
      obj = make_objective(ObjectiveVariant::direct, lambda, y_node, yhat, m)
                .objective;
    }
    const double v = obj->scalar();
    res.trace.push_back(v);
    if (!std::isfinite(v)) {
      throw DivergenceError(
          "optimize_mask_direct: non-finite objective at step " +
          std::to_string(res.trace.size() - 1) + "; trace tail: " +
          trace_tail(res.trace));
    }
    if (v < best) {
      best = v;
      std::copy(m->value.begin(), m->value.end(), res.mask.data.begin());
    }
    if (with_grad) {
      adam.zero_grad();
      nn::backward(obj);
      adam.step();
    }
    return v;
  };

  for (int s = 0; s < steps; ++s) {
    const double v = evaluate(true);
    if (s == 0) res.initial_objective = v;
  }
  evaluate(false);  // score the endpoint of the last update too

  res.final_objective = best;
  res.mask.validate();
  return res;
}

void MaskTrainOptions::validate() const {
  check_lambda(lambda);
  if (epochs < 1) throw ParameterError("train: epochs < 1");
  if (lr <= 0.0) throw ParameterError("train: lr <= 0");
  if (weight_decay < 0.0) throw ParameterError("train: weight decay < 0");
  if (batch_size < 1) throw ParameterError("train: batch size < 1");
  if (binarize_eps < 0.0 || binarize_eps > 1.0) {
    throw ParameterError("train: binarize threshold outside [0,1]");
  }
}

void DepthTrainOptions::validate() const {
  if (epochs < 1) throw ParameterError("train: epochs < 1");
  if (lr <= 0.0) throw ParameterError("train: lr <= 0");
  if (weight_decay < 0.0) throw ParameterError("train: weight decay < 0");
  if (batch_size < 1) throw ParameterError("train: batch size < 1");
}

std::string combo_name(LossCombo c) {
  switch (c) {
    case LossCombo::d: return "d";
    case LossCombo::dg: return "d+g";
    case LossCombo::dgn: return "d+g+n";
  }
  throw ParameterError("bad loss combo");
}

LossCombo combo_from_name(const std::string& name) {
  if (name == "d") return LossCombo::d;
  if (name == "d+g") return LossCombo::dg;
  if (name == "d+g+n") return LossCombo::dgn;
  throw ConfigError("unknown loss combo '" + name +
                    "' (known: d, d+g, d+g+n)");
}

TrainReport train_mask_net(models::MaskNet& g, models::DepthNet& n,
                           std::span<const TrainSample> train,
                           const MaskTrainOptions& options) {
  options.validate();
  if (train.empty()) throw ParameterError("train_mask_net: empty dataset");
  if (!n.frozen()) {
    throw ContractViolationError(
        "train_mask_net: target network must be frozen");
  }
  if (g.frozen()) {
    throw ContractViolationError("train_mask_net: mask network is frozen");
  }
  const auto t0 = std::chrono::steady_clock::now();

  TrainReport report;
  report.seed = options.seed;
  report.digest_before = n.digest();

  // N is frozen, so its prediction per sample is a constant; compute the
  // targets once instead of per epoch.
  std::vector<DepthMap> targets;
  targets.reserve(train.size());
  for (const auto& s : train) targets.push_back(eval_depth(n, *s.image));

  nn::Adam adam(g.parameters(),
                nn::AdamConfig{options.lr, 0.9, 0.999, 1e-8,
                               options.weight_decay});
  Rng order_rng(derive_seed(options.seed, "batch-order"));
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);

  std::vector<double> recent;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    order_rng.shuffle(idx);
    double sum_obj = 0, sum_ld = 0, sum_lg = 0, sum_ln = 0, sum_l1 = 0,
           sum_sp = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < idx.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t stop =
          std::min(idx.size(), start + static_cast<std::size_t>(
                                           options.batch_size));
      std::vector<const Image*> images;
      std::vector<const DepthMap*> ys;
      for (std::size_t k = start; k < stop; ++k) {
        images.push_back(train[idx[k]].image);
        ys.push_back(&targets[idx[k]]);
      }
      auto i_node = nn::image_batch_node(images);
      auto y_node = nn::depth_batch_node(ys);

      auto m = g.forward(i_node);
      auto yhat = n.forward(nn::broadcast_mul(i_node, m));
      auto nodes =
          make_objective(options.variant, options.lambda, y_node, yhat, m);

      const double v = nodes.objective->scalar();
      recent.push_back(v);
      if (!std::isfinite(v)) {
        throw DivergenceError("train_mask_net: non-finite objective in epoch " +
                              std::to_string(epoch) + "; trace tail: " +
                              trace_tail(recent));
      }
      const double b = static_cast<double>(stop - start);
      sum_obj += v * b;
      sum_ld += nodes.diff.l_depth->scalar() * b;
      sum_lg += nodes.diff.l_grad->scalar() * b;
      sum_ln += nodes.diff.l_normal->scalar() * b;
      sum_l1 += nodes.l1->scalar() * b;
      sum_sp += fraction_at_least(m->value, options.binarize_eps) * b;
      seen += stop - start;

      adam.zero_grad();
      nn::backward(nodes.objective);
      adam.step();
    }
    EpochStats e;
    e.epoch = epoch;
    const double inv = 1.0 / static_cast<double>(seen);
    e.objective = sum_obj * inv;
    e.l_depth = sum_ld * inv;
    e.l_grad = sum_lg * inv;
    e.l_normal = sum_ln * inv;
    e.l1_term = sum_l1 * inv;
    e.sparseness = sum_sp * inv;
    report.epochs.push_back(e);
  }

  report.digest_after = n.digest();
  if (report.digest_after != report.digest_before) {
    throw ContractViolationError(
        "train_mask_net: target network parameters changed during training");
  }
  const EpochStats& last = report.epochs.back();
  report.final_sparseness = last.sparseness;
  report.final_mean_ldif = last.l_depth + last.l_grad + last.l_normal;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

TrainReport train_depth_net(models::DepthNet& n,
                            std::span<const TrainSample> train,
                            std::span<const TrainSample> val,
                            const DepthTrainOptions& options) {
  options.validate();
  if (train.empty()) throw ParameterError("train_depth_net: empty dataset");
  if (n.frozen()) {
    throw ContractViolationError("train_depth_net: network is frozen");
  }
  const auto t0 = std::chrono::steady_clock::now();

  TrainReport report;
  report.seed = options.seed;
  report.digest_before = n.digest();

  nn::Adam adam(n.parameters(),
                nn::AdamConfig{options.lr, 0.9, 0.999, 1e-8,
                               options.weight_decay});
  Rng order_rng(derive_seed(options.seed, "batch-order"));
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);

  std::vector<double> recent;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    order_rng.shuffle(idx);
    double sum_obj = 0, sum_ld = 0, sum_lg = 0, sum_ln = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < idx.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t stop =
          std::min(idx.size(), start + static_cast<std::size_t>(
                                           options.batch_size));
      std::vector<const Image*> images;
      std::vector<const DepthMap*> gts;
      for (std::size_t k = start; k < stop; ++k) {
        images.push_back(train[idx[k]].image);
        gts.push_back(train[idx[k]].depth);
      }
      auto i_node = nn::image_batch_node(images);
      auto y_node = nn::depth_batch_node(gts);

      auto yhat = n.forward(i_node);
      auto diff = losses::l_dif_nodes(y_node, yhat);
      NodePtr loss;
      switch (options.combo) {
        case LossCombo::d: loss = diff.l_depth; break;
        case LossCombo::dg: loss = nn::add(diff.l_depth, diff.l_grad); break;
        case LossCombo::dgn: loss = diff.l_dif; break;
      }

      const double v = loss->scalar();
      recent.push_back(v);
      if (!std::isfinite(v)) {
        throw DivergenceError(
            "train_depth_net: non-finite loss in epoch " +
            std::to_string(epoch) + "; trace tail: " + trace_tail(recent));
      }
      const double b = static_cast<double>(stop - start);
      sum_obj += v * b;
      sum_ld += diff.l_depth->scalar() * b;
      sum_lg += diff.l_grad->scalar() * b;
      sum_ln += diff.l_normal->scalar() * b;
      seen += stop - start;

      adam.zero_grad();
      nn::backward(loss);
      adam.step();
    }
    EpochStats e;
    e.epoch = epoch;
    const double inv = 1.0 / static_cast<double>(seen);
    e.objective = sum_obj * inv;
    e.l_depth = sum_ld * inv;
    e.l_grad = sum_lg * inv;
    e.l_normal = sum_ln * inv;
    if (!val.empty()) {
      nn::NoGradGuard guard;
      double acc = 0.0;
      for (const auto& s : val) {
        acc += losses::rmse(*s.depth, n.predict(*s.image));
      }
      e.val_rmse = acc / static_cast<double>(val.size());
    }
    report.epochs.push_back(e);
  }

  report.digest_after = n.digest();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

std::string TrainReport::to_json_string() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["wall_seconds"] = wall_seconds;
  j["final_sparseness"] = final_sparseness;
  j["final_mean_ldif"] = final_mean_ldif;
  j["digest_before"] = digest_before;
  j["digest_after"] = digest_after;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) rows.push_back(epoch_to_json(e));
  j["epochs"] = std::move(rows);
  return j.dump(2);
}

void TrainReport::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics csv for writing: " + path);
  out << "epoch,objective,l_depth,l_grad,l_normal,l1_term,sparseness\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_double(e.objective) << ','
        << format_double(e.l_depth) << ',' << format_double(e.l_grad) << ','
        << format_double(e.l_normal) << ',' << format_double(e.l1_term) << ','
        << format_double(e.sparseness) << '\n';
  }
  if (!out) throw IoError("failed writing metrics csv: " + path);
}

}  // namespace maskprobe::optimize
