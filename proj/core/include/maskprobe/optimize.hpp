#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "maskprobe/image.hpp"
#include "maskprobe/image_ops.hpp"
#include "maskprobe/models.hpp"

namespace maskprobe::optimize {

enum class ObjectiveVariant { preserve, delete_mask, direct };

std::string variant_name(ObjectiveVariant v);
ObjectiveVariant variant_from_name(const std::string& name);

struct ObjectiveConfig {
  double lambda = 5.0;
  ObjectiveVariant variant = ObjectiveVariant::preserve;

  void validate() const;
};

// Objective values for a concrete mask. The net's forward runs in
// evaluation mode; losses and the sparsity term accumulate in double,
// matching the differentiable route bit for bit.
double objective_preserve(nn::Network& net, const DepthMap& y, const Image& i,
                          const Mask& m, double lambda);
double objective_delete(nn::Network& net, const DepthMap& y, const Image& i,
                        const Mask& m, double lambda);

struct DirectMaskResult {
  Mask mask;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::vector<double> trace;  // objective per step, step 0 first
};

// Per-image mask search: gradient descent on per-pixel logits through a
// logistic map, Adam steps, best-seen mask returned.
DirectMaskResult optimize_mask_direct(nn::Network& net, const Image& image,
                                      double lambda, int steps, double lr);

struct TrainSample {
  const Image* image = nullptr;
  const DepthMap* depth = nullptr;
};

struct EpochStats {
  int epoch = 0;
  double objective = 0.0;
  double l_depth = 0.0;
  double l_grad = 0.0;
  double l_normal = 0.0;
  double l1_term = 0.0;    // lambda-weighted sparsity term
  double sparseness = 0.0; // binarized mask sparseness, default threshold
  double val_rmse = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_sparseness = 0.0;
  double final_mean_ldif = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string digest_before;
  std::string digest_after;

  std::string to_json_string() const;
  // Header: epoch,objective,l_depth,l_grad,l_normal,l1_term,sparseness
  void write_csv(const std::string& path) const;
};

struct MaskTrainOptions {
  double lambda = 5.0;
  ObjectiveVariant variant = ObjectiveVariant::preserve;
  int epochs = 10;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 8;
  double binarize_eps = kDefaultBinarizeEps;
  std::uint64_t seed = 0;

  void validate() const;
};

// Algorithm: freeze N, then per batch minimize
//   l_dif(N(I), N(I (*) G(I))) + lambda * mean|G(I)|
// over G's parameters with Adam. N must already be frozen; its digest is
// recorded before and verified after.
TrainReport train_mask_net(models::MaskNet& g, models::DepthNet& n,
                           std::span<const TrainSample> train,
                           const MaskTrainOptions& options);

enum class LossCombo { d, dg, dgn };

std::string combo_name(LossCombo c);
LossCombo combo_from_name(const std::string& name);

struct DepthTrainOptions {
  LossCombo combo = LossCombo::dgn;
  int epochs = 10;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int batch_size = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

TrainReport train_depth_net(models::DepthNet& n,
                            std::span<const TrainSample> train,
                            std::span<const TrainSample> val,
                            const DepthTrainOptions& options);

}  // namespace maskprobe::optimize
