#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskprobe/image.hpp"
#include "maskprobe/image_ops.hpp"
#include "maskprobe/models.hpp"
#include "maskprobe/optimize.hpp"
#include "maskprobe/synthgen.hpp"

namespace maskprobe::analysis {

// One sweep cell: a mask net trained at this lambda with this seed,
// evaluated on the test split against ground truth.
struct SweepRow {
  double lambda = 0.0;
  double rmse_m = 0.0;       // with the continuous mask
  double rmse_mprime = 0.0;  // with the binarized mask
  double sparseness = 0.0;   // of the binarized mask
  std::uint64_t seed = 0;
};

inline constexpr const char* kSweepCsvHeader =
    "lambda,rmse_m,rmse_mprime,sparseness,seed";

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

// Train/eval view over a dataset split.
std::vector<optimize::TrainSample> split_view(
    const synthgen::Dataset& ds, const std::vector<std::size_t>& split);

struct MaskEval {
  double rmse_m = 0.0;
  double rmse_mprime = 0.0;
  double sparseness = 0.0;
};
MaskEval evaluate_mask_net(models::DepthNet& n, models::MaskNet& g,
                           const synthgen::Dataset& ds,
                           const std::vector<std::size_t>& split, double eps);

struct SweepOptions {
  std::vector<double> lambdas = {0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<std::uint64_t> seeds = {1, 2};
  double binarize_eps = kDefaultBinarizeEps;
  models::ModelConfig mask_config;
  optimize::MaskTrainOptions train;  // lambda and seed overwritten per cell

  void validate() const;
};

// Trains one mask net per (lambda, seed) cell and evaluates it; rows
// come back ordered by the lambda list, seeds inner.
std::vector<SweepRow> lambda_sweep(models::DepthNet& n,
                                   const synthgen::Dataset& ds,
                                   const SweepOptions& options);

struct EdgePoint {
  double threshold = 0.0;
  double sparseness = 0.0;
  double rmse = 0.0;
};

// Test-split RMSE/sparseness when masking with thresholded Sobel edge
// maps of the raw images.
std::vector<EdgePoint> edge_curve(models::DepthNet& n,
                                  const synthgen::Dataset& ds,
                                  const std::vector<double>& thresholds);

struct EdgeBaselineRow {
  double threshold = 0.0;
  double edge_sparseness = 0.0;
  double edge_rmse = 0.0;
  double learned_lambda = 0.0;
  double learned_sparseness = 0.0;
  double learned_rmse = 0.0;
};

struct EdgeBaselineReport {
  std::vector<EdgeBaselineRow> rows;
  std::string to_json_string() const;
};

// Pairs every edge point with the learned-mask row of nearest
// sparseness; ties break toward the smaller lambda.
EdgeBaselineReport edge_baseline(models::DepthNet& n,
                                 const synthgen::Dataset& ds,
                                 const std::vector<double>& thresholds,
                                 const std::vector<SweepRow>& learned);

struct AblationOptions {
  double lambda = 5.0;
  std::uint64_t seed = 1;
  double binarize_eps = kDefaultBinarizeEps;
  models::ModelConfig depth_config;
  models::ModelConfig mask_config;
  optimize::DepthTrainOptions depth_train;  // combo overwritten per variant
  optimize::MaskTrainOptions mask_train;    // lambda/seed overwritten
  std::string figure_dir;  // when set, one overlay PNG per combo
  std::string colormap = "gray";
};

struct AblationRow {
  std::string combo;
  double val_rmse = 0.0;         // trained target quality on val split
  double masked_rmse = 0.0;      // N(I (*) M) vs ground truth on test
  double mask_sparseness = 0.0;  // binarized
  double mask_tv = 0.0;          // mean total variation of continuous masks
  std::string overlay_path;      // empty unless figure_dir was set
};

struct AblationReport {
  std::vector<AblationRow> rows;  // exactly d, d+g, d+g+n
  std::string to_json_string() const;
};

// Trains one target net per loss combination (same seed), then one mask
// net per target at a fixed lambda.
AblationReport loss_ablation(const synthgen::Dataset& ds,
                             const AblationOptions& options);

struct OverlayFigure {
  int panel_height = 0;
  int panel_width = 0;
  int panel_count = 4;
  std::string colormap;
  std::vector<double> rgb;  // composed H x (4W) interleaved [0,1]
};

// Panels left to right: input image, mask (white = 1), masked
// prediction, ground truth. Depth panels share one display range.
OverlayFigure render_overlay(const Image& raw_image, const Mask& m,
                             const DepthMap& yhat, const DepthMap& gt,
                             const std::string& colormap,
                             const std::string& png_path);

struct CueStat {
  std::string cue;
  std::size_t pixels = 0;
  double mean = 0.0;
  double ratio = 0.0;  // cue mean / global mean
};

struct MaskStatsReport {
  double global_mean = 0.0;
  std::vector<CueStat> cues;
  std::vector<std::string> notes;
  std::string to_json_string() const;
};

MaskStatsReport mask_statistics(const Mask& m,
                                const synthgen::CueAnnotations& cues);

}  // namespace maskprobe::analysis
