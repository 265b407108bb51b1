#pragma once

#include <cstddef>
#include <vector>

namespace maskprobe {

// Minimum spatial extent accepted for grids. Tiny rasters (down to 4x4)
// are legitimate optimization instances.
inline constexpr int kMinGridSize = 4;

// H x W x C scalar grid, channel-planar storage (c, then row-major h, w).
// `normalized` marks data produced by z-score normalization.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  bool normalized = false;
  std::vector<double> data;  // size height*width*channels, planar

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  double& at(int r, int c, int ch) {
    return data[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }
  double at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
};

// H x W grid of strictly positive scene distances (ground truth) or
// finite predictions.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  DepthMap() = default;
  DepthMap(int h, int w, double fill = 0.0);

  double& at(int r, int c) {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }

  // Throws unless every value is strictly positive (ground-truth contract).
  void validate_ground_truth() const;
  // Throws unless every value is finite (prediction contract).
  void validate_finite() const;
};

// H x W relevance grid with values in [0,1]; `binary` marks {0,1} maps.
struct Mask {
  int height = 0;
  int width = 0;
  bool binary = false;
  std::vector<double> data;

  Mask() = default;
  Mask(int h, int w, double fill = 0.0);

  double& at(int r, int c) {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }

  // Throws if any value is outside [0,1] (or outside {0,1} when binary).
  void validate() const;
};

struct SparsenessReport {
  double fraction_nonzero = 0.0;
  std::size_t pixel_count = 0;
};

// Per-channel z-score statistics of a producing dataset.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

}  // namespace maskprobe
