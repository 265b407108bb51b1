#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskprobe/image.hpp"
#include "maskprobe/image_ops.hpp"

namespace maskprobe::synthgen {

// Camera sits at the origin looking along +z, y pointing down (rows
// grow downward). Depth is distance along the camera z axis, so every
// ground-truth value has a closed form.

struct SurfaceDesc {
  double albedo[3] = {0.8, 0.8, 0.8};
  int texture_id = 0;  // 0 none, 1 checker, 2 stripes
  double texture_scale = 0.8;
};

struct Box {
  double cx = 0, cy = 0, cz = 5;  // center
  double hx = 0.5, hy = 0.5, hz = 0.5;  // half extents
  SurfaceDesc surface;
};

struct Scene {
  std::string difficulty;
  std::uint64_t seed = 0;

  double focal_rel = 0.5;  // focal length in pixels = focal_rel * width
  double yaw = 0.0, pitch = 0.0;
  double near = 0.5, far = 20.0;

  bool has_floor = false;
  double floor_y = 1.5;  // camera height above the floor
  SurfaceDesc floor_s;
  bool has_ceiling = false;
  double ceiling_y = -2.0;
  SurfaceDesc ceiling_s;
  bool has_left = false;
  double left_x = -2.0;
  SurfaceDesc left_s;
  bool has_right = false;
  double right_x = 2.0;
  SurfaceDesc right_s;
  double back_z = 12.0;  // far plane, always present
  SurfaceDesc back_s;

  std::vector<Box> boxes;
  bool has_vanishing_point = false;
};

struct CueAnnotations {
  // Sorted pixel indices (row * width + col).
  std::vector<std::uint32_t> edges;
  std::vector<std::uint32_t> object_interior;
  std::vector<std::uint32_t> vanishing_region;
  double vanish_row = -1.0, vanish_col = -1.0;  // negative when absent
};

struct Sample {
  Image image;       // raw shaded render, pre-normalization
  DepthMap depth;    // analytic ground truth
  Scene scene;
  CueAnnotations cues;
};

Scene generate_scene(std::uint64_t seed, const std::string& difficulty);
Sample render(const Scene& scene, int height, int width);

struct DatasetConfig {
  int n_samples = 200;
  std::uint64_t seed = 1;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double test_ratio = 0.1;
  int height = 64;
  int width = 64;
  std::string difficulty = "corridor";
  std::string out_dir;

  void validate() const;
};

std::string dataset_config_hash(const DatasetConfig& config);

// Writes samples/<id>.img.bin, samples/<id>.depth.bin (plus sidecars),
// cues/<id>.json and manifest.json under config.out_dir. Rebuilding with
// the same config is byte-identical.
void build_dataset(const DatasetConfig& config);

struct DatasetEntry {
  std::string id;
  Image image;
  DepthMap depth;
  CueAnnotations cues;
};

struct Dataset {
  DatasetConfig config;
  ChannelStats stats;  // train-split statistics used for normalization
  std::vector<DatasetEntry> entries;
  std::vector<std::size_t> train, val, test;  // indices into entries
};

// Loads every sample; with normalize set, z-score statistics come from
// the train split and apply to all splits.
Dataset load_dataset(const std::string& dir, bool normalize = true);

}  // namespace maskprobe::synthgen
