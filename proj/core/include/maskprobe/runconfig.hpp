#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskprobe/models.hpp"
#include "maskprobe/optimize.hpp"
#include "maskprobe/synthgen.hpp"

namespace maskprobe::cli {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Resolved tool configuration. Defaults mirror the standard recipe:
// lr 1e-4, weight decay 1e-4, lambda 5, binarization threshold 0.025.
struct RunConfig {
  synthgen::DatasetConfig dataset = [] {
    synthgen::DatasetConfig d;
    d.out_dir = "data";
    return d;
  }();

  std::string depth_architecture = "depth-ed4";
  std::string mask_architecture = "mask-ed3";
  int base_width = 16;

  double lambda = 5.0;
  std::string variant = "preserve";
  double binarize_eps = 0.025;

  double lr = 1e-4;
  double weight_decay = 1e-4;
  int epochs = 10;
  int batch_size = 8;
  std::uint64_t seed = 1;

  std::string depth_combo = "d+g+n";
  double depth_lr = 1e-3;
  int depth_epochs = 10;

  std::vector<double> sweep_lambdas = {0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<std::uint64_t> sweep_seeds = {1, 2};

  std::vector<double> edge_thresholds = {0.05, 0.1, 0.2, 0.35, 0.5};

  int direct_steps = 400;
  double direct_lr = 0.05;
  std::string direct_sample;  // sample id; empty means first test sample

  std::string visualize_input;  // sample id; empty means first test sample
  std::string colormap = "gray";

  std::string out_dir = "runs";
  std::string target_checkpoint;  // trained N (consumed by mask verbs)
  std::string mask_checkpoint;    // trained G (consumed by visualize)
  std::string sweep_csv;          // learned-mask rows (consumed by edge-baseline)

  // Parses a config object, rejecting unknown keys. An empty object
  // yields the defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& toml_path);

  nlohmann::json to_json() const;
  std::string hash() const;  // over the canonical JSON form

  void validate() const;
};

struct ArtifactEntry {
  std::string path;  // relative to the run directory
  std::string digest;
};

struct RunManifest {
  std::string run_id;
  std::string verb;
  std::string config_hash;
  std::string library_version = kLibraryVersion;
  std::map<std::string, std::string> input_digests;
  std::vector<ArtifactEntry> artifacts;
  std::string created_utc;
  double wall_seconds = 0.0;
  nlohmann::json config;  // full resolved config for reproducibility

  std::string to_json_string() const;
  static RunManifest from_json_string(const std::string& text);
};

// Content-addressed run id: verb plus resolved config plus input digests.
// Identical work maps to the same directory, so completed runs short-
// circuit to an up-to-date notice.
std::string make_run_id(const std::string& verb, const RunConfig& config,
                        const std::map<std::string, std::string>& inputs);

std::string utc_timestamp();

// Writes manifest.json into the run directory, digesting every artifact.
void write_run_manifest(const std::string& run_dir, RunManifest manifest);
bool read_run_manifest(const std::string& run_dir, RunManifest& out);

// Exclusive per-directory lock. Throws IoError when already held.
class LockFile {
 public:
  explicit LockFile(const std::string& dir);
  ~LockFile();
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

}  // namespace maskprobe::cli
