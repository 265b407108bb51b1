#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "maskprobe/image.hpp"
#include "maskprobe/layers.hpp"

namespace maskprobe::models {

struct ModelConfig {
  std::string architecture;
  int in_channels = 3;
  int base_width = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

// Target network: normalized image in, strictly positive depth out, same
// spatial size. The softplus head guarantees positivity.
class DepthNet : public nn::Network {
 public:
  DepthMap predict(const Image& image);
  const ModelConfig& config() const { return config_; }

 protected:
  explicit DepthNet(const ModelConfig& config)
      : Network(config.architecture), config_(config) {}
  ModelConfig config_;
};

// Mask network: image in, per-pixel relevance in (0,1) out via a final
// 3x3 convolution and logistic squashing.
class MaskNet : public nn::Network {
 public:
  Mask predict(const Image& image);
  const ModelConfig& config() const { return config_; }

 protected:
  explicit MaskNet(const ModelConfig& config)
      : Network(config.architecture), config_(config) {}
  ModelConfig config_;
};

std::unique_ptr<DepthNet> build_depth_net(const ModelConfig& config);
std::unique_ptr<MaskNet> build_mask_net(const ModelConfig& config);
std::vector<std::string> depth_architectures();
std::vector<std::string> mask_architectures();

struct CheckpointInfo {
  std::string architecture;
  int epoch = 0;
  std::string digest;
  ModelConfig config;
};

void save_checkpoint(const nn::Network& net, const ModelConfig& config,
                     const std::string& path, int epoch);
CheckpointInfo read_checkpoint_info(const std::string& path);
std::unique_ptr<DepthNet> load_depth_checkpoint(const std::string& path);
std::unique_ptr<MaskNet> load_mask_checkpoint(const std::string& path);

}  // namespace maskprobe::models
