#pragma once

#include <memory>
#include <string>
#include <vector>

#include "maskprobe/rng.hpp"
#include "maskprobe/tensor.hpp"

namespace maskprobe::nn {

struct Parameter {
  std::string name;
  NodePtr node;
};

// Base class for the hand-written convolutional nets. Concrete models
// register named parameters in construction order; that order is the
// canonical one for digests and checkpoints.
class Network {
 public:
  virtual ~Network() = default;

  // x is (B,C,H,W); the result shape depends on the model.
  virtual NodePtr forward(const NodePtr& x) = 0;

  const std::string& architecture() const { return arch_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter>& parameters() { return params_; }
  std::size_t parameter_count() const;

  // Disables gradient accumulation into every parameter. Irreversible.
  void freeze();
  bool frozen() const { return frozen_; }

  // SHA-256 over architecture id, parameter names, shapes and values in
  // canonical single-precision little-endian form.
  std::string digest() const;

  void zero_grad();

 protected:
  friend class Conv2dBlock;

  explicit Network(std::string arch) : arch_(std::move(arch)) {}

  NodePtr register_param(const std::string& name, const Shape& shape);

  std::string arch_;
  std::vector<Parameter> params_;
  bool frozen_ = false;
};

// Convolution block: owns a (Co,Ci,k,k) kernel and (1,Co,1,1) bias,
// He-normal initialised from the given stream.
class Conv2dBlock {
 public:
  Conv2dBlock() = default;
  Conv2dBlock(Network& owner, const std::string& name, int cin, int cout,
              int k, int stride, Rng& rng);

  NodePtr operator()(const NodePtr& x) const;

  const NodePtr& weight() const { return w_; }
  const NodePtr& bias() const { return b_; }

 private:
  NodePtr w_, b_;
  int stride_ = 1;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // L2 term folded into the gradient
};

// Standard Adam over a fixed parameter list. Rejects frozen parameters
// at construction: training a frozen net is a contract violation, not a
// silent no-op.
class Adam {
 public:
  Adam(std::vector<Parameter> params, const AdamConfig& config);

  void step();
  void zero_grad();
  const AdamConfig& config() const { return config_; }
  long long step_count() const { return t_; }

 private:
  std::vector<Parameter> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long long t_ = 0;
};

}  // namespace maskprobe::nn
