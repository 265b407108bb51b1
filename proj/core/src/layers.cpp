#include "maskprobe/layers.hpp"

#include <cmath>

#include "maskprobe/digest.hpp"
#include "maskprobe/errors.hpp"

namespace maskprobe::nn {

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.node->value.size();
  return n;
}

void Network::freeze() {
  for (auto& p : params_) {
    p.node->requires_grad = false;
    p.node->grad.clear();
  }
  frozen_ = true;
}

std::string Network::digest() const {
  Sha256 h;
  h.update(arch_);
  for (const auto& p : params_) {
    h.update(p.name);
    h.update_u32(static_cast<std::uint32_t>(p.node->shape.b));
    h.update_u32(static_cast<std::uint32_t>(p.node->shape.c));
    h.update_u32(static_cast<std::uint32_t>(p.node->shape.h));
    h.update_u32(static_cast<std::uint32_t>(p.node->shape.w));
    for (double v : p.node->value) h.update_f32(v);
  }
  return h.hex_digest();
}

void Network::zero_grad() {
  for (auto& p : params_) p.node->zero_grad();
}

NodePtr Network::register_param(const std::string& name, const Shape& shape) {
  if (frozen_) {
    throw ContractViolationError("cannot add parameters to a frozen network");
  }
  for (const auto& p : params_) {
    if (p.name == name) {
      throw ParameterError("duplicate parameter name: " + name);
    }
  }
  auto node = leaf(shape, /*requires_grad=*/true);
  params_.push_back({name, node});
  return node;
}

Conv2dBlock::Conv2dBlock(Network& owner, const std::string& name, int cin,
                         int cout, int k, int stride, Rng& rng)
    : stride_(stride) {
  if (cin <= 0 || cout <= 0 || k <= 0 || k % 2 == 0) {
    throw ParameterError("conv block: invalid dimensions for " + name);
  }
  w_ = owner.register_param(name + ".w", Shape{cout, cin, k, k});
  b_ = owner.register_param(name + ".b", Shape{1, cout, 1, 1});
  const double fan_in = static_cast<double>(cin) * k * k;
  const double std = std::sqrt(2.0 / fan_in);
  for (double& v : w_->value) v = rng.normal(0.0, std);
  // bias stays zero
}

NodePtr Conv2dBlock::operator()(const NodePtr& x) const {
  return conv2d(x, w_, b_, stride_);
}

Adam::Adam(std::vector<Parameter> params, const AdamConfig& config)
    : params_(std::move(params)), config_(config) {
  if (params_.empty()) throw ParameterError("adam: empty parameter list");
  if (config_.lr <= 0.0) throw ParameterError("adam: lr must be positive");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0) {
    throw ParameterError("adam: betas must lie in [0,1)");
  }
  if (config_.weight_decay < 0.0) {
    throw ParameterError("adam: weight decay must be non-negative");
  }
  for (const auto& p : params_) {
    if (!p.node->requires_grad) {
      throw ContractViolationError("adam: parameter '" + p.name +
                                   "' is frozen");
    }
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.node->value.size(), 0.0);
    v_.emplace_back(p.node->value.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Node& node = *params_[pi].node;
    if (!node.requires_grad) {
      throw ContractViolationError("adam: parameter '" + params_[pi].name +
                                   "' was frozen after optimizer creation");
    }
    node.ensure_grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < node.value.size(); ++i) {
      const double g = node.grad[i] + config_.weight_decay * node.value[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      node.value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.node->zero_grad();
}

}  // namespace maskprobe::nn
