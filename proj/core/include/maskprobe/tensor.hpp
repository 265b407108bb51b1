#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "maskprobe/image.hpp"

namespace maskprobe::nn {

// Dense rank-4 shape (batch, channels, height, width). Scalars are
// (1,1,1,1); single maps are (B,1,H,W).
struct Shape {
  int b = 1, c = 1, h = 1, w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(b) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Node;
using NodePtr = std::shared_ptr<Node>;

// One value in a reverse-mode tape. Ops allocate the output value
// eagerly; the backward closure scatters the output cotangent into the
// parents' grad buffers.
class Node {
 public:
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void()> backward_fn;

  void ensure_grad();
  void zero_grad();
  double scalar() const;  // value of a (1,1,1,1) node
};

// Grad-mode control. Inside a NoGradGuard scope ops do not record
// parents or backward closures; whole subgraphs evaluate as plain math.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Leaves.
NodePtr leaf(const Shape& shape, bool requires_grad = false);
NodePtr constant(const Shape& shape, double fill);
NodePtr from_values(const Shape& shape, std::vector<double> values,
                    bool requires_grad = false);

// Runs reverse-mode accumulation from a scalar root.
void backward(const NodePtr& root);

// Elementwise, same shape.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr div(const NodePtr& a, const NodePtr& b);
// alpha * x + beta, elementwise.
NodePtr affine(const NodePtr& x, double alpha, double beta);
NodePtr abs_(const NodePtr& x);   // subgradient at 0 is 0
NodePtr log_(const NodePtr& x);   // caller guarantees positivity
NodePtr sqrt_(const NodePtr& x);  // caller guarantees positivity
NodePtr sigmoid(const NodePtr& x);
NodePtr softplus(const NodePtr& x);
NodePtr relu(const NodePtr& x);
NodePtr clamp(const NodePtr& x, double lo, double hi);

// Reductions to a scalar node.
NodePtr sum_all(const NodePtr& x);
NodePtr mean_all(const NodePtr& x);

// 2-D convolution, odd square kernel, zero "same" padding, given stride.
// x: (B,Ci,H,W), w: (Co,Ci,k,k), bias: (1,Co,1,1) or nullptr.
NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& bias,
               int stride);
// Nearest-neighbour 2x upsampling.
NodePtr upsample2x(const NodePtr& x);
// Channel concatenation of equal-sized maps.
NodePtr concat_c(const NodePtr& a, const NodePtr& b);
// Signed forward differences along width/height; the far border row or
// column is zero (replicate padding).
NodePtr fwd_diff_x(const NodePtr& x);
NodePtr fwd_diff_y(const NodePtr& x);
// x: (B,C,H,W) times m: (B,1,H,W), one mask value shared per pixel.
NodePtr broadcast_mul(const NodePtr& x, const NodePtr& m);
// Adds a per-channel bias (1,C,1,1) to x.
NodePtr add_bias(const NodePtr& x, const NodePtr& bias);

// Bridges between domain grids and nodes. Images are expected to share
// one size; batches are packed (B,C,H,W).
NodePtr image_batch_node(std::span<const Image* const> images);
NodePtr image_node(const Image& image);
NodePtr depth_batch_node(std::span<const DepthMap* const> depths);
NodePtr depth_node(const DepthMap& depth);
NodePtr mask_node(const Mask& mask);

DepthMap depth_from_node(const Node& node, int batch_index = 0);
Mask mask_from_node(const Node& node, int batch_index = 0);

}  // namespace maskprobe::nn
