#pragma once

#include <string>
#include <vector>

#include "maskprobe/image.hpp"
#include "maskprobe/tensor.hpp"

namespace maskprobe::losses {

// Scalar transform applied to every error term: F(e) = ln(e + 0.5).
double f_transform(double e);

struct ErrorGradients {
  int height = 0, width = 0;
  std::vector<double> dx, dy;  // absolute forward differences of the error
};

struct NormalField {
  int height = 0, width = 0;
  std::vector<double> nx, ny, nz;
};

struct LossBreakdown {
  double l_depth = 0.0;
  double l_grad = 0.0;
  double l_normal = 0.0;
  double l_dif = 0.0;  // always the ordered sum of the three above

  std::string to_json_string() const;
};

double l_depth(const DepthMap& y, const DepthMap& yhat);
ErrorGradients error_gradients(const DepthMap& y, const DepthMap& yhat);
double l_grad(const DepthMap& y, const DepthMap& yhat);
NormalField surface_normals(const DepthMap& d);
double l_normal(const DepthMap& y, const DepthMap& yhat);
LossBreakdown l_dif(const DepthMap& y, const DepthMap& yhat);
double rmse(const DepthMap& y, const DepthMap& yhat);

// Differentiable route. Inputs are (B,1,H,W) nodes; outputs are scalar
// nodes. Per element the arithmetic matches the value route exactly, so
// both agree to the last bit.
nn::NodePtr f_transform_node(const nn::NodePtr& e);
nn::NodePtr l_depth_node(const nn::NodePtr& y, const nn::NodePtr& yhat);
nn::NodePtr l_grad_node(const nn::NodePtr& y, const nn::NodePtr& yhat);
nn::NodePtr l_normal_node(const nn::NodePtr& y, const nn::NodePtr& yhat);

struct LossNodes {
  nn::NodePtr l_depth, l_grad, l_normal, l_dif;
};
LossNodes l_dif_nodes(const nn::NodePtr& y, const nn::NodePtr& yhat);

}  // namespace maskprobe::losses
