#include "maskprobe/losses.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "maskprobe/errors.hpp"

namespace maskprobe::losses {

namespace {

void check_same_shape(const DepthMap& a, const DepthMap& b, const char* op) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError(std::string(op) + ": depth maps " +
                         std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " +
                         std::to_string(b.height) + "x" +
                         std::to_string(b.width));
  }
}

std::vector<double> error_map(const DepthMap& y, const DepthMap& yhat) {
  std::vector<double> e(y.data.size());
  for (std::size_t i = 0; i < e.size(); ++i)
    e[i] = std::fabs(y.data[i] - yhat.data[i]);
  return e;
}

}  // namespace

double f_transform(double e) {
  if (e < 0.0) {
    throw DomainError("f_transform: negative error " + std::to_string(e));
  }
  return std::log(e + 0.5);
}

double l_depth(const DepthMap& y, const DepthMap& yhat) {
  check_same_shape(y, yhat, "l_depth");
  const std::vector<double> e = error_map(y, yhat);
  double acc = 0.0;
  for (double v : e) acc += std::log(v + 0.5);
  return acc * (1.0 / static_cast<double>(e.size()));
}

ErrorGradients error_gradients(const DepthMap& y, const DepthMap& yhat) {
  check_same_shape(y, yhat, "error_gradients");
  const std::vector<double> e = error_map(y, yhat);
  const int H = y.height, W = y.width;
  ErrorGradients g;
  g.height = H;
  g.width = W;
  g.dx.assign(e.size(), 0.0);
  g.dy.assign(e.size(), 0.0);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c + 1 < W; ++c)
      g.dx[r * W + c] = std::fabs(e[r * W + c + 1] - e[r * W + c]);
  for (int r = 0; r + 1 < H; ++r)
    for (int c = 0; c < W; ++c)
      g.dy[r * W + c] = std::fabs(e[(r + 1) * W + c] - e[r * W + c]);
  return g;
}

double l_grad(const DepthMap& y, const DepthMap& yhat) {
  const ErrorGradients g = error_gradients(y, yhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.dx.size(); ++i)
    acc += std::log(g.dx[i] + 0.5) + std::log(g.dy[i] + 0.5);
  return acc * (1.0 / static_cast<double>(g.dx.size()));
}

NormalField surface_normals(const DepthMap& d) {
  d.validate_finite();
  const int H = d.height, W = d.width;
  NormalField f;
  f.height = H;
  f.width = W;
  const std::size_t n = d.data.size();
  f.nx.resize(n);
  f.ny.resize(n);
  f.nz.resize(n);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * W + c;
      const double dx = (c + 1 < W) ? d.data[i + 1] - d.data[i] : 0.0;
      const double dy = (r + 1 < H) ? d.data[i + W] - d.data[i] : 0.0;
      const double denom = std::sqrt(dx * dx + dy * dy + 1.0);
      f.nx[i] = -dx / denom;
      f.ny[i] = -dy / denom;
      f.nz[i] = 1.0 / denom;
    }
  }
  return f;
}

double l_normal(const DepthMap& y, const DepthMap& yhat) {
  check_same_shape(y, yhat, "l_normal");
  const NormalField a = surface_normals(y);
  const NormalField b = surface_normals(yhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.nx.size(); ++i) {
    const double cos =
        std::clamp(a.nx[i] * b.nx[i] + a.ny[i] * b.ny[i] + a.nz[i] * b.nz[i],
                   -1.0, 1.0);
    acc += 1.0 - cos;
  }
  return acc * (1.0 / static_cast<double>(a.nx.size()));
}

LossBreakdown l_dif(const DepthMap& y, const DepthMap& yhat) {
  LossBreakdown out;
  out.l_depth = l_depth(y, yhat);
  out.l_grad = l_grad(y, yhat);
  out.l_normal = l_normal(y, yhat);
  out.l_dif = out.l_depth + out.l_grad + out.l_normal;
  return out;
}

double rmse(const DepthMap& y, const DepthMap& yhat) {
  check_same_shape(y, yhat, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double d = y.data[i] - yhat.data[i];
    acc += d * d;
  }
  return std::sqrt(acc * (1.0 / static_cast<double>(y.data.size())));
}

std::string LossBreakdown::to_json_string() const {
  nlohmann::json j;
  j["l_depth"] = l_depth;
  j["l_grad"] = l_grad;
  j["l_normal"] = l_normal;
  j["l_dif"] = l_dif;
  return j.dump();
}

nn::NodePtr f_transform_node(const nn::NodePtr& e) {
  return nn::log_(nn::affine(e, 1.0, 0.5));
}

nn::NodePtr l_depth_node(const nn::NodePtr& y, const nn::NodePtr& yhat) {
  auto e = nn::abs_(nn::sub(y, yhat));
  return nn::mean_all(f_transform_node(e));
}

nn::NodePtr l_grad_node(const nn::NodePtr& y, const nn::NodePtr& yhat) {
  auto e = nn::abs_(nn::sub(y, yhat));
  auto fx = f_transform_node(nn::abs_(nn::fwd_diff_x(e)));
  auto fy = f_transform_node(nn::abs_(nn::fwd_diff_y(e)));
  return nn::mean_all(nn::add(fx, fy));
}

namespace {

struct NormalNodes {
  nn::NodePtr nx, ny, nz;
};

NormalNodes surface_normal_nodes(const nn::NodePtr& d) {
  auto dx = nn::fwd_diff_x(d);
  auto dy = nn::fwd_diff_y(d);
  auto denom = nn::sqrt_(
      nn::affine(nn::add(nn::mul(dx, dx), nn::mul(dy, dy)), 1.0, 1.0));
  NormalNodes n;
  n.nx = nn::div(nn::affine(dx, -1.0, 0.0), denom);
  n.ny = nn::div(nn::affine(dy, -1.0, 0.0), denom);
  n.nz = nn::div(nn::constant(d->shape, 1.0), denom);
  return n;
}

}  // namespace

nn::NodePtr l_normal_node(const nn::NodePtr& y, const nn::NodePtr& yhat) {
  const NormalNodes a = surface_normal_nodes(y);
  const NormalNodes b = surface_normal_nodes(yhat);
  auto cos = nn::add(nn::add(nn::mul(a.nx, b.nx), nn::mul(a.ny, b.ny)),
                     nn::mul(a.nz, b.nz));
  return nn::mean_all(nn::affine(nn::clamp(cos, -1.0, 1.0), -1.0, 1.0));
}

LossNodes l_dif_nodes(const nn::NodePtr& y, const nn::NodePtr& yhat) {
  LossNodes out;
  out.l_depth = l_depth_node(y, yhat);
  out.l_grad = l_grad_node(y, yhat);
  out.l_normal = l_normal_node(y, yhat);
  out.l_dif = nn::add(nn::add(out.l_depth, out.l_grad), out.l_normal);
  return out;
}

}  // namespace maskprobe::losses
