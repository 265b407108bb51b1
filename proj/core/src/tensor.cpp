#include "maskprobe/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "maskprobe/errors.hpp"

namespace maskprobe::nn {

namespace {

thread_local int g_no_grad_depth = 0;

using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

void check_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
  if (!(a->shape == b->shape)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a->shape.str() + " vs " + b->shape.str());
  }
}

// Allocates the output node and wires the tape entry when grad mode is
// on and any parent participates in differentiation.
NodePtr make_op(const Shape& shape, std::initializer_list<NodePtr> parents) {
  auto out = std::make_shared<Node>();
  out->shape = shape;
  out->value.resize(shape.size());
  if (grad_enabled()) {
    for (const auto& p : parents) {
      if (p && p->requires_grad) {
        out->requires_grad = true;
        break;
      }
    }
    if (out->requires_grad) {
      out->parents.reserve(parents.size());
      for (const auto& p : parents) {
        if (p) out->parents.push_back(p);
      }
    }
  }
  return out;
}

double stable_sigmoid(double v) {
  if (v >= 0.0) {
    const double z = std::exp(-v);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(v);
  return z / (1.0 + z);
}

double stable_softplus(double v) {
  // log(1 + e^v) without overflow for large |v|.
  if (v > 30.0) return v + std::log1p(std::exp(-v));
  return std::log1p(std::exp(v));
}

struct ConvDims {
  int batch, cin, hin, win;
  int cout, k, pad, stride;
  int hout, wout;
};

ConvDims conv_dims(const NodePtr& x, const NodePtr& w, const NodePtr& bias,
                   int stride) {
  const Shape& xs = x->shape;
  const Shape& ws = w->shape;
  if (ws.h != ws.w || ws.h % 2 == 0) {
    throw DimensionError("conv2d: kernel must be odd and square, got " +
                         ws.str());
  }
  if (ws.c != xs.c) {
    throw DimensionError("conv2d: input channels " + std::to_string(xs.c) +
                         " do not match kernel channels " +
                         std::to_string(ws.c));
  }
  if (stride != 1 && stride != 2) {
    throw ParameterError("conv2d: stride must be 1 or 2");
  }
  if (bias) {
    const Shape want{1, ws.b, 1, 1};
    if (!(bias->shape == want)) {
      throw DimensionError("conv2d: bias shape " + bias->shape.str() +
                           " does not match " + want.str());
    }
  }
  ConvDims d;
  d.batch = xs.b;
  d.cin = xs.c;
  d.hin = xs.h;
  d.win = xs.w;
  d.cout = ws.b;
  d.k = ws.h;
  d.pad = (ws.h - 1) / 2;
  d.stride = stride;
  d.hout = (xs.h + 2 * d.pad - ws.h) / stride + 1;
  d.wout = (xs.w + 2 * d.pad - ws.w) / stride + 1;
  return d;
}

// Patch matrix laid out (Ci*k*k) x (Hout*Wout) so one GEMM against the
// (Co) x (Ci*k*k) weight matrix yields a channel-planar output image.
void im2col_t(const double* img, const ConvDims& d, std::vector<double>& cols) {
  const int kk = d.k * d.k;
  const std::size_t rows = static_cast<std::size_t>(d.cin) * kk;
  const std::size_t npos = static_cast<std::size_t>(d.hout) * d.wout;
  cols.assign(rows * npos, 0.0);
  for (int ci = 0; ci < d.cin; ++ci) {
    const double* plane = img + static_cast<std::size_t>(ci) * d.hin * d.win;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        double* row =
            cols.data() + (static_cast<std::size_t>(ci) * kk + ky * d.k + kx) *
                              npos;
        for (int oh = 0; oh < d.hout; ++oh) {
          const int iy = oh * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.hin) continue;
          const double* src = plane + static_cast<std::size_t>(iy) * d.win;
          double* dst = row + static_cast<std::size_t>(oh) * d.wout;
          for (int ow = 0; ow < d.wout; ++ow) {
            const int ix = ow * d.stride + kx - d.pad;
            if (ix >= 0 && ix < d.win) dst[ow] = src[ix];
          }
        }
      }
    }
  }
}

// Scatter-add of a patch-matrix cotangent back into the input image.
void col2im_t(const std::vector<double>& cols, const ConvDims& d,
              double* img_grad) {
  const int kk = d.k * d.k;
  const std::size_t npos = static_cast<std::size_t>(d.hout) * d.wout;
  for (int ci = 0; ci < d.cin; ++ci) {
    double* plane = img_grad + static_cast<std::size_t>(ci) * d.hin * d.win;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        const double* row =
            cols.data() + (static_cast<std::size_t>(ci) * kk + ky * d.k + kx) *
                              npos;
        for (int oh = 0; oh < d.hout; ++oh) {
          const int iy = oh * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.hin) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * d.win;
          const double* src = row + static_cast<std::size_t>(oh) * d.wout;
          for (int ow = 0; ow < d.wout; ++ow) {
            const int ix = ow * d.stride + kx - d.pad;
            if (ix >= 0 && ix < d.win) dst[ix] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << b << "," << c << "," << h << "," << w << ")";
  return os.str();
}

void Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

void Node::zero_grad() {
  std::fill(grad.begin(), grad.end(), 0.0);
}

double Node::scalar() const {
  if (value.size() != 1) {
    throw DimensionError("scalar() called on node of shape " + shape.str());
  }
  return value[0];
}

bool grad_enabled() { return g_no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

NodePtr leaf(const Shape& shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value.assign(shape.size(), 0.0);
  n->requires_grad = requires_grad;
  return n;
}

NodePtr constant(const Shape& shape, double fill) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value.assign(shape.size(), fill);
  return n;
}

NodePtr from_values(const Shape& shape, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != shape.size()) {
    throw DimensionError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape.str());
  }
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

void backward(const NodePtr& root) {
  if (!root) throw ParameterError("backward: null root");
  if (root->value.size() != 1) {
    throw DimensionError("backward: root must be scalar, got " +
                         root->shape.str());
  }
  if (!root->requires_grad) {
    throw ContractViolationError("backward: root does not require grad");
  }

  // Iterative post-order over the parent DAG.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "add");
  auto out = make_op(a->shape, {a, b});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) out->value[i] = a->value[i] + b->value[i];
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), a, b] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          a->grad[i] += o->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          b->grad[i] += o->grad[i];
      }
    };
  }
  return out;
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "sub");
  auto out = make_op(a->shape, {a, b});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) out->value[i] = a->value[i] - b->value[i];
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), a, b] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          a->grad[i] += o->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          b->grad[i] -= o->grad[i];
      }
    };
  }
  return out;
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "mul");
  auto out = make_op(a->shape, {a, b});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) out->value[i] = a->value[i] * b->value[i];
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), a, b] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          a->grad[i] += o->grad[i] * b->value[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          b->grad[i] += o->grad[i] * a->value[i];
      }
    };
  }
  return out;
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "div");
  auto out = make_op(a->shape, {a, b});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) out->value[i] = a->value[i] / b->value[i];
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), a, b] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          a->grad[i] += o->grad[i] / b->value[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          b->grad[i] -= o->grad[i] * o->value[i] / b->value[i];
      }
    };
  }
  return out;
}

NodePtr affine(const NodePtr& x, double alpha, double beta) {
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i)
    out->value[i] = alpha * x->value[i] + beta;
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, alpha] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        x->grad[i] += alpha * o->grad[i];
    };
  }
  return out;
}

NodePtr abs_(const NodePtr& x) {
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) out->value[i] = std::fabs(x->value[i]);
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        const double v = x->value[i];
        if (v > 0.0)
          x->grad[i] += o->grad[i];
        else if (v < 0.0)
          x->grad[i] -= o->grad[i];
      }
    };
  }
  return out;
}

NodePtr log_(const NodePtr& x) {
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x->value[i] > 0.0)) {
      throw DomainError("log: non-positive input " +
                        std::to_string(x->value[i]));
    }
    out->value[i] = std::log(x->value[i]);
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        x->grad[i] += o->grad[i] / x->value[i];
    };
  }
  return out;
}

NodePtr sqrt_(const NodePtr& x) {
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (x->value[i] < 0.0) {
      throw DomainError("sqrt: negative input " +
                        std::to_string(x->value[i]));
    }
    out->value[i] = std::sqrt(x->value[i]);
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        x->grad[i] += 0.5 * o->grad[i] / o->value[i];
    };
  }
  return out;
}

NodePtr sigmoid(const NodePtr& x) {
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i)
    out->value[i] = stable_sigmoid(x->value[i]);
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        const double s = o->value[i];
        x->grad[i] += o->grad[i] * s * (1.0 - s);
      }
    };
  }
  return out;
}

NodePtr softplus(const NodePtr& x) {
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i)
    out->value[i] = stable_softplus(x->value[i]);
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        x->grad[i] += o->grad[i] * stable_sigmoid(x->value[i]);
    };
  }
  return out;
}

NodePtr relu(const NodePtr& x) {
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i)
    out->value[i] = x->value[i] > 0.0 ? x->value[i] : 0.0;
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        if (x->value[i] > 0.0) x->grad[i] += o->grad[i];
    };
  }
  return out;
}

NodePtr clamp(const NodePtr& x, double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("clamp: lo > hi");
  auto out = make_op(x->shape, {x});
  const std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i)
    out->value[i] = std::clamp(x->value[i], lo, hi);
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, lo, hi] {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        const double v = x->value[i];
        if (v >= lo && v <= hi) x->grad[i] += o->grad[i];
      }
    };
  }
  return out;
}

NodePtr sum_all(const NodePtr& x) {
  auto out = make_op(Shape{1, 1, 1, 1}, {x});
  double acc = 0.0;
  for (double v : x->value) acc += v;
  out->value[0] = acc;
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x] {
      x->ensure_grad();
      const double g = o->grad[0];
      for (double& gi : x->grad) gi += g;
    };
  }
  return out;
}

NodePtr mean_all(const NodePtr& x) {
  auto out = make_op(Shape{1, 1, 1, 1}, {x});
  double acc = 0.0;
  for (double v : x->value) acc += v;
  const double inv_n = 1.0 / static_cast<double>(x->value.size());
  out->value[0] = acc * inv_n;
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, inv_n] {
      x->ensure_grad();
      const double g = o->grad[0] * inv_n;
      for (double& gi : x->grad) gi += g;
    };
  }
  return out;
}

NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& bias,
               int stride) {
  const ConvDims d = conv_dims(x, w, bias, stride);
  auto out = bias ? make_op(Shape{d.batch, d.cout, d.hout, d.wout}, {x, w, bias})
                  : make_op(Shape{d.batch, d.cout, d.hout, d.wout}, {x, w});

  const std::size_t kdim = static_cast<std::size_t>(d.cin) * d.k * d.k;
  const std::size_t npos = static_cast<std::size_t>(d.hout) * d.wout;
  const std::size_t in_plane = static_cast<std::size_t>(d.cin) * d.hin * d.win;
  const std::size_t out_plane = static_cast<std::size_t>(d.cout) * npos;

  thread_local std::vector<double> cols;
  ConstMapRM wmat(w->value.data(), d.cout, static_cast<Eigen::Index>(kdim));
  for (int b = 0; b < d.batch; ++b) {
    im2col_t(x->value.data() + b * in_plane, d, cols);
    ConstMapRM cmat(cols.data(), static_cast<Eigen::Index>(kdim),
                    static_cast<Eigen::Index>(npos));
    MapRM omat(out->value.data() + b * out_plane, d.cout,
               static_cast<Eigen::Index>(npos));
    omat.noalias() = wmat * cmat;
  }
  if (bias) {
    for (int b = 0; b < d.batch; ++b) {
      double* obase = out->value.data() + b * out_plane;
      for (int co = 0; co < d.cout; ++co) {
        const double bv = bias->value[co];
        double* plane = obase + co * npos;
        for (std::size_t i = 0; i < npos; ++i) plane[i] += bv;
      }
    }
  }

  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, w, bias, d, kdim, npos, in_plane,
                        out_plane] {
      thread_local std::vector<double> bcols;
      if (bias && bias->requires_grad) {
        bias->ensure_grad();
        for (int b = 0; b < d.batch; ++b) {
          const double* gbase = o->grad.data() + b * out_plane;
          for (int co = 0; co < d.cout; ++co) {
            const double* plane = gbase + co * npos;
            double acc = 0.0;
            for (std::size_t i = 0; i < npos; ++i) acc += plane[i];
            bias->grad[co] += acc;
          }
        }
      }
      if (w->requires_grad) {
        w->ensure_grad();
        MapRM gw(w->grad.data(), d.cout, static_cast<Eigen::Index>(kdim));
        for (int b = 0; b < d.batch; ++b) {
          im2col_t(x->value.data() + b * in_plane, d, bcols);
          ConstMapRM cmat(bcols.data(), static_cast<Eigen::Index>(kdim),
                          static_cast<Eigen::Index>(npos));
          ConstMapRM gout(o->grad.data() + b * out_plane, d.cout,
                          static_cast<Eigen::Index>(npos));
          gw.noalias() += gout * cmat.transpose();
        }
      }
      if (x->requires_grad) {
        x->ensure_grad();
        ConstMapRM wmat(w->value.data(), d.cout,
                        static_cast<Eigen::Index>(kdim));
        for (int b = 0; b < d.batch; ++b) {
          ConstMapRM gout(o->grad.data() + b * out_plane, d.cout,
                          static_cast<Eigen::Index>(npos));
          bcols.assign(kdim * npos, 0.0);
          MapRM gcols(bcols.data(), static_cast<Eigen::Index>(kdim),
                      static_cast<Eigen::Index>(npos));
          gcols.noalias() = wmat.transpose() * gout;
          col2im_t(bcols, d, x->grad.data() + b * in_plane);
        }
      }
    };
  }
  return out;
}

NodePtr upsample2x(const NodePtr& x) {
  const Shape& s = x->shape;
  auto out = make_op(Shape{s.b, s.c, 2 * s.h, 2 * s.w}, {x});
  const int H = s.h, W = s.w;
  const std::size_t planes = static_cast<std::size_t>(s.b) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x->value.data() + p * H * W;
    double* dst = out->value.data() + p * 4 * H * W;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const double v = src[r * W + c];
        double* d0 = dst + (2 * r) * 2 * W + 2 * c;
        double* d1 = dst + (2 * r + 1) * 2 * W + 2 * c;
        d0[0] = v;
        d0[1] = v;
        d1[0] = v;
        d1[1] = v;
      }
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, H, W, planes] {
      x->ensure_grad();
      for (std::size_t p = 0; p < planes; ++p) {
        double* gx = x->grad.data() + p * H * W;
        const double* go = o->grad.data() + p * 4 * H * W;
        for (int r = 0; r < H; ++r) {
          for (int c = 0; c < W; ++c) {
            const double* g0 = go + (2 * r) * 2 * W + 2 * c;
            const double* g1 = go + (2 * r + 1) * 2 * W + 2 * c;
            gx[r * W + c] += g0[0] + g0[1] + g1[0] + g1[1];
          }
        }
      }
    };
  }
  return out;
}

NodePtr concat_c(const NodePtr& a, const NodePtr& b) {
  const Shape& sa = a->shape;
  const Shape& sb = b->shape;
  if (sa.b != sb.b || sa.h != sb.h || sa.w != sb.w) {
    throw DimensionError("concat_c: incompatible shapes " + sa.str() + " and " +
                         sb.str());
  }
  auto out = make_op(Shape{sa.b, sa.c + sb.c, sa.h, sa.w}, {a, b});
  const std::size_t hw = static_cast<std::size_t>(sa.h) * sa.w;
  const std::size_t a_sz = static_cast<std::size_t>(sa.c) * hw;
  const std::size_t b_sz = static_cast<std::size_t>(sb.c) * hw;
  for (int bi = 0; bi < sa.b; ++bi) {
    double* dst = out->value.data() + bi * (a_sz + b_sz);
    std::copy_n(a->value.data() + bi * a_sz, a_sz, dst);
    std::copy_n(b->value.data() + bi * b_sz, b_sz, dst + a_sz);
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), a, b, a_sz, b_sz, nb = sa.b] {
      for (int bi = 0; bi < nb; ++bi) {
        const double* g = o->grad.data() + bi * (a_sz + b_sz);
        if (a->requires_grad) {
          a->ensure_grad();
          double* ga = a->grad.data() + bi * a_sz;
          for (std::size_t i = 0; i < a_sz; ++i) ga[i] += g[i];
        }
        if (b->requires_grad) {
          b->ensure_grad();
          double* gb = b->grad.data() + bi * b_sz;
          for (std::size_t i = 0; i < b_sz; ++i) gb[i] += g[a_sz + i];
        }
      }
    };
  }
  return out;
}

NodePtr fwd_diff_x(const NodePtr& x) {
  const Shape& s = x->shape;
  auto out = make_op(s, {x});
  const int H = s.h, W = s.w;
  const std::size_t planes = static_cast<std::size_t>(s.b) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x->value.data() + p * H * W;
    double* dst = out->value.data() + p * H * W;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c + 1 < W; ++c)
        dst[r * W + c] = src[r * W + c + 1] - src[r * W + c];
      dst[r * W + W - 1] = 0.0;
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, H, W, planes] {
      x->ensure_grad();
      for (std::size_t p = 0; p < planes; ++p) {
        const double* g = o->grad.data() + p * H * W;
        double* gx = x->grad.data() + p * H * W;
        for (int r = 0; r < H; ++r) {
          for (int c = 0; c + 1 < W; ++c) {
            const double gv = g[r * W + c];
            gx[r * W + c + 1] += gv;
            gx[r * W + c] -= gv;
          }
        }
      }
    };
  }
  return out;
}

NodePtr fwd_diff_y(const NodePtr& x) {
  const Shape& s = x->shape;
  auto out = make_op(s, {x});
  const int H = s.h, W = s.w;
  const std::size_t planes = static_cast<std::size_t>(s.b) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x->value.data() + p * H * W;
    double* dst = out->value.data() + p * H * W;
    for (int r = 0; r + 1 < H; ++r)
      for (int c = 0; c < W; ++c)
        dst[r * W + c] = src[(r + 1) * W + c] - src[r * W + c];
    for (int c = 0; c < W; ++c) dst[(H - 1) * W + c] = 0.0;
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, H, W, planes] {
      x->ensure_grad();
      for (std::size_t p = 0; p < planes; ++p) {
        const double* g = o->grad.data() + p * H * W;
        double* gx = x->grad.data() + p * H * W;
        for (int r = 0; r + 1 < H; ++r) {
          for (int c = 0; c < W; ++c) {
            const double gv = g[r * W + c];
            gx[(r + 1) * W + c] += gv;
            gx[r * W + c] -= gv;
          }
        }
      }
    };
  }
  return out;
}

NodePtr broadcast_mul(const NodePtr& x, const NodePtr& m) {
  const Shape& sx = x->shape;
  const Shape& sm = m->shape;
  if (sm.c != 1 || sm.b != sx.b || sm.h != sx.h || sm.w != sx.w) {
    throw DimensionError("broadcast_mul: mask shape " + sm.str() +
                         " does not broadcast over " + sx.str());
  }
  auto out = make_op(sx, {x, m});
  const std::size_t hw = static_cast<std::size_t>(sx.h) * sx.w;
  for (int b = 0; b < sx.b; ++b) {
    const double* mp = m->value.data() + b * hw;
    for (int c = 0; c < sx.c; ++c) {
      const double* xp = x->value.data() + (b * sx.c + c) * hw;
      double* op = out->value.data() + (b * sx.c + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) op[i] = xp[i] * mp[i];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, m, hw, nb = sx.b, nc = sx.c] {
      if (x->requires_grad) {
        x->ensure_grad();
        for (int b = 0; b < nb; ++b) {
          const double* mp = m->value.data() + b * hw;
          for (int c = 0; c < nc; ++c) {
            const double* g = o->grad.data() + (b * nc + c) * hw;
            double* gx = x->grad.data() + (b * nc + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) gx[i] += g[i] * mp[i];
          }
        }
      }
      if (m->requires_grad) {
        m->ensure_grad();
        for (int b = 0; b < nb; ++b) {
          double* gm = m->grad.data() + b * hw;
          for (int c = 0; c < nc; ++c) {
            const double* g = o->grad.data() + (b * nc + c) * hw;
            const double* xp = x->value.data() + (b * nc + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) gm[i] += g[i] * xp[i];
          }
        }
      }
    };
  }
  return out;
}

NodePtr add_bias(const NodePtr& x, const NodePtr& bias) {
  const Shape& sx = x->shape;
  const Shape want{1, sx.c, 1, 1};
  if (!(bias->shape == want)) {
    throw DimensionError("add_bias: bias shape " + bias->shape.str() +
                         " does not match " + want.str());
  }
  auto out = make_op(sx, {x, bias});
  const std::size_t hw = static_cast<std::size_t>(sx.h) * sx.w;
  for (int b = 0; b < sx.b; ++b) {
    for (int c = 0; c < sx.c; ++c) {
      const double bv = bias->value[c];
      const double* xp = x->value.data() + (b * sx.c + c) * hw;
      double* op = out->value.data() + (b * sx.c + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) op[i] = xp[i] + bv;
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [o = out.get(), x, bias, hw, nb = sx.b, nc = sx.c] {
      if (x->requires_grad) {
        x->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          x->grad[i] += o->grad[i];
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int b = 0; b < nb; ++b) {
          for (int c = 0; c < nc; ++c) {
            const double* g = o->grad.data() + (b * nc + c) * hw;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += g[i];
            bias->grad[c] += acc;
          }
        }
      }
    };
  }
  return out;
}

NodePtr image_batch_node(std::span<const Image* const> images) {
  if (images.empty()) throw ParameterError("image_batch_node: empty batch");
  const Image& first = *images.front();
  for (const Image* im : images) {
    if (im->height != first.height || im->width != first.width ||
        im->channels != first.channels) {
      throw DimensionError("image_batch_node: mixed image sizes in batch");
    }
  }
  const Shape shape{static_cast<int>(images.size()), first.channels,
                    first.height, first.width};
  auto n = leaf(shape);
  const std::size_t per = first.data.size();
  for (std::size_t b = 0; b < images.size(); ++b) {
    std::copy_n(images[b]->data.data(), per, n->value.data() + b * per);
  }
  return n;
}

NodePtr image_node(const Image& image) {
  const Image* p = &image;
  return image_batch_node(std::span<const Image* const>(&p, 1));
}

NodePtr depth_batch_node(std::span<const DepthMap* const> depths) {
  if (depths.empty()) throw ParameterError("depth_batch_node: empty batch");
  const DepthMap& first = *depths.front();
  for (const DepthMap* d : depths) {
    if (d->height != first.height || d->width != first.width) {
      throw DimensionError("depth_batch_node: mixed sizes in batch");
    }
  }
  const Shape shape{static_cast<int>(depths.size()), 1, first.height,
                    first.width};
  auto n = leaf(shape);
  const std::size_t per = first.data.size();
  for (std::size_t b = 0; b < depths.size(); ++b) {
    std::copy_n(depths[b]->data.data(), per, n->value.data() + b * per);
  }
  return n;
}

NodePtr depth_node(const DepthMap& depth) {
  const DepthMap* p = &depth;
  return depth_batch_node(std::span<const DepthMap* const>(&p, 1));
}

NodePtr mask_node(const Mask& mask) {
  auto n = leaf(Shape{1, 1, mask.height, mask.width});
  std::copy(mask.data.begin(), mask.data.end(), n->value.begin());
  return n;
}

DepthMap depth_from_node(const Node& node, int batch_index) {
  const Shape& s = node.shape;
  if (s.c != 1) {
    throw DimensionError("depth_from_node: expected single channel, got " +
                         s.str());
  }
  if (batch_index < 0 || batch_index >= s.b) {
    throw ParameterError("depth_from_node: batch index out of range");
  }
  DepthMap d(s.h, s.w);
  const std::size_t per = static_cast<std::size_t>(s.h) * s.w;
  std::copy_n(node.value.data() + batch_index * per, per, d.data.data());
  return d;
}

Mask mask_from_node(const Node& node, int batch_index) {
  const Shape& s = node.shape;
  if (s.c != 1) {
    throw DimensionError("mask_from_node: expected single channel, got " +
                         s.str());
  }
  if (batch_index < 0 || batch_index >= s.b) {
    throw ParameterError("mask_from_node: batch index out of range");
  }
  Mask m(s.h, s.w);
  const std::size_t per = static_cast<std::size_t>(s.h) * s.w;
  std::copy_n(node.value.data() + batch_index * per, per, m.data.data());
  return m;
}

}  // namespace maskprobe::nn
