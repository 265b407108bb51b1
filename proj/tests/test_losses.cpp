#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "maskprobe/errors.hpp"
#include "maskprobe/image.hpp"
#include "maskprobe/losses.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace maskprobe;
namespace ls = maskprobe::losses;
using testutil::random_depth;

TEST_CASE("error transform is strictly monotone with known anchors") {
  CHECK(ls::f_transform(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(ls::f_transform(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(ls::f_transform(1.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(0.0, 20.0);
    const double b = a + rng.uniform(1e-9, 1.0);
    CHECK(ls::f_transform(a) < ls::f_transform(b));
  }
}

TEST_CASE("identical maps give the analytic loss constants") {
  const double ln_half = std::log(0.5);
  Rng rng(12);
  for (int i = 0; i < 5; ++i) {
    const DepthMap y = random_depth(7, 9, rng);
    CHECK(ls::l_depth(y, y) == doctest::Approx(ln_half).epsilon(1e-12));
    CHECK(ls::l_grad(y, y) == doctest::Approx(2.0 * ln_half).epsilon(1e-12));
    CHECK(ls::l_normal(y, y) == doctest::Approx(0.0).epsilon(1e-12));
    const auto b = ls::l_dif(y, y);
    CHECK(b.l_dif == doctest::Approx(3.0 * ln_half).epsilon(1e-12));
    CHECK(ls::rmse(y, y) == 0.0);
  }
}

TEST_CASE("hand-worked depth term") {
  DepthMap y(4, 4, 2.0);
  DepthMap yh(4, 4, 2.0);
  yh.at(0, 0) = 2.5;
  // One error of 0.5 (F = 0) and fifteen of 0 (F = ln 0.5).
  const double want = (0.0 + 15.0 * std::log(0.5)) / 16.0;
  CHECK(ls::l_depth(y, yh) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("hand-worked rmse") {
  const DepthMap y(4, 4, 0.0);
  DepthMap z(4, 4, 0.0);
  z.at(1, 2) = 3.0;
  z.at(2, 1) = 4.0;
  // sqrt((9 + 16) / 16) = 1.25 exactly.
  CHECK(ls::rmse(y, z) == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("error gradients of a column ramp") {
  // e(r,c) = c, so the x gradient is 1 everywhere except the replicated
  // far column and the y gradient is 0.
  const int H = 4, W = 4;
  DepthMap y(H, W, 5.0);
  DepthMap yh(H, W);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) yh.at(r, c) = 5.0 + c;
  const auto g = ls::error_gradients(y, yh);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double wx = (c == W - 1) ? 0.0 : 1.0;
      CHECK(g.dx[static_cast<std::size_t>(r) * W + c] == wx);
      CHECK(g.dy[static_cast<std::size_t>(r) * W + c] == 0.0);
    }
  }
  const double want =
      ((std::log(1.5) * (W - 1) + std::log(0.5)) / W) + std::log(0.5);
  CHECK(ls::l_grad(y, yh) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("surface normals of a unit slope") {
  // d(r,c) = c gives interior normals (-1, 0, 1)/sqrt(2).
  const int H = 4, W = 5;
  DepthMap d(H, W);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) d.at(r, c) = 1.0 + c;
  const auto nf = ls::surface_normals(d);
  const double s = 1.0 / std::sqrt(2.0);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W - 1; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * W + c;
      CHECK(nf.nx[i] == doctest::Approx(-s).epsilon(1e-12));
      CHECK(nf.ny[i] == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(nf.nz[i] == doctest::Approx(s).epsilon(1e-12));
    }
    // Replicated far column: flat, normal (0, 0, 1).
    const std::size_t i = static_cast<std::size_t>(r) * W + (W - 1);
    CHECK(nf.nx[i] == 0.0);
    CHECK(nf.nz[i] == 1.0);
  }

  // Against a flat map the interior angle term is 1 - 1/sqrt(2).
  DepthMap flat(H, W, 2.0);
  const double interior = 1.0 - s;
  const double per_row = (interior * (W - 1) + 0.0) / W;
  CHECK(ls::l_normal(d, flat) == doctest::Approx(per_row).epsilon(1e-12));
}

TEST_CASE("value route matches the independent oracle on random maps") {
  Rng rng(13);
  for (int i = 0; i < 30; ++i) {
    const DepthMap y = random_depth(8, 8, rng);
    const DepthMap yh = random_depth(8, 8, rng);
    CHECK(oracle::rel_err(ls::l_depth(y, yh), oracle::l_depth(y, yh)) < 1e-12);
    CHECK(oracle::rel_err(ls::l_grad(y, yh), oracle::l_grad(y, yh)) < 1e-12);
    CHECK(oracle::rel_err(ls::l_normal(y, yh), oracle::l_normal(y, yh)) <
          1e-12);
    CHECK(oracle::rel_err(ls::rmse(y, yh), oracle::rmse(y, yh)) < 1e-12);
    const auto b = ls::l_dif(y, yh);
    CHECK(oracle::rel_err(b.l_dif, oracle::l_dif(y, yh)) < 1e-12);
    CHECK(b.l_dif == b.l_depth + b.l_grad + b.l_normal);
  }
}

TEST_CASE("depth and gradient terms are symmetric in their arguments") {
  Rng rng(14);
  for (int i = 0; i < 10; ++i) {
    const DepthMap y = random_depth(6, 7, rng);
    const DepthMap yh = random_depth(6, 7, rng);
    CHECK(ls::l_depth(y, yh) == ls::l_depth(yh, y));
    CHECK(ls::l_grad(y, yh) == ls::l_grad(yh, y));
  }
}

TEST_CASE("losses are invariant to a shared depth offset") {
  Rng rng(15);
  for (const double off : {0.5, 2.0, 8.0}) {
    const DepthMap y = random_depth(6, 6, rng);
    const DepthMap yh = random_depth(6, 6, rng);
    DepthMap y2 = y, yh2 = yh;
    for (auto& v : y2.data) v += off;
    for (auto& v : yh2.data) v += off;
    CHECK(ls::l_depth(y2, yh2) ==
          doctest::Approx(ls::l_depth(y, yh)).epsilon(1e-9));
    CHECK(ls::l_grad(y2, yh2) ==
          doctest::Approx(ls::l_grad(y, yh)).epsilon(1e-9));
    CHECK(ls::l_normal(y2, yh2) ==
          doctest::Approx(ls::l_normal(y, yh)).epsilon(1e-9));
    CHECK(ls::rmse(y2, yh2) == doctest::Approx(ls::rmse(y, yh)).epsilon(1e-9));
  }
}

TEST_CASE("rmse is a premetric") {
  Rng rng(16);
  const DepthMap y = random_depth(5, 5, rng);
  DepthMap yh = y;
  CHECK(ls::rmse(y, yh) == 0.0);
  yh.at(2, 3) += 1e-9;
  CHECK(ls::rmse(y, yh) > 0.0);
}

TEST_CASE("loss maps reject mismatched shapes") {
  const DepthMap a(4, 4, 1.0);
  const DepthMap b(4, 5, 1.0);
  CHECK_THROWS_AS(ls::l_depth(a, b), DimensionError);
  CHECK_THROWS_AS(ls::l_grad(a, b), DimensionError);
  CHECK_THROWS_AS(ls::l_normal(a, b), DimensionError);
  CHECK_THROWS_AS(ls::rmse(a, b), DimensionError);
}

TEST_CASE("graph route reproduces the value route bit for bit") {
  Rng rng(17);
  for (int i = 0; i < 10; ++i) {
    const DepthMap y = random_depth(8, 8, rng);
    const DepthMap yh = random_depth(8, 8, rng);
    const auto yn = nn::depth_node(y);
    const auto yhn = nn::depth_node(yh);
    const auto nodes = ls::l_dif_nodes(yn, yhn);
    const auto b = ls::l_dif(y, yh);
    CHECK(nodes.l_depth->scalar() == b.l_depth);
    CHECK(nodes.l_grad->scalar() == b.l_grad);
    CHECK(nodes.l_normal->scalar() == b.l_normal);
    CHECK(nodes.l_dif->scalar() == b.l_dif);
  }
}

TEST_CASE("loss node gradients match central differences") {
  Rng rng(18);
  const int H = 5, W = 5;
  const DepthMap y = random_depth(H, W, rng, 1.0, 6.0);
  DepthMap yh = y;
  // Offset the prediction so error terms sit away from the |.| kinks.
  for (auto& v : yh.data) v += rng.uniform(0.15, 0.6);

  struct Variant {
    const char* name;
    nn::NodePtr (*make)(const nn::NodePtr&, const nn::NodePtr&);
  };
  const Variant variants[] = {
      {"l_depth", &ls::l_depth_node},
      {"l_grad", &ls::l_grad_node},
      {"l_normal", &ls::l_normal_node},
  };
  for (const auto& variant : variants) {
    CAPTURE(variant.name);
    auto yhn = nn::from_values({1, 1, H, W}, yh.data, true);
    nn::backward(variant.make(nn::depth_node(y), yhn));
    for (const std::size_t idx : {std::size_t{0}, std::size_t{7},
                                  std::size_t{12}, std::size_t{24}}) {
      DepthMap probe = yh;
      const auto eval = [&]() {
        nn::NoGradGuard guard;
        return variant
            .make(nn::depth_node(y),
                  nn::from_values({1, 1, H, W}, probe.data, false))
            ->scalar();
      };
      const double num = oracle::central_diff(eval, probe.data[idx], 1e-4);
      CHECK(oracle::rel_err(yhn->grad[idx], num) < 1e-4);
    }
  }
}

TEST_CASE("loss breakdown serializes every component") {
  Rng rng(19);
  const DepthMap y = random_depth(4, 4, rng);
  const DepthMap yh = random_depth(4, 4, rng);
  const std::string json = ls::l_dif(y, yh).to_json_string();
  for (const char* key : {"l_depth", "l_grad", "l_normal", "l_dif"}) {
    CHECK(json.find(key) != std::string::npos);
  }
}
