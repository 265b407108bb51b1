#include <benchmark/benchmark.h>

#include "maskprobe/image.hpp"
#include "maskprobe/losses.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/tensor.hpp"

namespace ls = maskprobe::losses;
namespace nn = maskprobe::nn;

namespace {

maskprobe::DepthMap random_depth(int h, int w, maskprobe::Rng& rng) {
  maskprobe::DepthMap d(h, w);
  for (auto& v : d.data) v = rng.uniform(0.5, 10.0);
  return d;
}

void BM_LossValueRoute(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  maskprobe::Rng rng(11);
  const auto y = random_depth(side, side, rng);
  const auto yhat = random_depth(side, side, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ls::l_dif(y, yhat).l_dif);
  }
}
BENCHMARK(BM_LossValueRoute)->Arg(32)->Arg(64)->Arg(128);

void BM_LossGraphBackward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  maskprobe::Rng rng(12);
  const auto y = random_depth(side, side, rng);
  const auto yhat = random_depth(side, side, rng);
  for (auto _ : state) {
    const auto pred = nn::from_values({1, 1, side, side}, yhat.data, true);
    const auto nodes = ls::l_dif_nodes(nn::depth_node(y), pred);
    nn::backward(nodes.l_dif);
    benchmark::DoNotOptimize(pred->grad.data());
  }
}
BENCHMARK(BM_LossGraphBackward)->Arg(32)->Arg(64);

void BM_Rmse(benchmark::State& state) {
  maskprobe::Rng rng(13);
  const auto y = random_depth(64, 64, rng);
  const auto yhat = random_depth(64, 64, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ls::rmse(y, yhat));
  }
}
BENCHMARK(BM_Rmse);

}  // namespace
