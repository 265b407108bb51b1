#include <benchmark/benchmark.h>

#include <vector>

#include "maskprobe/rng.hpp"
#include "maskprobe/tensor.hpp"

namespace nn = maskprobe::nn;

namespace {

std::vector<double> random_values(std::size_t n, maskprobe::Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  maskprobe::Rng rng(1);
  const auto xv = random_values(static_cast<std::size_t>(c) * 32 * 32, rng);
  const auto wv = random_values(static_cast<std::size_t>(c) * c * 9, rng);
  const auto bv = random_values(static_cast<std::size_t>(c), rng);
  nn::NoGradGuard guard;
  const auto x = nn::from_values({1, c, 32, 32}, xv, false);
  const auto w = nn::from_values({c, c, 3, 3}, wv, false);
  const auto b = nn::from_values({1, c, 1, 1}, bv, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::conv2d(x, w, b, 1)->value.data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(4)->Arg(8)->Arg(16);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  maskprobe::Rng rng(2);
  const auto xv = random_values(static_cast<std::size_t>(c) * 32 * 32, rng);
  const auto wv = random_values(static_cast<std::size_t>(c) * c * 9, rng);
  const auto bv = random_values(static_cast<std::size_t>(c), rng);
  for (auto _ : state) {
    const auto x = nn::from_values({1, c, 32, 32}, xv, true);
    const auto w = nn::from_values({c, c, 3, 3}, wv, true);
    const auto b = nn::from_values({1, c, 1, 1}, bv, true);
    const auto loss = nn::mean_all(nn::conv2d(x, w, b, 1));
    nn::backward(loss);
    benchmark::DoNotOptimize(w->grad.data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(4)->Arg(8);

void BM_Upsample2x(benchmark::State& state) {
  maskprobe::Rng rng(3);
  const auto xv = random_values(8 * 16 * 16, rng);
  nn::NoGradGuard guard;
  const auto x = nn::from_values({1, 8, 16, 16}, xv, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::upsample2x(x)->value.data());
  }
}
BENCHMARK(BM_Upsample2x);

}  // namespace
