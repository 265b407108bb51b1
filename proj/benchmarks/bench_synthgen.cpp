#include <benchmark/benchmark.h>

#include "maskprobe/models.hpp"
#include "maskprobe/synthgen.hpp"

namespace md = maskprobe::models;
namespace sg = maskprobe::synthgen;

namespace {

void BM_RenderScene(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto scene = sg::generate_scene(17, "cluttered");
  for (auto _ : state) {
    benchmark::DoNotOptimize(sg::render(scene, side, side).depth.data.data());
  }
}
BENCHMARK(BM_RenderScene)->Arg(32)->Arg(64)->Arg(128);

void BM_DepthPredict(benchmark::State& state) {
  md::ModelConfig cfg;
  cfg.architecture = "depth-ed2";
  cfg.base_width = 8;
  cfg.seed = 5;
  const auto net = md::build_depth_net(cfg);
  const auto scene = sg::generate_scene(18, "corridor");
  auto sample = sg::render(scene, 32, 32);
  sample.image.normalized = true;  // raw values already sit in (0, 1]
  for (auto _ : state) {
    benchmark::DoNotOptimize(net->predict(sample.image).data.data());
  }
}
BENCHMARK(BM_DepthPredict);

}  // namespace
