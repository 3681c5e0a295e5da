// Path tracer timings: the flat-wall IR view and a sphere on a plane.

#include <benchmark/benchmark.h>

#include "depthsim/parallel.hpp"
#include "depthsim/render.hpp"
#include "test_support.hpp"

using namespace depthsim;
namespace fx = depthsim::fixtures;

namespace {

void BM_TraceWall(benchmark::State& state) {
  ScopedThreadCount tc(static_cast<int>(state.range(0)));
  const Scene s = fx::wall_scene(1.0, PbrMaterial{}, fx::d415_like_camera());
  TraceOptions opt;
  opt.spp = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(trace(s, s.rig.ir_left, opt));
  state.SetItemsProcessed(state.iterations() * 424 * 240 * opt.spp);
}
BENCHMARK(BM_TraceWall)->Args({1, 1})->Args({1, 8})->Args({4, 8})->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_TraceBall(benchmark::State& state) {
  PbrMaterial glass;
  glass.transmission = state.range(0) ? 1.0 : 0.0;
  const Scene s = fx::ball_scene(glass, fx::d415_like_camera());
  TraceOptions opt;
  opt.spp = 8;
  for (auto _ : state) benchmark::DoNotOptimize(trace(s, s.rig.ir_left, opt));
  state.SetItemsProcessed(state.iterations() * 424 * 240 * opt.spp);
}
BENCHMARK(BM_TraceBall)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
