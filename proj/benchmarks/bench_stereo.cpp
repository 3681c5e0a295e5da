// Stereo stage timings on a 640x480 random-texture pair.
//   ./bench_stereo --benchmark_filter=Disparity

#include <benchmark/benchmark.h>

#include "depthsim/parallel.hpp"
#include "depthsim/stereo.hpp"
#include "test_support.hpp"

using namespace depthsim;
namespace fx = depthsim::fixtures;

namespace {

struct Pair {
  Image8 left, right;
  StereoConfig cfg;
};

const Pair& pair() {
  static const Pair p = [] {
    Pair q;
    q.right = fx::random_image(640, 480, 5);
    q.left = fx::shift_right(q.right, 20);
    q.cfg.max_disp = 64;
    return q;
  }();
  return p;
}

void BM_Census(benchmark::State& state) {
  ScopedThreadCount tc(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(census(pair().left, pair().cfg));
}
BENCHMARK(BM_Census)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_MatchingCost(benchmark::State& state) {
  ScopedThreadCount tc(static_cast<int>(state.range(0)));
  const CensusImage cl = census(pair().left, pair().cfg), cr = census(pair().right, pair().cfg);
  for (auto _ : state) benchmark::DoNotOptimize(matching_cost(cl, cr, pair().cfg));
}
BENCHMARK(BM_MatchingCost)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_SgmAggregate(benchmark::State& state) {
  ScopedThreadCount tc(static_cast<int>(state.range(0)));
  const CensusImage cl = census(pair().left, pair().cfg), cr = census(pair().right, pair().cfg);
  const CostVolume cv = matching_cost(cl, cr, pair().cfg);
  for (auto _ : state) benchmark::DoNotOptimize(sgm_aggregate(cv, pair().cfg));
}
BENCHMARK(BM_SgmAggregate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Disparity(benchmark::State& state) {
  ScopedThreadCount tc(static_cast<int>(state.range(0)));
  StereoConfig cfg = pair().cfg;
  cfg.block_width = cfg.block_height = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(compute_disparity(pair().left, pair().right, cfg));
  state.SetItemsProcessed(state.iterations() * 640 * 480);
}
BENCHMARK(BM_Disparity)->Args({1, 1})->Args({4, 1})->Args({1, 5})->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
