#include <benchmark/benchmark.h>

#include "tbrw/engine.hpp"
#include "tbrw/laws.hpp"
#include "tbrw/oracles.hpp"
#include "tbrw/tree.hpp"

namespace {

using namespace tbrw;

void BM_ExtCountAdd(benchmark::State& state) {
  ExtCount a = ExtCount::from_log2(400.3);
  ExtCount b = ExtCount::from_log2(399.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(a + b);
  }
}
BENCHMARK(BM_ExtCountAdd);

void BM_RngUnit(benchmark::State& state) {
  RngStream rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rng.next_unit());
  }
}
BENCHMARK(BM_RngUnit);

/// Neighbor draws at the root of a tree whose root carries `range` children;
/// exercises the cumulative-weight index.
void BM_SampleNeighbor(benchmark::State& state) {
  CompressedTree tree = CompressedTree::single_edge();
  for (std::int64_t i = 0; i < state.range(0); ++i)
    tree.grow(VertexRef::vertex(0), ExtCount(1), ExtCount(static_cast<std::uint64_t>(i) + 1));
  RngStream rng(11);
  VertexRef at = VertexRef::vertex(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.sample_neighbor(at, rng));
  }
}
BENCHMARK(BM_SampleNeighbor)->Arg(8)->Arg(256)->Arg(8192);

void BM_ThinnedGrowthTime(benchmark::State& state) {
  LawSequence law(BernoulliPowerLaw{1.0, 0.8});
  RngStream rng(13);
  ExtCount after;
  for (auto _ : state) {
    auto next = sample_next_growth_time(law, after, rng);
    after = *next;
    benchmark::DoNotOptimize(after);
  }
}
BENCHMARK(BM_ThinnedGrowthTime);

/// Per-step cost of the exact engine, including observer-free bookkeeping.
void BM_ExactSteps(benchmark::State& state) {
  LawSequence law(BernoulliPowerLaw{1.0, 0.8});
  Engine eng(law, CompressedTree::single_edge(), VertexRef::vertex(0), 17, ExactParams{});
  for (auto _ : state) {
    eng.run_steps(1000, {});
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_ExactSteps);

/// Whole growth events under the stationary-placement shortcut.
void BM_ShortcutGrowths(benchmark::State& state) {
  LawSequence law(BernoulliPowerLaw{1.0, 0.75});
  ShortcutParams mode;
  mode.policy = ShortcutParams::Policy::fast;
  Engine eng(law, CompressedTree::single_edge(), VertexRef::vertex(0), 19, mode);
  for (auto _ : state) {
    eng.run_growths(10, {});
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_ShortcutGrowths);

void BM_SuccessCountCdf(benchmark::State& state) {
  std::vector<double> p;
  for (int i = 1; i <= 200; ++i) p.push_back(1.0 / (i + 1.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(poisson_binomial_cdf(p, 20));
  }
}
BENCHMARK(BM_SuccessCountCdf);

void BM_ExactWalkDistribution(benchmark::State& state) {
  // Double star on 32 vertices, fully materialized as the oracle requires.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges{{0, 1}};
  for (std::uint64_t i = 2; i < 32; ++i) edges.push_back({i % 2, i});
  CompressedTree tree = CompressedTree::from_edges(edges);
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_walk_distribution(tree, 0, ExtCount(1000)));
  }
}
BENCHMARK(BM_ExactWalkDistribution);

}  // namespace

// The system libbenchmark_main.a carries LTO bytecode from a different
// compiler minor; providing the main here keeps the link portable.
BENCHMARK_MAIN();
