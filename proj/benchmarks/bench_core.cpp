#include <benchmark/benchmark.h>

#include "sqf/matching.hpp"
#include "sqf/placement.hpp"
#include "sqf/simulator.hpp"
#include "sqf/workload.hpp"

using namespace sqf;

namespace {

constexpr const char* kNetwork =
    R"({"topology": "random", "unitCount": 20, "edgeProbability": 0.1, "capacityGB": 20, "seed": 7})";

WorkloadConfig bench_workload() {
  WorkloadConfig c;
  c.overlap = Distribution::poisson(3);
  c.templates = 40;
  c.seed = 11;
  return c;
}

/// A network warmed by one SQF epoch, plus a fresh batch of probes.
struct WarmCache {
  Simulation sim{PolicyKind::SQF, network_from_json(kNetwork), CostModel{}};
  std::vector<QueryEvent> probes;

  WarmCache() {
    const auto c = bench_workload();
    const auto events = generate(c, 2);
    const auto epochs = split_epochs(events, c.queriesPerWindow, 2);
    sim.run_epoch(epochs[0], 1, 0, c.windowDuration);
    probes.assign(epochs[1].begin(), epochs[1].end());
  }
};

const WarmCache& warm() {
  static const WarmCache w;
  return w;
}

void BM_SearchCache(benchmark::State& state) {
  const auto& w = warm();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& e = w.probes[i++ % w.probes.size()];
    benchmark::DoNotOptimize(search_cache(e.tree, w.sim.network(), e.userLoc));
  }
}
BENCHMARK(BM_SearchCache);

void BM_Answerable(benchmark::State& state) {
  std::vector<const SemanticDescriptor*> ds;
  for (const auto& e : warm().probes) {
    for (const auto* n : breadth_first(*e.tree.root)) ds.push_back(&n->semantics());
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto* s = ds[i % ds.size()];
    const auto* t = ds[(i * 7 + 3) % ds.size()];
    ++i;
    benchmark::DoNotOptimize(answerable(*s, *t));
  }
}
BENCHMARK(BM_Answerable);

void BM_Epoch(benchmark::State& state) {
  const auto policy = static_cast<PolicyKind>(state.range(0));
  const auto c = bench_workload();
  const auto events = generate(c, 1);
  for (auto _ : state) {
    Simulation sim(policy, network_from_json(kNetwork), CostModel{});
    benchmark::DoNotOptimize(sim.run_epoch(events, 1, 0, c.windowDuration));
  }
  state.SetLabel(std::string(to_string(policy)));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * events.size()));
}
BENCHMARK(BM_Epoch)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
