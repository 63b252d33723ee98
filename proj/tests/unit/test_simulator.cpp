#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "scenarios.hpp"
#include "sqf/errors.hpp"
#include "sqf/simulator.hpp"

using namespace sqf;
using namespace sqf::testing;

namespace {

const PolicyKind kPolicies[] = {PolicyKind::SQF, PolicyKind::SemanticCache, PolicyKind::FullQuery};

Simulation simulation(PolicyKind p, const char* network = kTwoSiteNetwork) {
  return Simulation(p, network_from_json(network), CostModel{});
}

void check_ledger(const EpochResult& got, const EpochResult& want) {
  CHECK(got.epoch == want.epoch);
  CHECK(got.queries == want.queries);
  CHECK(got.avgResponseTicks == want.avgResponseTicks);
  CHECK(got.pctDataFound == want.pctDataFound);
  CHECK(got.interCacheCost == want.interCacheCost);
  CHECK(got.relocations == want.relocations);
  CHECK(got.duplicationGB == want.duplicationGB);
  CHECK(got.cacheFaults == want.cacheFaults);
}

}  // namespace

TEST_CASE("response time from the cost model") {
  const CostModel cm;
  CHECK(response_time({5, 0, 0, 1, 0}, cm) == 7.0);
  CHECK(response_time({0, 5, 0, 1, 1}, cm) == 17.0);
  CHECK(response_time({}, cm) == cm.lookupTicks + cm.queryProcTicks);
  CHECK(response_time({1, 1, 3, 2, 1}, cm) == 1 + 1 + 2 + 1 + 1 + 3);

  CostModel perLeaf;
  perLeaf.procTicksPerLeaf = 0.5;
  CHECK(response_time({0, 0, 0, 4, 0}, perLeaf) == 4.0);

  CostModel bad;
  bad.lookupTicks = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("policy names") {
  for (const auto p : kPolicies) CHECK(parse_policy(to_string(p)) == p);
  CHECK_THROWS_AS(parse_policy("lru"), ConfigError);
}

TEST_CASE("scripted three-query scenario matches the hand ledger") {
  const auto events = ledger_events();
  for (const auto p : kPolicies) {
    CAPTURE(to_string(p));
    auto sim = simulation(p);
    check_ledger(sim.run_epoch(events, 1, 0, 10), ledger_expected(p));
  }
}

TEST_CASE("per-query outcomes of the scripted scenario") {
  const auto events = ledger_events();
  auto sim = simulation(PolicyKind::SemanticCache);
  const auto q1 = sim.process(events[0]);
  CHECK(q1.foundGB == 0.0);
  CHECK(q1.missedGB == 5.0);
  const auto q2 = sim.process(events[1]);
  CHECK(q2.foundGB == 2.0);
  CHECK(q2.missedGB == 5.0);
  CHECK(q2.hops == 2);
  CHECK(response_time(q2, CostModel{}) == 21.0);
  const auto q3 = sim.process(events[2]);
  CHECK(q3.foundGB == 5.0);
  CHECK(q3.hops == 0);
  CHECK(sim.network().unit("cache-2").entries().size() == 1);
  CHECK(sim.network().unit("cache-2").entries()[0].expr.root->expr() == "(c)");
}

TEST_CASE("sqf keeps remotely found fragments near the user") {
  const auto events = ledger_events();
  auto sim = simulation(PolicyKind::SQF);
  sim.process(events[0]);
  sim.process(events[1]);
  const auto& near = sim.network().unit("cache-2").entries();
  REQUIRE(near.size() == 1);
  CHECK(near[0].expr.root->expr() == "((a) ∥ (c))");
}

TEST_CASE("repeating a cached query finds everything") {
  const auto q = tree("Q", seq({par({simple_leaf("a", 2), simple_leaf("b", 1)}), simple_leaf("c", 3)}));
  for (const auto p : kPolicies) {
    CAPTURE(to_string(p));
    auto sim = simulation(p);
    const std::vector<QueryEvent> warm{event(q, "uloc-1", 1)};
    sim.run_epoch(warm, 1, 0, 10);
    std::vector<QueryEvent> repeats;
    for (int i = 0; i < 5; ++i) repeats.push_back(event(q, "uloc-1", 11 + i));
    const auto r = sim.run_epoch(repeats, 2, 10, 20);
    CHECK(r.pctDataFound == 100.0);
    CHECK(r.cacheFaults == 0);
  }
}

TEST_CASE("a cold cache with distinct queries finds nothing") {
  std::vector<QueryEvent> events;
  for (int i = 0; i < 6; ++i) {
    const auto n = std::to_string(i);
    events.push_back(event(tree("Q" + n, par({simple_leaf("x" + n), simple_leaf("y" + n)})), i % 2 ? "uloc-1" : "uloc-2", i));
  }
  for (const auto p : kPolicies) {
    CAPTURE(to_string(p));
    auto sim = simulation(p);
    const auto r = sim.run_epoch(events, 1, 0, 10);
    CHECK(r.pctDataFound == 0.0);
    CHECK(r.cacheFaults == 12);
  }
}

TEST_CASE("partial overlap is a miss for full_query and a partial hit otherwise") {
  const auto a = simple_leaf("a", 2);
  const auto first = event(tree("Q1", par({a, simple_leaf("b"), simple_leaf("c")})), "uloc-1", 1);
  const auto second = event(tree("Q2", par({a, simple_leaf("d"), simple_leaf("e")})), "uloc-1", 2);
  const auto disjoint = event(tree("Q3", par({simple_leaf("f"), simple_leaf("g")})), "uloc-1", 3);
  for (const auto p : kPolicies) {
    CAPTURE(to_string(p));
    auto sim = simulation(p);
    sim.process(first);
    const auto o = sim.process(second);
    CHECK(o.foundGB == (p == PolicyKind::FullQuery ? 0.0 : 2.0));
    CHECK(o.foundGB + o.missedGB == 4.0);
    CHECK(sim.process(disjoint).foundGB == 0.0);
  }
}

TEST_CASE("events must not go back in time") {
  auto sim = simulation(PolicyKind::SQF);
  sim.process(event(tree("Q", simple_leaf("a")), "uloc-1", 5));
  CHECK_THROWS_AS(sim.process(event(tree("Q", simple_leaf("a")), "uloc-1", 4)), ClockError);
}

TEST_CASE("co-queried fragments are aggregated by sqf only") {
  const auto s = ab_ac_scenario();
  const auto sqf = run_policy(PolicyKind::SQF, s, *s.events);
  const auto semantic = run_policy(PolicyKind::SemanticCache, s, *s.events);
  REQUIRE(sqf.size() == 1);
  CHECK(sqf[0].duplicationGB == 4.0);
  CHECK(semantic[0].duplicationGB == 0.0);
}

TEST_CASE("a remote fragment is transferred once and then served locally") {
  auto sim = simulation(PolicyKind::SQF);
  const auto a = tree("A", simple_leaf("a", 3));
  std::vector<QueryEvent> events{event(a, "uloc-1", 1)};
  for (int i = 0; i < 4; ++i) events.push_back(event(a, "uloc-2", 2 + i));
  const auto r = sim.run_epoch(events, 1, 0, 10);
  CHECK(r.relocations == 1);
  CHECK(r.interCacheCost == 3.0);
  // A 3 GB miss (11), a remote read over two hops (7), three local hits (5).
  CHECK(r.avgResponseTicks == (11.0 + 7.0 + 3 * 5.0) / 5.0);
}

TEST_CASE("scenario JSON") {
  const auto s = scenario_from_json(std::string(R"({"network": )") + kTwoSiteNetwork +
                                    R"(, "epochs": 3, "repeats": 2, "baseSeed": 9, "policies": ["sqf"],
                                    "costModel": {"lookupTicks": 2}, "cache": {"thetaFreq": 7},
                                    "workload": {"queriesPerWindow": 10, "universeSize": 20}})");
  CHECK(s.epochs == 3);
  CHECK(s.repeats == 2);
  CHECK(s.baseSeed == 9);
  CHECK(s.policies == std::vector<PolicyKind>{PolicyKind::SQF});
  CHECK(s.costModel.lookupTicks == 2.0);
  CHECK(s.cache.thetaFreq == 7);
  CHECK(s.workload.queriesPerWindow == 10);

  CHECK_THROWS_AS(scenario_from_json(R"({"epochs": 3})"), ConfigError);
  CHECK_THROWS_AS(scenario_from_json(R"({"network": "missing-network.json"})", "/nonexistent"), ConfigError);
  CHECK_THROWS_AS(scenario_from_json(std::string(R"({"network": )") + kTwoSiteNetwork + R"(, "policies": ["x"]})"),
                  ConfigError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

namespace {

Scenario small_scenario() {
  Scenario s;
  s.workload.queriesPerWindow = 40;
  s.workload.universeSize = 30;
  s.workload.windowDuration = 40;
  s.network = R"({"topology": "random", "unitCount": 4, "capacityGB": 20, "seed": 5})";
  s.epochs = 3;
  s.repeats = 3;
  s.baseSeed = 17;
  return s;
}

}  // namespace

TEST_CASE("forced identical seeds give zero standard error") {
  auto s = small_scenario();
  s.fixedSeed = true;
  for (const auto& row : run_experiment(s).series) {
    CHECK(row.stdError == 0.0);
    CHECK(row.repeats == 3);
  }
}

TEST_CASE("series means are the means of the raw rows") {
  const auto s = small_scenario();
  const auto result = run_experiment(s);
  CHECK(result.raw.size() == 3 * 3 * 3);
  CHECK(result.series.size() == 3 * series_metrics().size() * 3);
  for (const auto& row : result.series) {
    double sum = 0.0;
    double sumSq = 0.0;
    std::size_t n = 0;
    for (const auto& raw : result.raw) {
      if (raw.policy != row.policy || raw.result.epoch != row.epoch) continue;
      const double v = metric_value(raw.result, row.metric);
      sum += v;
      sumSq += v * v;
      ++n;
    }
    REQUIRE(n == 3);
    const double mean = sum / 3.0;
    CHECK(row.mean == doctest::Approx(mean).epsilon(1e-12));
    const double var = std::max(0.0, (sumSq - 3.0 * mean * mean) / 2.0);
    CHECK(row.stdError == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("experiments are deterministic and threads do not change results") {
  auto s = small_scenario();
  const auto a = run_experiment(s);
  s.threads = 3;
  const auto b = run_experiment(s);
  REQUIRE(a.raw.size() == b.raw.size());
  for (std::size_t i = 0; i < a.raw.size(); ++i) {
    CHECK(a.raw[i].policy == b.raw[i].policy);
    CHECK(a.raw[i].result.avgResponseTicks == b.raw[i].result.avgResponseTicks);
    CHECK(a.raw[i].result.pctDataFound == b.raw[i].result.pctDataFound);
  }
}

TEST_CASE("split_epochs cuts consecutive slices") {
  const auto events = ledger_events();
  const auto slices = split_epochs(events, 2, 3);
  REQUIRE(slices.size() == 3);
  CHECK(slices[0].size() == 2);
  CHECK(slices[1].size() == 1);
  CHECK(slices[2].empty());
  CHECK_THROWS_AS(split_epochs(events, 0, 1), ContractError);
}
