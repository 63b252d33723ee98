#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sqf/cache_unit.hpp"
#include "sqf/ids.hpp"
#include "sqf/placement.hpp"
#include "sqf/workload.hpp"

namespace sqf {

/// Response-time constants in logical clock ticks.
struct CostModel {
  double lookupTicks = 1.0;
  double retrievalTicksPerGB = 1.0;
  double serverProcessPerGB = 2.0;
  /// Also the per-GB inter-cache transfer cost.
  double networkTicksPerGB = 1.0;
  double queryProcTicks = 1.0;
  double interCachePerHopTicks = 1.0;
  /// Extra processing per leaf sub-query; 0 keeps processing per query.
  double procTicksPerLeaf = 0.0;

  /// Throws ConfigError when a constant is negative.
  void validate() const;
};

/// What serving one query cost.
struct QueryOutcome {
  double foundGB = 0.0;
  double missedGB = 0.0;
  int hops = 0;
  std::size_t leaves = 0;
  std::size_t remainderLeaves = 0;
};

/// lookup + found·retrieval + missed·server + missed·network + proc + hops·perHop.
double response_time(const QueryOutcome& outcome, const CostModel& cm);

enum class PolicyKind : std::uint8_t { SQF, SemanticCache, FullQuery };

std::string_view to_string(PolicyKind kind);
/// Accepts `sqf`, `semantic` and `full_query`.
PolicyKind parse_policy(std::string_view text);

struct CacheParams {
  EvictionPolicy eviction;
  std::uint64_t thetaFreq = 5;
  std::uint64_t thetaAssoc = 5;
};

struct EpochResult {
  /// 1-based.
  std::size_t epoch = 0;
  double avgResponseTicks = 0.0;
  double pctDataFound = 0.0;
  double interCacheCost = 0.0;
  std::size_t relocations = 0;
  double duplicationGB = 0.0;
  std::size_t cacheFaults = 0;
  std::size_t queries = 0;
};

/// One policy driving one cache network through a stream of epochs.
class Simulation {
 public:
  Simulation(PolicyKind policy, CacheNetwork network, CostModel cm, CacheParams params = {});

  PolicyKind policy() const noexcept { return policy_; }
  const CacheNetwork& network() const noexcept { return net_; }
  const CostModel& cost_model() const noexcept { return cm_; }

  /// Serves one query: search, account, record accesses, admit misses.
  /// Serving transfers between units are added to the current ledger.
  QueryOutcome process(const QueryEvent& event);

  /// End-of-window maintenance. SQF fragments, aggregates, marks eviction
  /// candidates and executes relocations; the baselines do nothing.
  void maintain(Timestamp windowStart, Timestamp windowEnd);

  /// Processes `events` (sorted by time), runs maintenance over
  /// [windowStart, windowEnd] and reports the epoch. `epoch` is 1-based.
  EpochResult run_epoch(std::span<const QueryEvent> events, std::size_t epoch, Timestamp windowStart,
                        Timestamp windowEnd);

 private:
  QueryOutcome process_segmented(const QueryEvent& event);
  QueryOutcome process_full(const QueryEvent& event);
  /// Places `c` at the unit nearest the user that can hold it and records
  /// the first access. Entries in `companions` are pinned during admission.
  bool admit_near(CachedQuery c, const LocationId& userLoc, Timestamp ts, std::span<const CachedQueryId> companions);

  PolicyKind policy_;
  CacheNetwork net_;
  CostModel cm_;
  CacheParams params_;
  IdAllocator ids_;
  TransferLedger ledger_;
  double relocationTicks_ = 0.0;
  Timestamp clock_ = 0.0;
};

/// Where the simulated workload comes from and how the runs are repeated.
struct Scenario {
  WorkloadConfig workload;
  /// Pre-generated events; when set, every repeat replays them.
  std::optional<std::vector<QueryEvent>> events;
  /// Network description JSON.
  std::string network;
  CostModel costModel;
  CacheParams cache;
  std::vector<PolicyKind> policies{PolicyKind::SQF, PolicyKind::SemanticCache, PolicyKind::FullQuery};
  std::size_t epochs = 14;
  std::size_t repeats = 8;
  std::uint64_t baseSeed = 1;
  /// Use baseSeed for every repeat.
  bool fixedSeed = false;
  /// Worker threads for independent runs; 1 runs inline.
  unsigned threads = 1;
};

/// Scenario JSON. `workload` and `network` are either inline objects or file
/// paths resolved against `baseDir`; `workloadFile` names a saved stream.
Scenario scenario_from_json(std::string_view text, const std::string& baseDir = ".");
Scenario load_scenario(const std::string& path);

struct RawRow {
  PolicyKind policy;
  /// 0-based.
  std::size_t repeat = 0;
  EpochResult result;
};

struct SeriesRow {
  PolicyKind policy;
  std::string metric;
  std::size_t epoch = 0;
  double mean = 0.0;
  double stdError = 0.0;
  std::size_t repeats = 0;
};

struct ExperimentResult {
  std::vector<RawRow> raw;
  std::vector<SeriesRow> series;
};

/// Metric names in report order.
const std::vector<std::string>& series_metrics();
double metric_value(const EpochResult& r, std::string_view metric);

/// Cuts a stream into consecutive epochs of `perEpoch` events.
std::vector<std::span<const QueryEvent>> split_epochs(std::span<const QueryEvent> events, std::size_t perEpoch,
                                                      std::size_t epochs);

/// Runs one policy over one stream and returns one result per epoch. When
/// `finalState` is given it receives the network after the last epoch.
std::vector<EpochResult> run_policy(PolicyKind policy, const Scenario& scenario, const std::vector<QueryEvent>& events,
                                    CacheNetwork* finalState = nullptr);

/// Runs every policy for every repeat; repeat r uses seed baseSeed + r.
ExperimentResult run_experiment(const Scenario& scenario);

/// Mean and standard error (sample standard deviation over √n) per policy,
/// metric and epoch.
std::vector<SeriesRow> aggregate(const std::vector<RawRow>& raw);

}  // namespace sqf
