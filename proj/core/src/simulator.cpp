#include "sqf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sqf/errors.hpp"
#include "sqf/matching.hpp"

namespace sqf {

using nlohmann::json;

void CostModel::validate() const {
  for (const double v : {lookupTicks, retrievalTicksPerGB, serverProcessPerGB, networkTicksPerGB, queryProcTicks,
                         interCachePerHopTicks, procTicksPerLeaf}) {
    if (!(v >= 0.0)) throw ConfigError("cost model constants must be non-negative");
  }
}

double response_time(const QueryOutcome& o, const CostModel& cm) {
  return cm.lookupTicks + o.foundGB * cm.retrievalTicksPerGB + o.missedGB * cm.serverProcessPerGB +
         o.missedGB * cm.networkTicksPerGB + cm.queryProcTicks + static_cast<double>(o.leaves) * cm.procTicksPerLeaf +
         o.hops * cm.interCachePerHopTicks;
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::SQF: return "sqf";
    case PolicyKind::SemanticCache: return "semantic";
    case PolicyKind::FullQuery: return "full_query";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view text) {
  if (text == "sqf") return PolicyKind::SQF;
  if (text == "semantic") return PolicyKind::SemanticCache;
  if (text == "full_query") return PolicyKind::FullQuery;
  throw ConfigError(fmt::format("unknown policy '{}' (expected sqf, semantic or full_query)", text));
}

// -- simulation ---------------------------------------------------------------

Simulation::Simulation(PolicyKind policy, CacheNetwork network, CostModel cm, CacheParams params)
    : policy_(policy), net_(std::move(network)), cm_(cm), params_(params) {
  cm_.validate();
}

QueryOutcome Simulation::process(const QueryEvent& event) {
  if (event.ts < clock_) throw ClockError(fmt::format("event at {} arrives before {}", event.ts, clock_));
  clock_ = event.ts;
  return policy_ == PolicyKind::FullQuery ? process_full(event) : process_segmented(event);
}

bool Simulation::admit_near(CachedQuery c, const LocationId& userLoc, Timestamp ts,
                            std::span<const CachedQueryId> companions) {
  UnitId target;
  try {
    target = greedy_place(c.volumeGB, {{userLoc, 1}}, net_);
  } catch (const PlacementError&) {
    return false;
  }
  const auto id = c.id;
  auto& unit = net_.unit(target);
  if (!unit.admit(std::move(c), ts, companions).stored) return false;
  const std::size_t root = 0;
  unit.record_access(id, userLoc, ts, companions, std::span<const std::size_t>(&root, 1));
  return true;
}

QueryOutcome Simulation::process_segmented(const QueryEvent& event) {
  const auto found = search_cache(event.tree, net_, event.userLoc);
  const auto& home = net_.unit(net_.nearest_unit(event.userLoc));

  QueryOutcome out;
  out.leaves = found.contained.size() + found.remainder.size();
  out.remainderLeaves = found.remainder.size();

  struct Use {
    double volumeGB = 0.0;
    std::vector<std::size_t> nodes;
  };
  std::map<std::pair<UnitId, CachedQueryId>, Use> uses;
  for (const auto& part : found.contained) {
    out.foundGB += part.volumeGB;
    auto& use = uses[{part.unit, part.cachedQuery}];
    use.volumeGB += part.volumeGB;
    use.nodes.push_back(part.node);
  }
  std::set<UnitId> remoteUnits;
  for (const auto& [key, use] : uses) {
    if (key.first == home.id()) continue;
    remoteUnits.insert(key.first);
    ledger_.add(use.volumeGB);
  }
  for (const auto& unitId : remoteUnits) out.hops += net_.hops(home.location(), net_.unit(unitId).location());

  std::vector<CachedQueryId> participants;
  for (const auto& [key, use] : uses) participants.push_back(key.second);

  auto keep = found.remainder;
  std::sort(keep.begin(), keep.end());
  for (const QetNode* leaf : leaves(event.tree)) {
    if (std::binary_search(keep.begin(), keep.end(), leaf->id())) out.missedGB += leaf->volume();
  }
  if (policy_ == PolicyKind::SQF) {
    // Fragments fetched from other units are also kept near the user.
    for (const auto& part : found.contained) {
      if (part.unit != home.id()) keep.push_back(part.subQuery);
    }
    std::sort(keep.begin(), keep.end());
  }
  if (!keep.empty()) {
    // The first sighting is cached whole; otherwise only the missing parts.
    auto id = ids_.allocate();
    auto c = make_cached_query(id, QueryEvaluationTree{event.tree.queryId, restrict_to_leaves(event.tree.root, keep)}, {});
    if (admit_near(std::move(c), event.userLoc, event.ts, participants)) participants.push_back(id);
  }

  for (const auto& [key, use] : uses) {
    std::vector<CachedQueryId> companions;
    for (const auto& p : participants) {
      if (p != key.second) companions.push_back(p);
    }
    net_.unit(key.first).record_access(key.second, event.userLoc, event.ts, companions, use.nodes);
  }
  return out;
}

QueryOutcome Simulation::process_full(const QueryEvent& event) {
  const auto& home = net_.unit(net_.nearest_unit(event.userLoc));
  const auto& root = *event.tree.root;

  QueryOutcome out;
  const auto probeLeaves = leaves(root);
  out.leaves = probeLeaves.size();

  const CachedQuery* hit = nullptr;
  std::size_t hitUnit = 0;
  int hitHops = 0;
  std::optional<Timestamp> hitRecency;
  for (const auto idx : net_.units_by_distance(event.userLoc)) {
    const int hops = net_.hops_to_unit(event.userLoc, idx);
    if (hit != nullptr && hops > hitHops) break;
    for (const auto& entry : net_.units()[idx].entries()) {
      const auto& other = *entry.expr.root;
      const auto& a = root.signature();
      const auto& b = other.signature();
      if (a.relations != b.relations || a.attributes != b.attributes || a.predicateAttributes != b.predicateAttributes) {
        continue;
      }
      if (!same_semantics(root.semantics(), other.semantics())) continue;
      const auto recency = entry.last_used_by(event.userLoc);
      bool take = hit == nullptr;
      if (!take) {
        if (recency != hitRecency) {
          take = recency && (!hitRecency || *recency > *hitRecency);
        } else {
          take = natural_less(entry.id, hit->id);
        }
      }
      if (take) {
        hit = &entry;
        hitUnit = idx;
        hitHops = hops;
        hitRecency = recency;
      }
    }
  }

  double total = 0.0;
  for (const QetNode* leaf : probeLeaves) total += leaf->volume();
  if (hit != nullptr) {
    out.foundGB = total;
    auto& unit = net_.units()[hitUnit];
    if (unit.id() != home.id()) {
      out.hops = net_.hops(home.location(), unit.location());
      ledger_.add(total);
    }
    const std::size_t rootIndex = 0;
    unit.record_access(hit->id, event.userLoc, event.ts, {}, std::span<const std::size_t>(&rootIndex, 1));
    return out;
  }
  out.missedGB = total;
  out.remainderLeaves = probeLeaves.size();
  auto id = ids_.allocate();
  admit_near(make_cached_query(id, event.tree, {}), event.userLoc, event.ts, {});
  return out;
}

void Simulation::maintain(Timestamp windowStart, Timestamp windowEnd) {
  if (policy_ != PolicyKind::SQF) return;
  const MaintenanceParams params{windowStart, windowEnd, params_.thetaFreq, params_.thetaAssoc};
  const NearestUnitFn nearest = [this](const LocationId& loc) { return net_.nearest_unit(loc); };

  struct Move {
    UnitId from;
    MaintenanceAction action;
  };
  std::vector<Move> moves;
  for (auto& unit : net_.units()) {
    for (auto& action : unit.maintenance_pass(params, ids_, nearest)) {
      if (action.kind == ActionKind::Relocate) moves.push_back({unit.id(), std::move(action)});
    }
  }
  for (const auto& move : moves) {
    const auto& id = move.action.sources.front();
    const auto* entry = net_.unit(move.from).find(id);
    if (entry == nullptr) continue;
    UnitId target;
    try {
      target = greedy_place(entry->volumeGB, move.action.demand, net_);
    } catch (const PlacementError&) {
      continue;
    }
    if (target == move.from) continue;
    const auto record = relocate(id, move.from, target, net_, ledger_, cm_.interCachePerHopTicks, windowEnd);
    if (record.succeeded) relocationTicks_ += record.transferTicks;
  }
}

EpochResult Simulation::run_epoch(std::span<const QueryEvent> events, std::size_t epoch, Timestamp windowStart,
                                  Timestamp windowEnd) {
  ledger_.clear();
  relocationTicks_ = 0.0;
  EpochResult r;
  r.epoch = epoch;
  r.queries = events.size();
  double responseSum = 0.0;
  double foundGB = 0.0;
  double totalGB = 0.0;
  for (const auto& e : events) {
    const auto o = process(e);
    responseSum += response_time(o, cm_);
    foundGB += o.foundGB;
    totalGB += o.foundGB + o.missedGB;
    r.cacheFaults += o.remainderLeaves;
  }
  maintain(windowStart, windowEnd);
  clock_ = std::max(clock_, windowEnd);
  r.avgResponseTicks = events.empty() ? 0.0 : (responseSum + relocationTicks_) / static_cast<double>(events.size());
  r.pctDataFound = totalGB > 0.0 ? std::min(100.0, 100.0 * foundGB / totalGB) : 0.0;
  r.relocations = ledger_.count();
  r.interCacheCost = cm_.networkTicksPerGB > 0.0 ? transfer_cost(ledger_, cm_.networkTicksPerGB) : 0.0;
  r.duplicationGB = duplication_overhead(std::span<const CacheUnit>(net_.units()));
  return r;
}

// -- scenarios ----------------------------------------------------------------

namespace {

std::string read_file(const std::filesystem::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open {} file {}", what, path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Inline object, or a path to a JSON file relative to `baseDir`.
std::string inline_or_file(const json& j, const std::filesystem::path& baseDir, std::string_view what) {
  if (j.is_object()) return j.dump();
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative()) p = baseDir / p;
    return read_file(p, what);
  }
  throw ConfigError(fmt::format("scenario: {} must be an object or a file path", what));
}

}  // namespace

Scenario scenario_from_json(std::string_view text, const std::string& baseDir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("scenario: {}", e.what()));
  }
  Scenario s;
  const std::filesystem::path base(baseDir);
  try {
    if (j.contains("workload")) s.workload = config_from_json(inline_or_file(j.at("workload"), base, "workload config"));
    if (!j.contains("network")) throw ConfigError("scenario: network is required");
    s.network = inline_or_file(j.at("network"), base, "network");
    network_from_json(s.network);
    if (j.contains("workloadFile")) {
      std::filesystem::path p = j.at("workloadFile").get<std::string>();
      if (p.is_relative()) p = base / p;
      auto w = read_workload(read_file(p, "workload"));
      s.workload = w.config;
      s.events = std::move(w.events);
    }
    if (j.contains("costModel")) {
      const auto& c = j.at("costModel");
      auto& cm = s.costModel;
      cm.lookupTicks = c.value("lookupTicks", cm.lookupTicks);
      cm.retrievalTicksPerGB = c.value("retrievalTicksPerGB", cm.retrievalTicksPerGB);
      cm.serverProcessPerGB = c.value("serverProcessPerGB", cm.serverProcessPerGB);
      cm.networkTicksPerGB = c.value("networkTicksPerGB", cm.networkTicksPerGB);
      cm.queryProcTicks = c.value("queryProcTicks", cm.queryProcTicks);
      cm.interCachePerHopTicks = c.value("interCachePerHopTicks", cm.interCachePerHopTicks);
      cm.procTicksPerLeaf = c.value("procTicksPerLeaf", cm.procTicksPerLeaf);
    }
    s.costModel.validate();
    if (j.contains("policies")) {
      s.policies.clear();
      for (const auto& p : j.at("policies")) s.policies.push_back(parse_policy(p.get<std::string>()));
      if (s.policies.empty()) throw ConfigError("scenario: at least one policy is required");
    }
    s.epochs = j.value("epochs", s.epochs);
    s.repeats = j.value("repeats", s.repeats);
    s.baseSeed = j.value("baseSeed", s.baseSeed);
    s.fixedSeed = j.value("fixedSeed", s.fixedSeed);
    s.threads = j.value("threads", s.threads);
    s.cache.eviction.epochTicks = s.workload.windowDuration;
    if (j.contains("cache")) {
      const auto& c = j.at("cache");
      s.cache.eviction.decay = c.value("decay", s.cache.eviction.decay);
      s.cache.eviction.epochTicks = c.value("epochTicks", s.cache.eviction.epochTicks);
      s.cache.thetaFreq = c.value("thetaFreq", s.cache.thetaFreq);
      s.cache.thetaAssoc = c.value("thetaAssoc", s.cache.thetaAssoc);
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("scenario: {}", e.what()));
  }
  if (s.epochs < 1) throw ConfigError("scenario: epochs must be at least 1");
  if (s.repeats < 1) throw ConfigError("scenario: repeats must be at least 1");
  if (s.threads < 1) s.threads = 1;
  return s;
}

Scenario load_scenario(const std::string& path) {
  const std::filesystem::path p(path);
  return scenario_from_json(read_file(p, "scenario"), p.parent_path().empty() ? "." : p.parent_path().string());
}

// -- experiments --------------------------------------------------------------

const std::vector<std::string>& series_metrics() {
  static const std::vector<std::string> metrics{"avg_response", "pct_found", "intercache_cost", "relocations",
                                                "duplication_gb"};
  return metrics;
}

double metric_value(const EpochResult& r, std::string_view metric) {
  if (metric == "avg_response") return r.avgResponseTicks;
  if (metric == "pct_found") return r.pctDataFound;
  if (metric == "intercache_cost") return r.interCacheCost;
  if (metric == "relocations") return static_cast<double>(r.relocations);
  if (metric == "duplication_gb") return r.duplicationGB;
  if (metric == "cache_faults") return static_cast<double>(r.cacheFaults);
  throw ContractError(fmt::format("unknown metric {}", metric));
}

std::vector<std::span<const QueryEvent>> split_epochs(std::span<const QueryEvent> events, std::size_t perEpoch,
                                                      std::size_t epochs) {
  if (perEpoch == 0) throw ContractError("epochs need at least one event each");
  std::vector<std::span<const QueryEvent>> out;
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto start = std::min(events.size(), e * perEpoch);
    const auto end = std::min(events.size(), start + perEpoch);
    out.push_back(events.subspan(start, end - start));
  }
  return out;
}

std::vector<EpochResult> run_policy(PolicyKind policy, const Scenario& scenario, const std::vector<QueryEvent>& events,
                                    CacheNetwork* finalState) {
  Simulation sim(policy, network_from_json(scenario.network, scenario.cache.eviction), scenario.costModel, scenario.cache);
  const double window = scenario.workload.windowDuration;
  std::vector<EpochResult> results;
  const auto slices = split_epochs(events, scenario.workload.queriesPerWindow, scenario.epochs);
  for (std::size_t e = 0; e < slices.size(); ++e) {
    const double start = static_cast<double>(e) * window;
    double end = static_cast<double>(e + 1) * window;
    if (!slices[e].empty()) end = std::max(end, slices[e].back().ts);
    results.push_back(sim.run_epoch(slices[e], e + 1, start, end));
  }
  if (finalState != nullptr) *finalState = sim.network();
  return results;
}

ExperimentResult run_experiment(const Scenario& scenario) {
  auto runRepeat = [&scenario](std::size_t repeat) {
    std::vector<QueryEvent> generated;
    const std::vector<QueryEvent>* events = nullptr;
    if (scenario.events) {
      events = &*scenario.events;
    } else {
      auto config = scenario.workload;
      config.seed = scenario.fixedSeed ? scenario.baseSeed : scenario.baseSeed + repeat;
      generated = generate(config, scenario.epochs);
      events = &generated;
    }
    std::vector<RawRow> rows;
    for (const auto policy : scenario.policies) {
      for (auto& r : run_policy(policy, scenario, *events)) rows.push_back({policy, repeat, r});
    }
    return rows;
  };

  std::vector<std::vector<RawRow>> perRepeat(scenario.repeats);
  if (scenario.threads <= 1) {
    for (std::size_t r = 0; r < scenario.repeats; ++r) perRepeat[r] = runRepeat(r);
  } else {
    for (std::size_t first = 0; first < scenario.repeats; first += scenario.threads) {
      std::vector<std::future<std::vector<RawRow>>> batch;
      const auto last = std::min<std::size_t>(scenario.repeats, first + scenario.threads);
      for (std::size_t r = first; r < last; ++r) batch.push_back(std::async(std::launch::async, runRepeat, r));
      for (std::size_t r = first; r < last; ++r) perRepeat[r] = batch[r - first].get();
    }
  }

  ExperimentResult out;
  // Raw rows ordered by policy, then repeat, then epoch.
  for (const auto policy : scenario.policies) {
    for (const auto& rows : perRepeat) {
      for (const auto& row : rows) {
        if (row.policy == policy) out.raw.push_back(row);
      }
    }
  }
  out.series = aggregate(out.raw);
  return out;
}

std::vector<SeriesRow> aggregate(const std::vector<RawRow>& raw) {
  std::vector<PolicyKind> policies;
  std::size_t maxEpoch = 0;
  for (const auto& row : raw) {
    if (std::find(policies.begin(), policies.end(), row.policy) == policies.end()) policies.push_back(row.policy);
    maxEpoch = std::max(maxEpoch, row.result.epoch);
  }
  std::vector<SeriesRow> out;
  for (const auto policy : policies) {
    for (const auto& metric : series_metrics()) {
      for (std::size_t epoch = 1; epoch <= maxEpoch; ++epoch) {
        std::vector<double> values;
        for (const auto& row : raw) {
          if (row.policy == policy && row.result.epoch == epoch) values.push_back(metric_value(row.result, metric));
        }
        if (values.empty()) continue;
        const double n = static_cast<double>(values.size());
        double mean = 0.0;
        for (const double v : values) mean += v;
        mean /= n;
        double se = 0.0;
        if (values.size() > 1) {
          // Shifted by the first sample so identical samples give exactly zero.
          const double shift = values.front();
          double sum = 0.0;
          double sumSq = 0.0;
          for (const double v : values) {
            sum += v - shift;
            sumSq += (v - shift) * (v - shift);
          }
          const double ss = std::max(0.0, sumSq - sum * sum / n);
          se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        out.push_back({policy, metric, epoch, mean, se, values.size()});
      }
    }
  }
  return out;
}

}  // namespace sqf
