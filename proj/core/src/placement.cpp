#include "sqf/placement.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sqf/errors.hpp"

namespace sqf {

namespace {

constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;

}  // namespace

CacheNetwork::CacheNetwork(std::vector<CacheUnit> units, std::vector<LocationId> userLocations,
                           std::vector<LocationId> dataServers, const std::vector<HopEdge>& edges)
    : units_(std::move(units)), userLocations_(std::move(userLocations)), dataServers_(std::move(dataServers)) {
  if (units_.empty()) throw ConfigError("network has no cache units");
  auto addLocation = [&](const LocationId& loc) {
    if (loc.empty()) throw ConfigError("empty location id");
    if (locationIndex_.contains(loc)) return false;
    locationIndex_.emplace(loc, locations_.size());
    locations_.push_back(loc);
    return true;
  };
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (!unitIndex_.emplace(units_[i].id(), i).second) {
      throw ConfigError(fmt::format("duplicate unit id {}", units_[i].id()));
    }
    addLocation(units_[i].location());
  }
  for (const auto& loc : userLocations_) {
    if (!addLocation(loc)) throw ConfigError(fmt::format("user location {} is already defined", loc));
  }
  for (const auto& loc : dataServers_) {
    if (!addLocation(loc)) throw ConfigError(fmt::format("data server {} is already defined", loc));
  }
  for (const auto& u : units_) unitLocation_.push_back(locationIndex_.at(u.location()));

  const auto n = locations_.size();
  hops_.assign(n * n, kUnreachable);
  for (std::size_t i = 0; i < n; ++i) hops_[i * n + i] = 0;
  for (const auto& e : edges) {
    const auto ia = locationIndex_.find(e.a);
    const auto ib = locationIndex_.find(e.b);
    if (ia == locationIndex_.end() || ib == locationIndex_.end()) {
      throw ConfigError(fmt::format("edge {} - {} names an unknown location", e.a, e.b));
    }
    if (e.hops < 0) throw ConfigError(fmt::format("edge {} - {} has negative hops", e.a, e.b));
    auto& ab = hops_[ia->second * n + ib->second];
    auto& ba = hops_[ib->second * n + ia->second];
    ab = std::min(ab, e.hops);
    ba = std::min(ba, e.hops);
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const int via = hops_[i * n + k] + hops_[k * n + j];
        if (via < hops_[i * n + j]) hops_[i * n + j] = via;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (hops_[i * n + j] >= kUnreachable) {
        throw ConfigError(fmt::format("network is disconnected: {} cannot reach {}", locations_[i], locations_[j]));
      }
    }
  }
}

std::size_t CacheNetwork::location_index(std::string_view loc) const {
  const auto it = locationIndex_.find(std::string(loc));
  if (it == locationIndex_.end()) throw ContractError(fmt::format("unknown location {}", loc));
  return it->second;
}

bool CacheNetwork::has_location(std::string_view loc) const { return locationIndex_.contains(std::string(loc)); }

int CacheNetwork::hops(std::string_view a, std::string_view b) const {
  return hops_[location_index(a) * locations_.size() + location_index(b)];
}

int CacheNetwork::hops_to_unit(std::string_view loc, std::size_t unitIndex) const {
  return hops_[location_index(loc) * locations_.size() + unitLocation_.at(unitIndex)];
}

std::size_t CacheNetwork::unit_index(std::string_view unitId) const {
  const auto it = unitIndex_.find(std::string(unitId));
  if (it == unitIndex_.end()) throw ContractError(fmt::format("unknown cache unit {}", unitId));
  return it->second;
}

CacheUnit& CacheNetwork::unit(std::string_view unitId) { return units_[unit_index(unitId)]; }
const CacheUnit& CacheNetwork::unit(std::string_view unitId) const { return units_[unit_index(unitId)]; }

std::vector<std::size_t> CacheNetwork::units_by_distance(std::string_view loc) const {
  const auto from = location_index(loc) * locations_.size();
  std::vector<std::size_t> order(units_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int ha = hops_[from + unitLocation_[a]];
    const int hb = hops_[from + unitLocation_[b]];
    if (ha != hb) return ha < hb;
    return natural_less(units_[a].id(), units_[b].id());
  });
  return order;
}

const UnitId& CacheNetwork::nearest_unit(std::string_view loc) const {
  const auto from = location_index(loc) * locations_.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < units_.size(); ++i) {
    const int hi = hops_[from + unitLocation_[i]];
    const int hb = hops_[from + unitLocation_[best]];
    if (hi < hb || (hi == hb && natural_less(units_[i].id(), units_[best].id()))) best = i;
  }
  return units_[best].id();
}

void CacheNetwork::clear_caches() {
  for (auto& u : units_) u = CacheUnit(u.id(), u.location(), u.capacity_gb(), u.eviction_policy());
}

// -- topologies ---------------------------------------------------------------

namespace {

std::vector<LocationId> numbered(std::string_view prefix, std::size_t count) {
  std::vector<LocationId> out;
  out.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) out.push_back(fmt::format("{}-{}", prefix, i));
  return out;
}

std::vector<CacheUnit> numbered_units(std::size_t count, double capacityGB, const EvictionPolicy& policy) {
  std::vector<CacheUnit> units;
  units.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    units.emplace_back(fmt::format("cache-{}", i), fmt::format("site-{}", i), capacityGB, policy);
  }
  return units;
}

}  // namespace

CacheNetwork random_network(const RandomNetworkParams& params, const EvictionPolicy& policy) {
  if (params.unitCount == 0) throw ConfigError("random network needs at least one unit");
  if (!(params.edgeProbability >= 0.0 && params.edgeProbability <= 1.0)) {
    throw ConfigError("edge probability must be in [0, 1]");
  }
  std::mt19937_64 rng(params.seed);
  auto units = numbered_units(params.unitCount, params.capacityGB, policy);
  std::vector<HopEdge> edges;
  // Random spanning tree: each site links to an earlier one.
  for (std::size_t i = 1; i < units.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    edges.push_back({units[i].location(), units[pick(rng)].location(), 1});
  }
  std::bernoulli_distribution extra(params.edgeProbability);
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t j = i + 1; j < units.size(); ++j) {
      if (extra(rng)) edges.push_back({units[i].location(), units[j].location(), 1});
    }
  }
  auto users = numbered("uloc", params.userLocationCount);
  auto servers = numbered("ds", params.dataServerCount);
  std::uniform_int_distribution<std::size_t> anyUnit(0, units.size() - 1);
  for (const auto& loc : users) edges.push_back({loc, units[anyUnit(rng)].location(), 1});
  for (const auto& loc : servers) edges.push_back({loc, units[anyUnit(rng)].location(), 1});
  return CacheNetwork(std::move(units), std::move(users), std::move(servers), edges);
}

CacheNetwork complete_network(std::size_t unitCount, double capacityGB, std::size_t userLocationCount,
                              std::size_t dataServerCount, const EvictionPolicy& policy) {
  auto units = numbered_units(unitCount, capacityGB, policy);
  auto users = numbered("uloc", userLocationCount);
  auto servers = numbered("ds", dataServerCount);
  std::vector<LocationId> all;
  for (const auto& u : units) all.push_back(u.location());
  all.insert(all.end(), users.begin(), users.end());
  all.insert(all.end(), servers.begin(), servers.end());
  std::vector<HopEdge> edges;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) edges.push_back({all[i], all[j], 1});
  }
  return CacheNetwork(std::move(units), std::move(users), std::move(servers), edges);
}

CacheNetwork network_from_json(std::string_view text, const EvictionPolicy& policy) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("network: {}", e.what()));
  }
  try {
    const auto topology = doc.value("topology", std::string("explicit"));
    if (topology == "random") {
      RandomNetworkParams p;
      p.unitCount = doc.value("unitCount", p.unitCount);
      p.edgeProbability = doc.value("edgeProbability", p.edgeProbability);
      p.capacityGB = doc.value("capacityGB", p.capacityGB);
      p.userLocationCount = doc.value("userLocationCount", p.userLocationCount);
      p.dataServerCount = doc.value("dataServerCount", p.dataServerCount);
      p.seed = doc.value("seed", p.seed);
      return random_network(p, policy);
    }
    if (topology == "complete") {
      return complete_network(doc.value("unitCount", std::size_t{20}), doc.value("capacityGB", 100.0),
                              doc.value("userLocationCount", std::size_t{8}),
                              doc.value("dataServerCount", std::size_t{4}), policy);
    }
    if (topology != "explicit") throw ConfigError(fmt::format("network: unknown topology '{}'", topology));

    std::vector<CacheUnit> units;
    for (const auto& u : doc.at("units")) {
      const double capacity = u.at("capacityGB").get<double>();
      units.emplace_back(u.at("id").get<std::string>(), u.at("location").get<std::string>(), capacity, policy);
    }
    std::vector<HopEdge> edges;
    for (const auto& e : doc.value("edges", nlohmann::json::array())) {
      if (!e.is_array() || e.size() != 3) throw ConfigError("network: edges must be [a, b, hops] triples");
      edges.push_back({e[0].get<std::string>(), e[1].get<std::string>(), e[2].get<int>()});
    }
    return CacheNetwork(std::move(units), doc.value("userLocations", std::vector<std::string>{}),
                        doc.value("dataServers", std::vector<std::string>{}), edges);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("network: {}", e.what()));
  }
}

CacheNetwork load_network(const std::string& path, const EvictionPolicy& policy) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open network file {}", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return network_from_json(buf.str(), policy);
}

// -- placement ----------------------------------------------------------------

UnitId greedy_place(double volumeGB, const std::map<LocationId, std::uint64_t>& demand, const CacheNetwork& net) {
  const auto& units = net.units();
  std::optional<std::size_t> best;
  double bestCost = 0.0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].capacity_gb() + 1e-9 < volumeGB) continue;
    double cost = 0.0;
    for (const auto& [loc, count] : demand) cost += static_cast<double>(count) * net.hops_to_unit(loc, i);
    if (!best || cost < bestCost || (cost == bestCost && natural_less(units[i].id(), units[*best].id()))) {
      best = i;
      bestCost = cost;
    }
  }
  if (!best) throw PlacementError(fmt::format("no cache unit can hold {} GB", volumeGB));
  return units[*best].id();
}

UnitId greedy_place(const CachedQuery& fragment, const CacheNetwork& net) {
  return greedy_place(fragment.volumeGB, fragment.freq, net);
}

double transfer_cost(std::size_t deltaN, std::span<const double> volumesGB, double dNet) {
  if (deltaN != volumesGB.size()) {
    throw ContractError(fmt::format("transfer count {} does not match {} volumes", deltaN, volumesGB.size()));
  }
  if (!(dNet > 0.0)) throw ContractError("network cost per GB must be positive");
  if (deltaN == 0) return 0.0;
  const double n = static_cast<double>(deltaN);
  double sum = 0.0;
  for (const double v : volumesGB) sum += n * v * dNet;
  return sum / n;
}

double transfer_cost(const TransferLedger& ledger, double dNet) {
  return transfer_cost(ledger.count(), ledger.volumesGB, dNet);
}

TransferRecord relocate(const CachedQueryId& id, const UnitId& from, const UnitId& to, CacheNetwork& net,
                        TransferLedger& ledger, double perHopTicks, Timestamp now) {
  auto& source = net.unit(from);
  const auto* resident = source.find(id);
  if (resident == nullptr) throw ContractError(fmt::format("{} is not resident at {}", id, from));
  TransferRecord record{id, from, to, resident->volumeGB, 0, 0.0, false, false, {}};
  if (from == to) {
    record.succeeded = true;
    record.noop = true;
    return record;
  }
  auto& target = net.unit(to);
  if (record.volumeGB > target.capacity_gb() + 1e-9) return record;

  auto moving = *source.remove(id);
  auto admitted = target.admit(moving, now);
  if (!admitted.stored) {
    source.admit(std::move(moving), now);
    return record;
  }
  record.hops = net.hops(source.location(), target.location());
  record.transferTicks = record.hops * perHopTicks;
  record.succeeded = true;
  record.evicted = std::move(admitted.evicted);
  ledger.add(record.volumeGB);
  return record;
}

}  // namespace sqf
