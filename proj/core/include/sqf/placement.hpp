#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sqf/cache_unit.hpp"
#include "sqf/ids.hpp"

namespace sqf {

/// One undirected link between two locations.
struct HopEdge {
  LocationId a;
  LocationId b;
  int hops = 1;
};

/// Cache units, user locations and data servers with all-pairs hop counts.
class CacheNetwork {
 public:
  CacheNetwork() = default;
  /// Hop counts are shortest paths over `edges`. Throws ConfigError when a
  /// location is unknown, duplicated or unreachable.
  CacheNetwork(std::vector<CacheUnit> units, std::vector<LocationId> userLocations,
               std::vector<LocationId> dataServers, const std::vector<HopEdge>& edges);

  std::vector<CacheUnit>& units() noexcept { return units_; }
  const std::vector<CacheUnit>& units() const noexcept { return units_; }
  const std::vector<LocationId>& user_locations() const noexcept { return userLocations_; }
  const std::vector<LocationId>& data_servers() const noexcept { return dataServers_; }
  /// Every known location: unit locations, user locations, data servers.
  const std::vector<LocationId>& locations() const noexcept { return locations_; }

  bool has_location(std::string_view loc) const;
  int hops(std::string_view a, std::string_view b) const;
  /// Hops from a location to the location of a unit.
  int hops_to_unit(std::string_view loc, std::size_t unitIndex) const;

  std::size_t unit_index(std::string_view unitId) const;
  CacheUnit& unit(std::string_view unitId);
  const CacheUnit& unit(std::string_view unitId) const;

  /// Unit with the fewest hops from `loc`, ties by natural id order.
  const UnitId& nearest_unit(std::string_view loc) const;
  /// Unit indices sorted by hops from `loc`, ties by natural id order.
  std::vector<std::size_t> units_by_distance(std::string_view loc) const;

  /// Empties every unit, keeping topology and capacities.
  void clear_caches();

 private:
  std::size_t location_index(std::string_view loc) const;

  std::vector<CacheUnit> units_;
  std::vector<LocationId> userLocations_;
  std::vector<LocationId> dataServers_;
  std::vector<LocationId> locations_;
  std::unordered_map<std::string, std::size_t> locationIndex_;
  std::unordered_map<std::string, std::size_t> unitIndex_;
  std::vector<std::size_t> unitLocation_;
  std::vector<int> hops_;
};

/// Parameters of the seeded random topology: units on distinct sites joined
/// by a random spanning tree plus extra edges with probability
/// `edgeProbability`; every user location and data server hangs off a random
/// unit at one hop.
struct RandomNetworkParams {
  std::size_t unitCount = 20;
  double edgeProbability = 0.15;
  double capacityGB = 100.0;
  std::size_t userLocationCount = 8;
  std::size_t dataServerCount = 4;
  std::uint64_t seed = 1;
};

CacheNetwork random_network(const RandomNetworkParams& params, const EvictionPolicy& policy = {});

/// All locations pairwise one hop apart.
CacheNetwork complete_network(std::size_t unitCount, double capacityGB, std::size_t userLocationCount,
                              std::size_t dataServerCount, const EvictionPolicy& policy = {});

/// JSON network description. Either `"topology": "explicit"` with `units`,
/// `userLocations`, `dataServers` and `edges` ([a, b, hops] triples), or
/// `"topology": "random"` / `"complete"` with the generator parameters.
CacheNetwork network_from_json(std::string_view text, const EvictionPolicy& policy = {});
CacheNetwork load_network(const std::string& path, const EvictionPolicy& policy = {});

/// Unit minimising Σ demand[loc] × hops(loc, unit) over units whose capacity
/// can hold `volumeGB`; ties by natural id order. Throws PlacementError when
/// no unit is large enough.
UnitId greedy_place(double volumeGB, const std::map<LocationId, std::uint64_t>& demand, const CacheNetwork& net);
UnitId greedy_place(const CachedQuery& fragment, const CacheNetwork& net);

/// Volumes of the inter-cache transfers of one epoch.
struct TransferLedger {
  std::vector<double> volumesGB;

  std::size_t count() const noexcept { return volumesGB.size(); }
  void add(double volumeGB) { volumesGB.push_back(volumeGB); }
  void clear() noexcept { volumesGB.clear(); }
};

/// (1/δn) Σ δn · v_i · d_net, evaluated term by term; 0 when δn is 0.
/// Throws ContractError when δn differs from the number of volumes or
/// d_net is not positive.
double transfer_cost(std::size_t deltaN, std::span<const double> volumesGB, double dNet);
double transfer_cost(const TransferLedger& ledger, double dNet);

struct TransferRecord {
  CachedQueryId object;
  UnitId from;
  UnitId to;
  double volumeGB = 0.0;
  int hops = 0;
  /// Inter-cache transfer time: hops × per-hop ticks.
  double transferTicks = 0.0;
  bool succeeded = false;
  bool noop = false;
  std::vector<CachedQuery> evicted;
};

/// Moves a cached object between units, evicting at the destination if
/// needed. A successful move is appended to `ledger`. When the destination
/// cannot make room the object stays put and the record is marked failed.
/// Throws ContractError when the object is not resident at `from`.
TransferRecord relocate(const CachedQueryId& id, const UnitId& from, const UnitId& to, CacheNetwork& net,
                        TransferLedger& ledger, double perHopTicks, Timestamp now);

}  // namespace sqf
