#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqf/ids.hpp"
#include "sqf/query_model.hpp"

namespace sqf {

/// Usage gathered since the last maintenance pass.
struct WindowStats {
  std::map<LocationId, std::uint64_t> freq;
  std::map<CachedQueryId, std::uint64_t> coQueried;
  /// Per child of the root: accesses that touched that child but not every
  /// child of the root.
  std::vector<std::uint64_t> independentChildHits;
  /// Per child of the root: accesses by location that touched the child.
  std::vector<std::map<LocationId, std::uint64_t>> childDemand;

  std::uint64_t accesses() const;
};

/// A cached sub-query object: expression, cache location, volume,
/// complexity, per-location last use and frequency, and the multiset of
/// cached queries it was used together with.
struct CachedQuery {
  CachedQueryId id;
  QueryEvaluationTree expr;
  UnitId cloc;
  double volumeGB = 0.0;
  std::size_t complexity = 0;
  std::map<LocationId, Timestamp> lastUsed;
  std::map<LocationId, std::uint64_t> freq;
  std::map<CachedQueryId, std::uint64_t> coQueried;

  WindowStats window;
  bool evictionCandidate = false;
  /// Root-child index for every node in breadth-first order (npos for the root).
  std::vector<std::size_t> rootChildOf;

  std::uint64_t total_frequency() const;
  std::optional<Timestamp> last_used_by(const LocationId& loc) const;
  std::optional<Timestamp> most_recent_use() const;
};

/// Wraps a tree as a fresh cached object; volume and complexity come from the tree.
CachedQuery make_cached_query(CachedQueryId id, QueryEvaluationTree expr, UnitId cloc);

/// Records one access from `userLoc` at `ts`. `touchedNodes` are the
/// breadth-first indices of nodes that answered parts of the user query.
/// Throws ClockError when `ts` precedes a stored timestamp.
void apply_access(CachedQuery& c, const LocationId& userLoc, Timestamp ts,
                  std::span<const CachedQueryId> companions, std::span<const std::size_t> touchedNodes = {});

/// Value form of apply_access.
CachedQuery record_access(CachedQuery c, const LocationId& userLoc, Timestamp ts,
                          std::span<const CachedQueryId> companions, std::span<const std::size_t> touchedNodes = {});

/// LFU with aging: Σ_loc freq[loc] · decay^((now − lastUsed[loc]) / epochTicks).
struct EvictionPolicy {
  double decay = 0.9;
  double epochTicks = 1.0;
};

double eviction_score(const CachedQuery& c, Timestamp now, const EvictionPolicy& policy);

struct AdmissionResult {
  bool stored = false;
  std::vector<CachedQuery> evicted;
};

enum class ActionKind : std::uint8_t { Fragment, Aggregate, Evict, Relocate };

std::string_view to_string(ActionKind kind);

struct MaintenanceAction {
  ActionKind kind;
  /// Objects consumed (Fragment, Aggregate) or affected (Evict, Relocate).
  std::vector<CachedQueryId> sources;
  /// Objects produced by Fragment or Aggregate.
  std::vector<CachedQueryId> results;
  /// Relocate only: the location with the most demand in the window, the
  /// unit nearest to it and the window demand by location.
  LocationId demandLocation;
  UnitId target;
  std::map<LocationId, std::uint64_t> demand;
};

struct MaintenanceParams {
  Timestamp windowStart = 0.0;
  Timestamp windowEnd = 0.0;
  std::uint64_t thetaFreq = 5;
  std::uint64_t thetaAssoc = 5;
};

using NearestUnitFn = std::function<UnitId(const LocationId&)>;

/// Bounded store of cached queries at one location.
class CacheUnit {
 public:
  CacheUnit(UnitId id, LocationId location, double capacityGB, EvictionPolicy policy = {});

  const UnitId& id() const noexcept { return id_; }
  const LocationId& location() const noexcept { return location_; }
  double capacity_gb() const noexcept { return capacityGB_; }
  double used_gb() const noexcept { return usedGB_; }
  const EvictionPolicy& eviction_policy() const noexcept { return policy_; }
  const std::vector<CachedQuery>& entries() const noexcept { return entries_; }

  const CachedQuery* find(const CachedQueryId& id) const;

  /// Stores `c`, evicting eviction candidates first and then the lowest
  /// scores until it fits. Entries listed in `pinned` are never evicted.
  /// Throws OversizeError when `c` is larger than the unit.
  AdmissionResult admit(CachedQuery c, Timestamp now, std::span<const CachedQueryId> pinned = {});

  std::optional<CachedQuery> remove(const CachedQueryId& id);

  void record_access(const CachedQueryId& id, const LocationId& userLoc, Timestamp ts,
                     std::span<const CachedQueryId> companions, std::span<const std::size_t> touchedNodes = {});

  /// Fragments independently hot parts, marks unused entries as eviction
  /// candidates, aggregates co-queried pairs and proposes relocations, then
  /// starts a new window. Fragment and Aggregate are applied in place; Evict
  /// marks candidates; Relocate is only proposed. `nearestUnit` may be empty,
  /// in which case no relocation is proposed.
  std::vector<MaintenanceAction> maintenance_pass(const MaintenanceParams& params, IdAllocator& ids,
                                                  const NearestUnitFn& nearestUnit = {});

  /// Unpinned entries in eviction order at `now`: candidates first, then by
  /// ascending score, ties by id.
  std::vector<CachedQueryId> eviction_order(Timestamp now, std::span<const CachedQueryId> pinned = {}) const;

 private:
  std::vector<CachedQuery>::iterator locate(const CachedQueryId& id);

  UnitId id_;
  LocationId location_;
  double capacityGB_;
  double usedGB_ = 0.0;
  EvictionPolicy policy_;
  std::vector<CachedQuery> entries_;
};

/// Σ over distinct leaf sub-queries of (copies − 1) × leaf volume.
double duplication_overhead(const CacheUnit& u);
/// Same count over the union of several units.
double duplication_overhead(std::span<const CacheUnit> units);

// ---------------------------------------------------------------------------
// Cache state dump
// ---------------------------------------------------------------------------

/// One dumped cached query. Maps are kept as ordered pairs so that dumps
/// written by hand keep their field order.
struct CacheDumpRecord {
  CachedQueryId id;
  std::string expr;
  UnitId cloc;
  double volumeGB = 0.0;
  std::size_t complexity = 0;
  std::vector<std::pair<LocationId, Timestamp>> lastUsed;
  std::vector<std::pair<LocationId, std::uint64_t>> freq;
  std::vector<std::pair<CachedQueryId, std::uint64_t>> coQueried;
};

/// Header `sqf-cache-dump 1`, a column line, then one `|`-separated record
/// per cached query: id|expr|cloc|volume_gb|complexity|last_used|freq|co_queried
/// where map fields are `key:value` pairs joined by `,`.
std::string write_cache_dump(std::span<const CacheUnit> units);
std::string write_cache_dump(std::span<const CacheDumpRecord> records);
CacheDumpRecord to_dump_record(const CachedQuery& c);

/// Throws LoadError naming the offending record index.
std::vector<CacheDumpRecord> read_cache_dump(std::string_view text);

}  // namespace sqf
