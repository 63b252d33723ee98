#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sqf/cache_unit.hpp"
#include "sqf/ids.hpp"
#include "sqf/query_model.hpp"

namespace sqf {

class CacheNetwork;

/// True when every value satisfying the conjunction `premises` also
/// satisfies `conclusion`. Selections are compared as intervals over numbers
/// or strings; joins imply only themselves.
bool implies(std::span<const Predicate> premises, const Predicate& conclusion);

/// Whether `t`'s result can answer `s`: t covers s's relations and projected
/// attributes, projects the attributes of every s predicate it does not
/// already enforce, and every predicate of t is implied by s's predicates.
/// Throws ContractError on unnormalised input.
bool answerable(const SemanticDescriptor& s, const SemanticDescriptor& t);

/// Root descriptors describe the same relations, attributes and predicates.
bool equivalent_query(const QueryEvaluationTree& s, const QueryEvaluationTree& t);

/// Breadth-first index of the first node of `t` able to answer the root of
/// `s`; 0 when the trees are equivalent.
std::optional<std::size_t> is_contained(const QueryEvaluationTree& s, const QueryEvaluationTree& t);

enum class SearchStatus : std::uint8_t { FullyFound, PartiallyFound, NotFound };

std::string_view to_string(SearchStatus status);

/// One leaf of the probe answered from cache.
struct ContainedPart {
  std::string subQuery;
  CachedQueryId cachedQuery;
  /// Breadth-first index of the answering node inside the cached tree.
  std::size_t node = 0;
  UnitId unit;
  int hops = 0;
  double volumeGB = 0.0;
};

struct SearchOutcome {
  /// In probe leaf order.
  std::vector<ContainedPart> contained;
  /// Leaf ids of the probe not found, in leaf order.
  std::vector<std::string> remainder;
  SearchStatus status = SearchStatus::NotFound;
};

/// A unit as seen from the requesting location.
struct UnitView {
  const CacheUnit* unit = nullptr;
  int hops = 0;
};

/// Leaf-by-leaf containment search. Units are visited in the given order,
/// which must be sorted by hops; the search stops after the first hop group
/// that leaves nothing unanswered. Within a group each leaf goes to the
/// answering object with the most recent use by `userLoc`, then the lowest id.
SearchOutcome search_cache(const QueryEvaluationTree& s, std::span<const UnitView> units,
                           const std::optional<LocationId>& userLoc = std::nullopt);

/// Searches `units` as if all were zero hops away, in natural id order.
SearchOutcome search_cache(const QueryEvaluationTree& s, std::span<const CacheUnit> units);

/// Searches every unit of `net` ordered by hops from `userLoc`.
SearchOutcome search_cache(const QueryEvaluationTree& s, const CacheNetwork& net, const LocationId& userLoc);

}  // namespace sqf
