#include "sqf/matching.hpp"

#include <algorithm>
#include <limits>

#include "sqf/errors.hpp"
#include "sqf/placement.hpp"

namespace sqf {

namespace {

bool subset(std::uint64_t inner, std::uint64_t outer) { return (inner & ~outer) == 0; }

/// Necessary condition for answerable(s, t) on hashed signatures.
bool may_answer(const NodeSignature& s, const NodeSignature& t) {
  return subset(s.relations, t.relations) && subset(s.attributes, t.attributes) &&
         subset(t.predicateAttributes, s.predicateAttributes);
}

template <typename T>
bool includes(const std::vector<T>& outer, const std::vector<T>& inner) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

bool answerable_normalized(const SemanticDescriptor& s, const SemanticDescriptor& t) {
  if (!includes(t.relations, s.relations) || !includes(t.attributes, s.attributes)) return false;
  for (const auto& p : s.predicates) {
    // A condition t already enforces need not be re-applied to t's result.
    if (implies(t.predicates, p)) continue;
    if (!std::binary_search(t.attributes.begin(), t.attributes.end(), p.left)) return false;
    if (p.is_join()) {
      const auto& rhs = std::get<AttributeRef>(p.right);
      if (!std::binary_search(t.attributes.begin(), t.attributes.end(), rhs)) return false;
    }
  }
  return std::all_of(t.predicates.begin(), t.predicates.end(),
                     [&](const Predicate& p) { return implies(s.predicates, p); });
}

bool node_answers(const QetNode& probe, const QetNode& node) {
  return may_answer(probe.signature(), node.signature()) && answerable_normalized(probe.semantics(), node.semantics());
}

struct Candidate {
  const CachedQuery* entry = nullptr;
  const CacheUnit* unit = nullptr;
  std::size_t node = 0;
  int hops = 0;
  std::optional<Timestamp> recency;
};

/// Preference within one hop group: most recent use, then lowest id.
bool better(const Candidate& a, const Candidate& b) {
  if (a.recency != b.recency) {
    if (!b.recency) return true;
    if (!a.recency) return false;
    return *a.recency > *b.recency;
  }
  return natural_less(a.entry->id, b.entry->id);
}

}  // namespace

bool answerable(const SemanticDescriptor& s, const SemanticDescriptor& t) {
  if (!is_normalized(s) || !is_normalized(t)) throw ContractError("answerable requires normalised descriptors");
  return answerable_normalized(s, t);
}

bool equivalent_query(const QueryEvaluationTree& s, const QueryEvaluationTree& t) {
  return same_semantics(s.root->semantics(), t.root->semantics());
}

std::optional<std::size_t> is_contained(const QueryEvaluationTree& s, const QueryEvaluationTree& t) {
  if (equivalent_query(s, t)) return 0;
  const auto nodes = breadth_first(*t.root);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (node_answers(*s.root, *nodes[i])) return i;
  }
  return std::nullopt;
}

std::string_view to_string(SearchStatus status) {
  switch (status) {
    case SearchStatus::FullyFound: return "fully_found";
    case SearchStatus::PartiallyFound: return "partially_found";
    case SearchStatus::NotFound: return "not_found";
  }
  return "?";
}

SearchOutcome search_cache(const QueryEvaluationTree& s, std::span<const UnitView> units,
                           const std::optional<LocationId>& userLoc) {
  const auto probe = leaves(s);
  std::vector<std::optional<Candidate>> answer(probe.size());
  std::size_t open = probe.size();
  std::vector<const QetNode*> nodes;

  for (std::size_t g = 0; g < units.size() && open > 0;) {
    const int groupHops = units[g].hops;
    std::vector<std::optional<Candidate>> best(probe.size());
    for (; g < units.size() && units[g].hops == groupHops; ++g) {
      const CacheUnit& unit = *units[g].unit;
      for (const auto& entry : unit.entries()) {
        nodes.clear();
        bool walked = false;
        for (std::size_t i = 0; i < probe.size(); ++i) {
          if (answer[i]) continue;
          if (!walked) {
            nodes = breadth_first(*entry.expr.root);
            walked = true;
          }
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (!node_answers(*probe[i], *nodes[k])) continue;
            Candidate c{&entry, &unit, k, groupHops, userLoc ? entry.last_used_by(*userLoc) : std::nullopt};
            if (!best[i] || better(c, *best[i])) best[i] = c;
            break;
          }
        }
      }
    }
    for (std::size_t i = 0; i < probe.size(); ++i) {
      if (!answer[i] && best[i]) {
        answer[i] = best[i];
        --open;
      }
    }
  }

  SearchOutcome out;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    if (answer[i]) {
      const auto& c = *answer[i];
      out.contained.push_back({probe[i]->id(), c.entry->id, c.node, c.unit->id(), c.hops, probe[i]->volume()});
    } else {
      out.remainder.push_back(probe[i]->id());
    }
  }
  out.status = out.remainder.empty()   ? SearchStatus::FullyFound
               : out.contained.empty() ? SearchStatus::NotFound
                                       : SearchStatus::PartiallyFound;
  return out;
}

SearchOutcome search_cache(const QueryEvaluationTree& s, std::span<const CacheUnit> units) {
  std::vector<UnitView> views;
  views.reserve(units.size());
  for (const auto& u : units) views.push_back({&u, 0});
  std::sort(views.begin(), views.end(),
            [](const UnitView& a, const UnitView& b) { return natural_less(a.unit->id(), b.unit->id()); });
  return search_cache(s, views);
}

SearchOutcome search_cache(const QueryEvaluationTree& s, const CacheNetwork& net, const LocationId& userLoc) {
  std::vector<UnitView> views;
  for (const auto idx : net.units_by_distance(userLoc)) {
    views.push_back({&net.units()[idx], net.hops_to_unit(userLoc, idx)});
  }
  return search_cache(s, views, userLoc);
}

}  // namespace sqf
