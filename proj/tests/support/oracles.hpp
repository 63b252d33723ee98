#pragma once

// Independent reference implementations used to check the library.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "sqf/matching.hpp"
#include "sqf/query_model.hpp"

namespace sqf::testing {

// ---------------------------------------------------------------------------
// Containment search by exhaustive pairing
// ---------------------------------------------------------------------------

struct OracleAnswer {
  std::string cachedQuery;
  std::string unit;
  std::size_t node = 0;
};

struct OracleOutcome {
  /// Probe leaf id -> answer, or nullopt when no node anywhere answers it.
  std::vector<std::pair<std::string, std::optional<OracleAnswer>>> perLeaf;
  SearchStatus status = SearchStatus::NotFound;
};

/// Tries answerable() on every probe leaf against every node of every cached
/// tree and keeps, per leaf, the minimum of (hops, newest use by `userLoc`,
/// id). The answering node is the first in breadth-first order.
inline OracleOutcome brute_force_search(const QueryEvaluationTree& s, std::span<const UnitView> units,
                                        const std::optional<LocationId>& userLoc = std::nullopt) {
  OracleOutcome out;
  std::size_t found = 0;
  for (const QetNode* leaf : leaves(s)) {
    std::optional<OracleAnswer> best;
    std::tuple<int, double, std::string> bestKey;
    for (const auto& view : units) {
      for (const auto& entry : view.unit->entries()) {
        const auto nodes = breadth_first(*entry.expr.root);
        std::optional<std::size_t> first;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          if (answerable(leaf->semantics(), nodes[k]->semantics())) {
            first = k;
            break;
          }
        }
        if (!first) continue;
        double recency = std::numeric_limits<double>::infinity();
        if (userLoc) {
          const auto it = entry.lastUsed.find(*userLoc);
          if (it != entry.lastUsed.end()) recency = -it->second;
        }
        std::tuple<int, double, std::string> key{view.hops, recency, entry.id};
        const bool better = !best || std::get<0>(key) < std::get<0>(bestKey) ||
                            (std::get<0>(key) == std::get<0>(bestKey) &&
                             (std::get<1>(key) < std::get<1>(bestKey) ||
                              (std::get<1>(key) == std::get<1>(bestKey) && natural_less(entry.id, std::get<2>(bestKey)))));
        if (better) {
          best = OracleAnswer{entry.id, view.unit->id(), *first};
          bestKey = key;
        }
      }
    }
    if (best) ++found;
    out.perLeaf.emplace_back(leaf->id(), best);
  }
  out.status = found == out.perLeaf.size() ? SearchStatus::FullyFound
               : found == 0                ? SearchStatus::NotFound
                                           : SearchStatus::PartiallyFound;
  return out;
}

// ---------------------------------------------------------------------------
// Predicate implication by grid enumeration
// ---------------------------------------------------------------------------

inline double as_number(const Constant& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  return std::get<double>(c);
}

inline bool holds(const Predicate& p, double x) {
  const double c = as_number(std::get<Constant>(p.right));
  switch (p.op) {
    case Comparator::Eq: return x == c;
    case Comparator::Ne: return x != c;
    case Comparator::Lt: return x < c;
    case Comparator::Le: return x <= c;
    case Comparator::Gt: return x > c;
    case Comparator::Ge: return x >= c;
  }
  return false;
}

/// Half-integer grid covering integer constants in [-range, range] plus two
/// far points. Between neighbouring constants every selection is constant,
/// so checking every grid point decides implication over the reals.
inline std::vector<double> implication_grid(int range) {
  std::vector<double> grid{-1e6, 1e6};
  for (int k = -2 * (range + 3); k <= 2 * (range + 3); ++k) grid.push_back(k * 0.5);
  return grid;
}

/// Numeric selections on one attribute: does every grid point satisfying all
/// premises satisfy the conclusion?
inline bool grid_implies(std::span<const Predicate> premises, const Predicate& conclusion, int range) {
  for (double x : implication_grid(range)) {
    bool ok = true;
    for (const auto& p : premises) {
      if (p.left == conclusion.left && !holds(p, x)) {
        ok = false;
        break;
      }
    }
    if (ok && !holds(conclusion, x)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Access-log counting
// ---------------------------------------------------------------------------

/// One scripted access: which root children of an object it touched.
struct LoggedAccess {
  std::string userLoc;
  std::vector<std::size_t> children;
};

/// Per root child, the accesses that touched it without touching every child.
inline std::vector<std::size_t> independent_hits(const std::vector<LoggedAccess>& log, std::size_t childCount) {
  std::vector<std::size_t> hits(childCount, 0);
  for (const auto& a : log) {
    std::vector<bool> touched(childCount, false);
    for (auto c : a.children) touched[c] = true;
    bool all = true;
    for (bool t : touched) all = all && t;
    if (all) continue;
    for (std::size_t c = 0; c < childCount; ++c) hits[c] += touched[c] ? 1 : 0;
  }
  return hits;
}

}  // namespace sqf::testing
