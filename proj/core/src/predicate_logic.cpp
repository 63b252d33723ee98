#include <algorithm>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sqf/matching.hpp"

namespace sqf {

namespace {

/// Values an attribute may take under a conjunction of selections: an
/// interval with optional bounds plus excluded points.
template <typename V>
struct ValueSet {
  std::optional<V> lo;
  bool loOpen = false;
  std::optional<V> hi;
  bool hiOpen = false;
  std::vector<V> excluded;

  void restrict(Comparator op, const V& c) {
    auto raiseLo = [&](bool open) {
      if (!lo || c > *lo || (c == *lo && open)) {
        lo = c;
        loOpen = open;
      }
    };
    auto lowerHi = [&](bool open) {
      if (!hi || c < *hi || (c == *hi && open)) {
        hi = c;
        hiOpen = open;
      }
    };
    switch (op) {
      case Comparator::Eq: raiseLo(false); lowerHi(false); break;
      case Comparator::Ne: excluded.push_back(c); break;
      case Comparator::Lt: lowerHi(true); break;
      case Comparator::Le: lowerHi(false); break;
      case Comparator::Gt: raiseLo(true); break;
      case Comparator::Ge: raiseLo(false); break;
    }
  }

  bool is_excluded(const V& v) const { return std::find(excluded.begin(), excluded.end(), v) != excluded.end(); }

  /// Turns excluded closed endpoints into open ones; returns false when empty.
  bool settle() {
    if (lo && !loOpen && is_excluded(*lo)) loOpen = true;
    if (hi && !hiOpen && is_excluded(*hi)) hiOpen = true;
    if (lo && hi) {
      if (*lo > *hi) return false;
      if (*lo == *hi && (loOpen || hiOpen)) return false;
    }
    return true;
  }

  /// Every member satisfies `x op c`. Assumes settle() returned true.
  bool within(Comparator op, const V& c) const {
    switch (op) {
      case Comparator::Eq: return lo && hi && *lo == c && *hi == c;
      case Comparator::Ne:
        return is_excluded(c) || (lo && (c < *lo || (c == *lo && loOpen))) || (hi && (c > *hi || (c == *hi && hiOpen)));
      case Comparator::Lt: return hi && (*hi < c || (*hi == c && hiOpen));
      case Comparator::Le: return hi && *hi <= c;
      case Comparator::Gt: return lo && (*lo > c || (*lo == c && loOpen));
      case Comparator::Ge: return lo && *lo >= c;
    }
    return false;
  }
};

std::optional<double> numeric(const Constant& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  return std::nullopt;
}

template <typename V, typename Extract>
bool implied_selection(std::span<const Predicate> premises, const Predicate& conclusion, const V& bound,
                       Extract extract) {
  ValueSet<V> set;
  bool constrained = false;
  for (const auto& p : premises) {
    if (p.is_join() || p.left != conclusion.left) continue;
    const auto value = extract(std::get<Constant>(p.right));
    if (!value) continue;
    set.restrict(p.op, *value);
    constrained = true;
  }
  if (!constrained) return false;
  if (!set.settle()) return true;
  return set.within(conclusion.op, bound);
}

}  // namespace

bool implies(std::span<const Predicate> premises, const Predicate& conclusion) {
  if (std::find(premises.begin(), premises.end(), conclusion) != premises.end()) return true;
  if (conclusion.is_join()) return false;
  const auto& bound = std::get<Constant>(conclusion.right);
  if (const auto number = numeric(bound)) {
    return implied_selection<double>(premises, conclusion, *number, numeric);
  }
  const auto text = std::get<std::string>(bound);
  return implied_selection<std::string>(premises, conclusion, text, [](const Constant& c) -> std::optional<std::string> {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    return std::nullopt;
  });
}

}  // namespace sqf
