#include <doctest.h>

#include <algorithm>
#include <set>

#include "generators.hpp"
#include "oracles.hpp"
#include "property.hpp"
#include "sqf/matching.hpp"

using namespace sqf;
using namespace sqf::testing;

namespace {

/// Random cache of up to ten entries over `universe`, spread over one to
/// three units at random hop distances, with some recorded uses.
struct RandomCache {
  std::vector<CacheUnit> units;
  std::vector<UnitView> views;

  RandomCache(Rng& rng, const std::vector<NodePtr>& universe) {
    const int unitCount = uniform_int(rng, 1, 3);
    for (int u = 1; u <= unitCount; ++u) {
      units.emplace_back("cache-" + std::to_string(u), "site-" + std::to_string(u), 1000.0);
    }
    const int entries = uniform_int(rng, 0, 10);
    double ts = 0;
    for (int e = 1; e <= entries; ++e) {
      auto& unit = units[static_cast<std::size_t>(uniform_int(rng, 0, unitCount - 1))];
      const auto count = static_cast<std::size_t>(uniform_int(rng, 1, 4));
      const auto id = "c" + std::to_string(e);
      unit.admit(make_cached_query(id, random_query(rng, universe, count, 3, id), unit.id()), ts);
      if (coin(rng, 0.4)) unit.record_access(id, pick(rng, std::vector<std::string>{"uloc-1", "uloc-2"}), ++ts, {});
    }
    for (const auto& u : units) views.push_back({&u, uniform_int(rng, 0, 2)});
    std::stable_sort(views.begin(), views.end(), [](const UnitView& a, const UnitView& b) { return a.hops < b.hops; });
  }
};

/// A descriptor that `s` can be answered from: wider projection, possibly
/// more relations, a subset of s's predicates with loosened constants.
SemanticDescriptor weaken(const SemanticDescriptor& s, Rng& rng, const Schema& schema = {}) {
  SemanticDescriptor t;
  t.relations = s.relations;
  if (coin(rng, 0.3)) t.relations.push_back({"r" + std::to_string(uniform_int(rng, 1, schema.relations)), "db"});
  t.attributes = s.attributes;
  for (const auto& p : s.predicates) {
    t.attributes.push_back(p.left);
    if (p.is_join()) t.attributes.push_back(std::get<AttributeRef>(p.right));
  }
  if (coin(rng, 0.3)) {
    const auto& r = pick(rng, t.relations);
    t.attributes.push_back({r.name, "a" + std::to_string(uniform_int(rng, 0, schema.attributes - 1))});
  }
  for (auto p : s.predicates) {
    if (coin(rng, 0.4)) continue;
    if (!p.is_join()) {
      const double c = as_number(std::get<Constant>(p.right));
      const double slack = uniform_int(rng, 0, 3);
      switch (p.op) {
        case Comparator::Lt:
        case Comparator::Le: p.right = Constant{c + slack}; break;
        case Comparator::Gt:
        case Comparator::Ge: p.right = Constant{c - slack}; break;
        case Comparator::Eq:
          if (coin(rng)) p.op = coin(rng) ? Comparator::Le : Comparator::Ge;
          break;
        case Comparator::Ne: break;
      }
    }
    t.predicates.push_back(p);
  }
  return normalize(std::move(t));
}

std::set<std::string> leaf_ids(const QueryEvaluationTree& t) {
  std::set<std::string> out;
  for (const auto* l : leaves(t)) out.insert(l->id());
  return out;
}

}  // namespace

TEST_CASE("search_cache agrees with the exhaustive oracle") {
  for_all(11, [](Rng& rng, int) {
    const auto universe = random_universe(rng, 8);
    RandomCache cache(rng, universe);
    const auto s = random_query(rng, universe, static_cast<std::size_t>(uniform_int(rng, 1, 5)), 3);
    const std::string userLoc = coin(rng) ? "uloc-1" : "uloc-2";
    const auto got = search_cache(s, cache.views, userLoc);
    const auto want = brute_force_search(s, cache.views, userLoc);

    CHECK(got.status == want.status);
    std::size_t c = 0;
    std::vector<std::string> remainder;
    for (const auto& [leaf, answer] : want.perLeaf) {
      if (!answer) {
        remainder.push_back(leaf);
        continue;
      }
      REQUIRE(c < got.contained.size());
      const auto& part = got.contained[c++];
      CHECK(part.subQuery == leaf);
      CHECK(part.cachedQuery == answer->cachedQuery);
      CHECK(part.unit == answer->unit);
      CHECK(part.node == answer->node);
    }
    CHECK(c == got.contained.size());
    CHECK(got.remainder == remainder);
  });
}

TEST_CASE("contained and remainder partition the probe leaves") {
  for_all(12, [](Rng& rng, int) {
    const auto universe = random_universe(rng, 8);
    RandomCache cache(rng, universe);
    const auto s = random_query(rng, universe, static_cast<std::size_t>(uniform_int(rng, 1, 6)), 3);
    const auto out = search_cache(s, cache.views, "uloc-1");
    std::vector<std::string> joined;
    for (const auto& p : out.contained) joined.push_back(p.subQuery);
    for (const auto& r : out.remainder) joined.push_back(r);
    std::set<std::string> unique(joined.begin(), joined.end());
    CHECK(unique.size() == joined.size());
    CHECK(unique == leaf_ids(s));
    const auto expected = out.remainder.empty()       ? SearchStatus::FullyFound
                          : out.contained.empty()     ? SearchStatus::NotFound
                                                      : SearchStatus::PartiallyFound;
    CHECK(out.status == expected);
  });
}

TEST_CASE("adding cached entries never grows the remainder") {
  for_all(13, [](Rng& rng, int) {
    const auto universe = random_universe(rng, 8);
    CacheUnit unit("cache-1", "site-1", 1000.0);
    const auto s = random_query(rng, universe, static_cast<std::size_t>(uniform_int(rng, 1, 5)), 3);
    auto before = search_cache(s, std::span<const CacheUnit>(&unit, 1)).remainder;
    for (int e = 1; e <= 5; ++e) {
      const auto id = "c" + std::to_string(e);
      unit.admit(make_cached_query(id, random_query(rng, universe, 2, 2, id), unit.id()), 0);
      const auto after = search_cache(s, std::span<const CacheUnit>(&unit, 1)).remainder;
      std::set<std::string> b(before.begin(), before.end());
      for (const auto& r : after) CHECK(b.count(r) == 1);
      before = after;
    }
  });
}

TEST_CASE("answerable is reflexive") {
  for_all(14, [](Rng& rng, int) {
    const auto d = random_descriptor(rng);
    CHECK(answerable(d, d));
  });
}

TEST_CASE("answerable holds against weakened descriptors and is transitive") {
  for_all(15, [](Rng& rng, int) {
    const auto s = random_descriptor(rng);
    const auto t = weaken(s, rng);
    const auto u = weaken(t, rng);
    CHECK(answerable(s, t));
    CHECK(answerable(t, u));
    CHECK(answerable(s, u));

    // Arbitrary triples: whenever the premise holds so must the conclusion.
    const auto a = random_descriptor(rng);
    const auto b = coin(rng) ? weaken(a, rng) : random_descriptor(rng);
    const auto c = coin(rng) ? weaken(b, rng) : random_descriptor(rng);
    if (answerable(a, b) && answerable(b, c)) CHECK(answerable(a, c));
  });
}

TEST_CASE("equivalent_query is an equivalence relation") {
  for_all(16, [](Rng& rng, int) {
    Schema tiny{2, 2, 1};
    std::vector<SemanticDescriptor> pool;
    for (int i = 0; i < 3; ++i) pool.push_back(random_descriptor(rng, tiny));
    auto make = [&](const std::string& id) {
      const auto& d = pick(rng, pool);
      if (coin(rng)) return tree(id, QetNode::leaf(id + "x", normalize(shuffled(d, rng))));
      return tree(id, par({QetNode::leaf(id + "x", d), QetNode::leaf(id + "y", pick(rng, pool))}));
    };
    const auto a = make("A");
    const auto b = make("B");
    const auto c = make("C");
    CHECK(equivalent_query(a, a));
    CHECK(equivalent_query(a, b) == equivalent_query(b, a));
    if (equivalent_query(a, b) && equivalent_query(b, c)) CHECK(equivalent_query(a, c));
    if (equivalent_query(a, b)) CHECK(is_contained(a, b) == std::optional<std::size_t>(0));
  });
}

TEST_CASE("selection implication agrees with grid enumeration") {
  for_all(17, [](Rng& rng, int) {
    constexpr int range = 5;
    const AttributeRef x{"r1", "a0"};
    const AttributeRef y{"r1", "a1"};
    std::vector<Predicate> premises;
    const int n = uniform_int(rng, 0, 3);
    for (int i = 0; i < n; ++i) premises.push_back(random_selection(rng, x, range));
    if (coin(rng, 0.3)) premises.push_back(random_selection(rng, y, range));
    std::shuffle(premises.begin(), premises.end(), rng);
    const auto conclusion = random_selection(rng, x, range);
    CAPTURE(conclusion.str());
    CHECK(implies(premises, conclusion) == grid_implies(premises, conclusion, range));
  });
}
