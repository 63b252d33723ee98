#include <doctest.h>

#include <chrono>

#include "generators.hpp"
#include "sqf/errors.hpp"
#include "sqf/matching.hpp"
#include "sqf/placement.hpp"
#include "sqf/plan_format.hpp"

using namespace sqf;
using namespace sqf::testing;

namespace {

QueryEvaluationTree load_plan(const std::string& name) { return parse_plan(read_file(data_path(name))); }

const SemanticDescriptor& leaf_semantics(const QueryEvaluationTree& t, const std::string& id) {
  for (const auto* l : leaves(t)) {
    if (l->id() == id) return l->semantics();
  }
  FAIL("no leaf " << id);
  throw std::logic_error("unreachable");
}

struct WorkedExample {
  std::vector<NodePtr> q;
  CacheUnit unit{"cache-1", "site-1", 100.0};

  WorkedExample() {
    for (int i = 0; i <= 9; ++i) q.push_back(simple_leaf("q" + std::to_string(i)));
    unit.admit(make_cached_query("T1", tree("T1", seq({par({q[1], q[2]}), q[3]})), "cache-1"), 0);
    unit.admit(make_cached_query("T2", tree("T2", par({q[4], q[5], q[6]})), "cache-1"), 0);
    unit.admit(make_cached_query("T3", tree("T3", par({q[6], q[9]})), "cache-1"), 0);
  }

  SearchOutcome search(const QueryEvaluationTree& s) const { return search_cache(s, std::span<const CacheUnit>(&unit, 1)); }
};

Predicate pred(const char* text) { return parse_predicate(text); }

}  // namespace

TEST_CASE("q22 is answerable by q12") {
  const auto q1 = load_plan("q1_plan1.plan");
  const auto q2 = load_plan("q2.plan");
  CHECK(answerable(leaf_semantics(q2, "q22"), leaf_semantics(q1, "q12")));
}

TEST_CASE("q21 is not answerable by any sub-query of Q1") {
  const auto q1 = load_plan("q1_plan1.plan");
  const auto q2 = load_plan("q2.plan");
  const auto& q21 = leaf_semantics(q2, "q21");
  for (const auto* node : breadth_first(*q1.root)) CHECK_FALSE(answerable(q21, node->semantics()));
}

TEST_CASE("answerable is reflexive on the example sub-queries") {
  for (const auto& name : {"q1_plan1.plan", "q1_plan2.plan", "q2.plan", "q3.plan", "q4.plan"}) {
    const auto plan = load_plan(name);
    for (const auto* node : breadth_first(*plan.root)) CHECK(answerable(node->semantics(), node->semantics()));
  }
}

TEST_CASE("a tighter range is answered by a looser one") {
  SemanticDescriptor s;
  s.relations = {{"estimation", "DB2"}};
  s.attributes = {{"estimation", "projId"}, {"estimation", "cost"}};
  s.predicates = {pred("estimation.cost < 40000")};
  auto t = s;
  t.predicates = {pred("estimation.cost < 50000")};
  CHECK(answerable(normalize(s), normalize(t)));
  CHECK_FALSE(answerable(normalize(t), normalize(s)));
}

TEST_CASE("answerable rejects unnormalised descriptors") {
  SemanticDescriptor s;
  s.relations = {{"b", "db"}, {"a", "db"}};
  CHECK_THROWS_AS(answerable(s, normalize(s)), ContractError);
  CHECK_THROWS_AS(answerable(normalize(s), s), ContractError);
}

TEST_CASE("answerable needs the filtered attributes in the cached projection") {
  SemanticDescriptor s;
  s.relations = {{"employee", "DB1"}};
  s.attributes = {{"employee", "empName"}};
  s.predicates = {pred("employee.age > 45")};
  SemanticDescriptor t;
  t.relations = s.relations;
  t.attributes = {{"employee", "empName"}};
  CHECK_FALSE(answerable(normalize(s), normalize(t)));
  t.attributes.push_back({"employee", "age"});
  CHECK(answerable(normalize(s), normalize(t)));
}

TEST_CASE("implication over selections") {
  const std::vector<Predicate> lt40{pred("r.a < 40")};
  CHECK(implies(lt40, pred("r.a < 50")));
  CHECK(implies(lt40, pred("r.a <= 40")));
  CHECK(implies(lt40, pred("r.a != 45")));
  CHECK_FALSE(implies(lt40, pred("r.a < 30")));
  CHECK_FALSE(implies(lt40, pred("r.b < 50")));

  const std::vector<Predicate> eq5{pred("r.a = 5")};
  CHECK(implies(eq5, pred("r.a >= 5")));
  CHECK(implies(eq5, pred("r.a = 5.0")));
  CHECK_FALSE(implies(eq5, pred("r.a > 5")));

  const std::vector<Predicate> box{pred("r.a >= 3"), pred("r.a <= 5"), pred("r.a != 5")};
  CHECK(implies(box, pred("r.a < 5")));
  CHECK_FALSE(implies(box, pred("r.a < 4")));

  const std::vector<Predicate> empty{pred("r.a > 5"), pred("r.a < 2")};
  CHECK(implies(empty, pred("r.a = 100")));

  const std::vector<Predicate> strings{pred("r.s >= 'b'"), pred("r.s <= 'd'")};
  CHECK(implies(strings, pred("r.s > 'a'")));
  CHECK_FALSE(implies(strings, pred("r.s > 'c'")));
  CHECK_FALSE(implies(strings, pred("r.s > 1")));
}

TEST_CASE("joins imply only themselves") {
  const std::vector<Predicate> j{pred("employee.empId = project.empId")};
  CHECK(implies(j, j[0]));
  CHECK_FALSE(implies(j, pred("employee.empId = estimation.empId")));
  CHECK_FALSE(implies({}, j[0]));
}

TEST_CASE("the two plans of Q1 are equivalent") {
  CHECK(equivalent_query(load_plan("q1_plan1.plan"), load_plan("q1_plan2.plan")));
  CHECK_FALSE(equivalent_query(load_plan("q1_plan1.plan"), load_plan("q3.plan")));
}

TEST_CASE("S1 is not root-equivalent to T1 but is contained in it") {
  WorkedExample ex;
  const auto s1 = tree("S1", par({ex.q[1], ex.q[2]}));
  const auto t1 = ex.unit.find("T1")->expr;
  CHECK_FALSE(equivalent_query(s1, t1));
  // T1's root merges q1, q2 and q3, so it already covers S1 and comes first
  // in breadth-first order.
  CHECK(is_contained(s1, t1) == std::optional<std::size_t>(0));
}

TEST_CASE("Q3 is contained in the plan of Q2 with the age filter as its own sub-query") {
  const auto q2 = load_plan("q2_split.plan");
  const auto at = is_contained(load_plan("q3.plan"), q2);
  REQUIRE(at);
  CHECK(breadth_first(*q2.root)[*at]->id() == "q24");
}

TEST_CASE("is_contained returns the root for equal trees and nothing for disjoint ones") {
  WorkedExample ex;
  const auto s4 = tree("S4", seq({ex.q[7], ex.q[8]}));
  for (const auto& id : {"T1", "T2", "T3"}) CHECK_FALSE(is_contained(s4, ex.unit.find(id)->expr));
  const auto t2 = ex.unit.find("T2")->expr;
  CHECK(is_contained(t2, t2) == std::optional<std::size_t>(0));
}

TEST_CASE("worked containment example") {
  WorkedExample ex;
  const auto start = std::chrono::steady_clock::now();

  const auto s1 = ex.search(tree("S1", par({ex.q[1], ex.q[2]})));
  CHECK(s1.status == SearchStatus::FullyFound);
  REQUIRE(s1.contained.size() == 2);
  CHECK(s1.contained[0].cachedQuery == "T1");
  CHECK(s1.contained[1].cachedQuery == "T1");

  const auto s2 = ex.search(tree("S2", seq({ex.q[3], ex.q[4]})));
  CHECK(s2.status == SearchStatus::FullyFound);
  REQUIRE(s2.contained.size() == 2);
  CHECK(s2.contained[0].subQuery == "q3");
  CHECK(s2.contained[0].cachedQuery == "T1");
  CHECK(s2.contained[1].subQuery == "q4");
  CHECK(s2.contained[1].cachedQuery == "T2");

  const auto s3 = ex.search(tree("S3", par({ex.q[9], ex.q[8]})));
  CHECK(s3.status == SearchStatus::PartiallyFound);
  REQUIRE(s3.contained.size() == 1);
  CHECK(s3.contained[0].subQuery == "q9");
  CHECK(s3.contained[0].cachedQuery == "T3");
  CHECK(s3.remainder == std::vector<std::string>{"q8"});

  const auto s4 = ex.search(tree("S4", seq({ex.q[7], ex.q[8]})));
  CHECK(s4.status == SearchStatus::NotFound);
  CHECK(s4.contained.empty());
  CHECK(s4.remainder == std::vector<std::string>{"q7", "q8"});

  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
}

TEST_CASE("empty cache finds nothing") {
  const auto s = tree("S", par({simple_leaf("a"), simple_leaf("b")}));
  const auto out = search_cache(s, std::span<const CacheUnit>{});
  CHECK(out.status == SearchStatus::NotFound);
  CHECK(out.remainder.size() == 2);
  CHECK(to_string(out.status) == "not_found");
}

TEST_CASE("search prefers fewer hops, then recent use, then the lower id") {
  std::vector<CacheUnit> units;
  units.emplace_back("cache-1", "site-1", 100.0);
  units.emplace_back("cache-2", "site-2", 100.0);
  CacheNetwork net(std::move(units), {"uloc-1"}, {"ds-1"},
                   {{"uloc-1", "site-1", 1}, {"site-1", "site-2", 2}, {"ds-1", "site-1", 1}});
  const auto a = simple_leaf("a");
  const auto s = tree("S", a);

  net.unit("cache-2").admit(make_cached_query("c1", tree("c1", a), "cache-2"), 0);
  auto far = search_cache(s, net, "uloc-1");
  REQUIRE(far.contained.size() == 1);
  CHECK(far.contained[0].unit == "cache-2");
  CHECK(far.contained[0].hops == 3);

  net.unit("cache-1").admit(make_cached_query("c9", tree("c9", a), "cache-1"), 0);
  net.unit("cache-1").admit(make_cached_query("c10", tree("c10", a), "cache-1"), 0);
  auto near = search_cache(s, net, "uloc-1");
  CHECK(near.contained[0].cachedQuery == "c9");
  CHECK(near.contained[0].hops == 1);

  net.unit("cache-1").record_access("c10", "uloc-1", 5, {});
  CHECK(search_cache(s, net, "uloc-1").contained[0].cachedQuery == "c10");
}
