#include <doctest.h>

#include "generators.hpp"
#include "sqf/errors.hpp"
#include "sqf/plan_format.hpp"

using namespace sqf;
using namespace sqf::testing;

namespace {

const char* kMinimal = R"(sqf-plan 1
query Q
subquery a
  relations r@db
  attributes r.x
  volume 1
subquery b
  relations s@db
  attributes s.y
  predicates s.y >= 3
  volume 2.5
expr ((a) | (b))
end
)";

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_plan(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("minimal plan parses") {
  const auto t = parse_plan(kMinimal);
  CHECK(t.queryId == "Q");
  CHECK(to_infix(t) == "((a) ∥ (b))");
  CHECK(leaves(t)[1]->volume() == doctest::Approx(2.5));
  CHECK(leaves(t)[1]->semantics().predicates.size() == 1);
}

TEST_CASE("write_plan output parses back to an isomorphic tree") {
  const auto t = parse_plan(read_file(data_path("q1_plan1.plan")));
  const auto back = parse_plan(write_plan(t));
  CHECK(isomorphic(*t.root, *back.root));
  CHECK(same_semantics(t.root->semantics(), back.root->semantics()));
}

TEST_CASE("infix accepts bare ids, redundant parentheses and every operator spelling") {
  const std::vector<NodePtr> ls{simple_leaf("q1"), simple_leaf("q2"), simple_leaf("q3")};
  CHECK(parse_infix("(q1 || q2)", ls)->expr() == "((q1) ∥ (q2))");
  CHECK(parse_infix("((q1) ∥ (q2)) _ (q3)", ls)->expr() == "(((q1) ∥ (q2)) _ (q3))");
  CHECK(parse_infix("(((q1)))", ls)->expr() == "(q1)");
  CHECK(parse_infix("(q1)_(q2)", ls)->expr() == "((q1) _ (q2))");
  CHECK(parse_infix("q1 | q2 | q3", ls)->children().size() == 3);
}

TEST_CASE("infix errors") {
  const std::vector<NodePtr> ls{simple_leaf("q1"), simple_leaf("q2"), simple_leaf("q3")};
  CHECK_THROWS_AS(parse_infix("", ls), ParseError);
  CHECK_THROWS_AS(parse_infix("(q1 ∥ q2", ls), ParseError);
  CHECK_THROWS_AS(parse_infix("q1 ∥ q9", ls), ParseError);
  CHECK_THROWS_AS(parse_infix("q1 ∥ q2 _ q3", ls), StructureError);
  CHECK_THROWS_AS(parse_infix("q1 ∥", ls), ParseError);
}

TEST_CASE("empty document is a parse error") {
  CHECK_THROWS_AS(parse_plan(""), ParseError);
  CHECK_THROWS_AS(parse_plan("# only a comment\n\n"), ParseError);
}

TEST_CASE("parse errors carry the line number") {
  std::string text = kMinimal;
  text.replace(text.find("volume 2.5"), 10, "volume -1");
  CHECK(parse_error_line(text) == 11);

  text = kMinimal;
  text.replace(text.find("attributes r.x"), 14, "colour red");
  CHECK(parse_error_line(text) == 5);

  CHECK(parse_error_line("sqf-plan 2\n") == 1);
  CHECK(parse_error_line(std::string(kMinimal) + "extra\n") == 14);
}

TEST_CASE("structural errors") {
  std::string missingVolume = kMinimal;
  missingVolume.erase(missingVolume.find("  volume 1\n"), 11);
  CHECK_THROWS_AS(parse_plan(missingVolume), ParseError);

  std::string twice = kMinimal;
  twice.replace(twice.find("((a) | (b))"), 11, "((a) | (a))");
  CHECK_THROWS_AS(parse_plan(twice), StructureError);

  std::string noEnd = kMinimal;
  noEnd.erase(noEnd.find("end"));
  CHECK_THROWS_AS(parse_plan(noEnd), ParseError);

  std::string badAttr = kMinimal;
  badAttr.replace(badAttr.find("attributes r.x"), 14, "attributes z.x");
  CHECK_THROWS(parse_plan(badAttr));
}

TEST_CASE("addresses survive a round trip") {
  std::string text = kMinimal;
  text.replace(text.find("  volume 1\n"), 11, "  volume 1\n  address cache-2/a\n");
  const auto t = parse_plan(text);
  REQUIRE(leaves(t)[0]->address());
  CHECK(*leaves(t)[0]->address() == "cache-2/a");
  CHECK(*leaves(parse_plan(write_plan(t)))[0]->address() == "cache-2/a");
}
