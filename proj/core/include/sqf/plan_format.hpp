#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sqf/query_model.hpp"

namespace sqf {

/// Plan document, version 1. Line oriented; blank lines and `#` comments are
/// ignored.
///
///     sqf-plan 1
///     query Q1
///     subquery q11
///       relations employee@DB1 project@DB1
///       attributes employee.empId project.projName project.projId
///       predicates employee.empId = project.empId
///       volume 4
///       address cache-1/q11          (optional)
///     subquery q12
///       ...
///     root                           (optional: semantics of the whole query)
///       relations ...
///       attributes ...
///       predicates ...
///       volume 10
///     expr (((q11) | (q12)) _ (q13))
///     end
///
/// Predicates on one line are separated by `;`. In `expr`, `∥`, `||` and `|`
/// are the parallel operator and a standalone `_` is the sequential operator.
/// Every sub-query is referenced exactly once. An operator node without a
/// `root` block describes the union of its children.
inline constexpr std::string_view kPlanMagic = "sqf-plan";
inline constexpr int kPlanVersion = 1;

QueryEvaluationTree parse_plan(std::string_view text);

/// Parses one plan starting at `lines[pos]` (the magic line) and advances
/// `pos` past the closing `end`. `lineOffset` is added to reported line numbers.
QueryEvaluationTree parse_plan_lines(const std::vector<std::string_view>& lines, std::size_t& pos,
                                     std::size_t lineOffset = 0);

/// Serialises a tree. The output parses back to an isomorphic tree as long as
/// every non-root operator carries derived (union) semantics.
std::string write_plan(const QueryEvaluationTree& t);

/// Parses an infix expression over known leaves, e.g. `((a) ∥ (b)) _ (c)`.
NodePtr parse_infix(std::string_view expr, const std::vector<NodePtr>& leaves);

}  // namespace sqf
