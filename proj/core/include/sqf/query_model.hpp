#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sqf {

// ---------------------------------------------------------------------------
// Semantic descriptors
// ---------------------------------------------------------------------------

/// `relation.attribute`. The relation part may name a base relation or an
/// intermediate result handle such as `qr11`.
struct AttributeRef {
  std::string relation;
  std::string attribute;

  std::string str() const { return relation + "." + attribute; }

  friend bool operator==(const AttributeRef&, const AttributeRef&) = default;
  friend auto operator<=>(const AttributeRef&, const AttributeRef&) = default;
};

/// Parses `relation.attribute`; throws ParseError on anything else.
AttributeRef parse_attribute(std::string_view text);

/// A relation together with the location that holds it, written `name@location`.
/// Intermediate result handles have an empty location.
struct RelationRef {
  std::string name;
  std::string location;

  std::string str() const { return location.empty() ? name : name + "@" + location; }

  friend bool operator==(const RelationRef&, const RelationRef&) = default;
  friend auto operator<=>(const RelationRef&, const RelationRef&) = default;
};

RelationRef parse_relation(std::string_view text);

enum class Comparator : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

/// ASCII spelling: `=`, `!=`, `<`, `<=`, `>`, `>=`.
std::string_view to_string(Comparator op);
/// Accepts the ASCII spellings plus `≠`, `≤`, `≥` and `<>`.
std::optional<Comparator> parse_comparator(std::string_view text);
/// The comparator obtained by swapping operands (`a < b` == `b > a`).
Comparator mirrored(Comparator op);

using Constant = std::variant<std::int64_t, double, std::string>;

std::string to_string(const Constant& c);

struct Predicate {
  AttributeRef left;
  Comparator op = Comparator::Eq;
  std::variant<Constant, AttributeRef> right;

  bool is_join() const { return std::holds_alternative<AttributeRef>(right); }
  std::string str() const;

  friend bool operator==(const Predicate&, const Predicate&) = default;
  friend bool operator<(const Predicate& a, const Predicate& b);
};

/// Parses `left op right`, e.g. `estimation.cost < 50000` or
/// `employee.empId = project.empId`. Quoted right-hand sides are strings.
Predicate parse_predicate(std::string_view text);

/// The ⟨relations, attributes, predicates, content⟩ tuple of a sub-query.
struct SemanticDescriptor {
  std::vector<RelationRef> relations;
  std::vector<AttributeRef> attributes;
  std::vector<Predicate> predicates;
  std::string resultHandle;
  double resultVolumeGB = 0.0;
};

/// Sorted, deduplicated sets; predicates with attributes on both sides are
/// oriented so the lexicographically smaller attribute is on the left.
SemanticDescriptor normalize(SemanticDescriptor d);
bool is_normalized(const SemanticDescriptor& d);

/// Equality of the relation, attribute and predicate sets. Handle and volume
/// are metadata and do not participate.
bool same_semantics(const SemanticDescriptor& a, const SemanticDescriptor& b);

/// Throws StructureError when an attribute reference names neither a listed
/// relation nor an intermediate handle (a relation without location).
void validate(const SemanticDescriptor& d);

// ---------------------------------------------------------------------------
// Query evaluation trees
// ---------------------------------------------------------------------------

enum class NodeKind : std::uint8_t { Leaf, Operator };
enum class Operator : std::uint8_t { Parallel, Sequential };

/// Infix symbol: `∥` for parallel, `_` for sequential.
std::string_view symbol(Operator op);

/// Cheap necessary-condition filter for answerability: one bit per hashed
/// relation, attribute and predicate attribute.
struct NodeSignature {
  std::uint64_t relations = 0;
  std::uint64_t attributes = 0;
  std::uint64_t predicateAttributes = 0;
};

class QetNode;
using NodePtr = std::shared_ptr<const QetNode>;

/// Immutable node of a query evaluation tree. Leaves hold sub-queries;
/// operator nodes combine two or more children executed left to right.
class QetNode {
 public:
  static NodePtr leaf(std::string id, SemanticDescriptor semantics,
                      std::optional<std::string> address = std::nullopt);

  /// Without explicit semantics the node describes the union of its
  /// children's sets and the sum of their volumes.
  static NodePtr combine(Operator op, std::vector<NodePtr> children,
                         std::optional<SemanticDescriptor> semantics = std::nullopt,
                         std::optional<std::string> address = std::nullopt);

  NodeKind kind() const noexcept { return kind_; }
  bool is_leaf() const noexcept { return kind_ == NodeKind::Leaf; }
  Operator op() const noexcept { return op_; }
  /// Sub-query id for leaves, empty for operator nodes.
  const std::string& id() const noexcept { return id_; }
  /// Fully parenthesised infix text of the subtree.
  const std::string& expr() const noexcept { return expr_; }
  const SemanticDescriptor& semantics() const noexcept { return semantics_; }
  const std::optional<std::string>& address() const noexcept { return address_; }
  const std::vector<NodePtr>& children() const noexcept { return children_; }
  const NodeSignature& signature() const noexcept { return signature_; }
  std::size_t leaf_count() const noexcept { return leafCount_; }
  double volume() const noexcept { return semantics_.resultVolumeGB; }

  /// Copy of this node with a different physical address.
  NodePtr with_address(std::optional<std::string> address) const;

 private:
  QetNode() = default;

  NodeKind kind_ = NodeKind::Leaf;
  Operator op_ = Operator::Parallel;
  std::string id_;
  std::string expr_;
  SemanticDescriptor semantics_;
  std::optional<std::string> address_;
  std::vector<NodePtr> children_;
  NodeSignature signature_;
  std::size_t leafCount_ = 1;
};

/// Union of the children's descriptors, normalised, with summed volume.
SemanticDescriptor merge_semantics(const std::vector<NodePtr>& children);

NodeSignature signature_of(const SemanticDescriptor& d);

struct QueryEvaluationTree {
  std::string queryId;
  NodePtr root;
};

/// Number of leaf nodes.
std::size_t complexity(const QueryEvaluationTree& t);

std::string to_infix(const QueryEvaluationTree& t);

/// Leaves in left-to-right order.
std::vector<const QetNode*> leaves(const QetNode& root);
inline std::vector<const QetNode*> leaves(const QueryEvaluationTree& t) { return leaves(*t.root); }

/// Nodes in breadth-first order; index 0 is the root. Node ids returned by
/// containment searches are positions in this order.
std::vector<const QetNode*> breadth_first(const QetNode& root);

/// Structural equality: same shape, operators, leaf ids and semantics.
bool isomorphic(const QetNode& a, const QetNode& b);

/// Throws StructureError when an operator has fewer than two children or a
/// leaf has children.
void check_well_formed(const QueryEvaluationTree& t);

/// Replaces leaf `leafId` with `replacement`, whose root must carry the same
/// semantics as the leaf. Ancestors keep their semantics.
QueryEvaluationTree fragment_leaf(const QueryEvaluationTree& t, std::string_view leafId,
                                  NodePtr replacement);

/// Tree restricted to the leaves whose ids are in `keep` (sorted). Operators
/// left with one child collapse into it; returns nullptr when nothing is kept.
NodePtr restrict_to_leaves(const NodePtr& root, const std::vector<std::string>& keep);

}  // namespace sqf
