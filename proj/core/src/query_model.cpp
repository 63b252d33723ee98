#include "sqf/query_model.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "sqf/errors.hpp"

namespace sqf {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::uint64_t bloom_bit(std::string_view key) {
  return std::uint64_t{1} << (std::hash<std::string_view>{}(key) % 64);
}

std::optional<Constant> parse_number(std::string_view text) {
  std::int64_t i = 0;
  auto [ip, iec] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (iec == std::errc{} && ip == text.data() + text.size()) return Constant{i};
  double d = 0.0;
  auto [dp, dec] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (dec == std::errc{} && dp == text.data() + text.size()) return Constant{d};
  return std::nullopt;
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line, std::string field)
    : Error(line == 0 ? what
                      : fmt::format("line {}{}: {}", line, field.empty() ? "" : " (" + field + ")", what)),
      line_(line),
      field_(std::move(field)) {}

LoadError::LoadError(const std::string& what, std::size_t record)
    : Error(fmt::format("record {}: {}", record, what)), record_(record) {}

AttributeRef parse_attribute(std::string_view text) {
  text = trim(text);
  const auto dot = text.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
    throw ParseError(fmt::format("expected relation.attribute, got '{}'", text));
  }
  return AttributeRef{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

RelationRef parse_relation(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ParseError("empty relation reference");
  const auto at = text.find('@');
  if (at == std::string_view::npos) return RelationRef{std::string(text), {}};
  if (at == 0 || at + 1 == text.size()) {
    throw ParseError(fmt::format("malformed relation reference '{}'", text));
  }
  return RelationRef{std::string(text.substr(0, at)), std::string(text.substr(at + 1))};
}

std::string_view to_string(Comparator op) {
  switch (op) {
    case Comparator::Eq: return "=";
    case Comparator::Ne: return "!=";
    case Comparator::Lt: return "<";
    case Comparator::Le: return "<=";
    case Comparator::Gt: return ">";
    case Comparator::Ge: return ">=";
  }
  return "?";
}

std::optional<Comparator> parse_comparator(std::string_view text) {
  if (text == "=" || text == "==") return Comparator::Eq;
  if (text == "!=" || text == "<>" || text == "≠") return Comparator::Ne;
  if (text == "<") return Comparator::Lt;
  if (text == "<=" || text == "≤") return Comparator::Le;
  if (text == ">") return Comparator::Gt;
  if (text == ">=" || text == "≥") return Comparator::Ge;
  return std::nullopt;
}

Comparator mirrored(Comparator op) {
  switch (op) {
    case Comparator::Lt: return Comparator::Gt;
    case Comparator::Le: return Comparator::Ge;
    case Comparator::Gt: return Comparator::Lt;
    case Comparator::Ge: return Comparator::Le;
    default: return op;
  }
}

std::string to_string(const Constant& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return "'" + v + "'";
        } else if constexpr (std::is_same_v<T, double>) {
          std::string s = fmt::format("{}", v);
          if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
          return s;
        } else {
          return fmt::format("{}", v);
        }
      },
      c);
}

std::string Predicate::str() const {
  std::string rhs = is_join() ? std::get<AttributeRef>(right).str() : to_string(std::get<Constant>(right));
  return fmt::format("{} {} {}", left.str(), to_string(op), rhs);
}

bool operator<(const Predicate& a, const Predicate& b) {
  return std::tie(a.left, a.op, a.right) < std::tie(b.left, b.op, b.right);
}

Predicate parse_predicate(std::string_view text) {
  text = trim(text);
  // The comparator starts at the first operator character outside quotes.
  std::size_t pos = std::string_view::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '\'') break;
    if (ch == '=' || ch == '!' || ch == '<' || ch == '>' || static_cast<unsigned char>(ch) == 0xE2) {
      pos = i;
      break;
    }
  }
  if (pos == std::string_view::npos || pos == 0) {
    throw ParseError(fmt::format("expected 'attr op value' predicate, got '{}'", text));
  }
  static constexpr std::string_view spellings[] = {"!=", "<>", "<=", ">=", "==", "≠", "≤", "≥", "=", "<", ">"};
  std::optional<Comparator> op;
  std::size_t end = pos;
  for (auto s : spellings) {
    if (text.substr(pos).starts_with(s)) {
      op = parse_comparator(s);
      end = pos + s.size();
      break;
    }
  }
  if (!op) throw ParseError(fmt::format("unknown comparator in '{}'", text));

  Predicate p;
  p.left = parse_attribute(text.substr(0, pos));
  p.op = *op;
  const auto rhs = trim(text.substr(end));
  if (rhs.empty()) throw ParseError(fmt::format("missing right-hand side in '{}'", text));
  if (rhs.front() == '\'') {
    if (rhs.size() < 2 || rhs.back() != '\'' || rhs.substr(1, rhs.size() - 2).find('\'') != std::string_view::npos) {
      throw ParseError(fmt::format("unterminated string constant in '{}'", text));
    }
    p.right = Constant{std::string(rhs.substr(1, rhs.size() - 2))};
  } else if (auto number = parse_number(rhs)) {
    p.right = *number;
  } else {
    p.right = parse_attribute(rhs);
  }
  return p;
}

namespace {

Predicate oriented(Predicate p) {
  if (p.is_join()) {
    auto& rhs = std::get<AttributeRef>(p.right);
    if (rhs < p.left) {
      std::swap(rhs, p.left);
      p.op = mirrored(p.op);
    }
  }
  return p;
}

}  // namespace

SemanticDescriptor normalize(SemanticDescriptor d) {
  sort_unique(d.relations);
  sort_unique(d.attributes);
  for (auto& p : d.predicates) p = oriented(std::move(p));
  sort_unique(d.predicates);
  return d;
}

bool is_normalized(const SemanticDescriptor& d) {
  auto strictly_sorted = [](const auto& v) {
    return std::adjacent_find(v.begin(), v.end(), [](const auto& a, const auto& b) { return !(a < b); }) == v.end();
  };
  if (!strictly_sorted(d.relations) || !strictly_sorted(d.attributes) || !strictly_sorted(d.predicates)) {
    return false;
  }
  return std::all_of(d.predicates.begin(), d.predicates.end(),
                     [](const Predicate& p) { return !p.is_join() || !(std::get<AttributeRef>(p.right) < p.left); });
}

bool same_semantics(const SemanticDescriptor& a, const SemanticDescriptor& b) {
  return a.relations == b.relations && a.attributes == b.attributes && a.predicates == b.predicates;
}

void validate(const SemanticDescriptor& d) {
  std::set<std::string_view> names;
  for (const auto& r : d.relations) names.insert(r.name);
  auto check = [&](const AttributeRef& a) {
    if (!names.contains(a.relation)) {
      throw StructureError(fmt::format("attribute '{}' names a relation that is not listed", a.str()));
    }
  };
  for (const auto& a : d.attributes) check(a);
  for (const auto& p : d.predicates) {
    check(p.left);
    if (p.is_join()) check(std::get<AttributeRef>(p.right));
  }
  if (d.resultVolumeGB < 0.0) throw StructureError("negative result volume");
}

std::string_view symbol(Operator op) { return op == Operator::Parallel ? "∥" : "_"; }

NodeSignature signature_of(const SemanticDescriptor& d) {
  NodeSignature s;
  for (const auto& r : d.relations) s.relations |= bloom_bit(r.str());
  for (const auto& a : d.attributes) s.attributes |= bloom_bit(a.str());
  for (const auto& p : d.predicates) {
    s.predicateAttributes |= bloom_bit(p.left.str());
    if (p.is_join()) s.predicateAttributes |= bloom_bit(std::get<AttributeRef>(p.right).str());
  }
  return s;
}

NodePtr QetNode::leaf(std::string id, SemanticDescriptor semantics, std::optional<std::string> address) {
  if (id.empty()) throw StructureError("leaf node without a sub-query id");
  auto node = std::shared_ptr<QetNode>(new QetNode());
  node->kind_ = NodeKind::Leaf;
  node->expr_ = "(" + id + ")";
  node->id_ = std::move(id);
  node->semantics_ = normalize(std::move(semantics));
  node->address_ = std::move(address);
  node->signature_ = signature_of(node->semantics_);
  node->leafCount_ = 1;
  return node;
}

SemanticDescriptor merge_semantics(const std::vector<NodePtr>& children) {
  SemanticDescriptor merged;
  for (const auto& c : children) {
    const auto& s = c->semantics();
    merged.relations.insert(merged.relations.end(), s.relations.begin(), s.relations.end());
    merged.attributes.insert(merged.attributes.end(), s.attributes.begin(), s.attributes.end());
    merged.predicates.insert(merged.predicates.end(), s.predicates.begin(), s.predicates.end());
    merged.resultVolumeGB += s.resultVolumeGB;
  }
  return normalize(std::move(merged));
}

NodePtr QetNode::combine(Operator op, std::vector<NodePtr> children, std::optional<SemanticDescriptor> semantics,
                         std::optional<std::string> address) {
  if (children.size() < 2) {
    throw StructureError(fmt::format("operator '{}' needs at least two children, got {}", symbol(op), children.size()));
  }
  if (std::any_of(children.begin(), children.end(), [](const NodePtr& c) { return c == nullptr; })) {
    throw StructureError("null child node");
  }
  auto node = std::shared_ptr<QetNode>(new QetNode());
  node->kind_ = NodeKind::Operator;
  node->op_ = op;
  std::string expr = "(";
  std::size_t count = 0;
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (i > 0) {
      expr += ' ';
      expr += symbol(op);
      expr += ' ';
    }
    expr += children[i]->expr();
    count += children[i]->leaf_count();
  }
  expr += ')';
  node->expr_ = std::move(expr);
  node->semantics_ = semantics ? normalize(std::move(*semantics)) : merge_semantics(children);
  node->address_ = std::move(address);
  node->children_ = std::move(children);
  node->signature_ = signature_of(node->semantics_);
  node->leafCount_ = count;
  return node;
}

NodePtr QetNode::with_address(std::optional<std::string> address) const {
  auto node = std::shared_ptr<QetNode>(new QetNode(*this));
  node->address_ = std::move(address);
  return node;
}

std::size_t complexity(const QueryEvaluationTree& t) { return t.root ? t.root->leaf_count() : 0; }

std::string to_infix(const QueryEvaluationTree& t) { return t.root ? t.root->expr() : std::string{}; }

std::vector<const QetNode*> leaves(const QetNode& root) {
  std::vector<const QetNode*> out;
  std::vector<const QetNode*> stack{&root};
  while (!stack.empty()) {
    const QetNode* n = stack.back();
    stack.pop_back();
    if (n->is_leaf()) {
      out.push_back(n);
    } else {
      for (auto it = n->children().rbegin(); it != n->children().rend(); ++it) stack.push_back(it->get());
    }
  }
  return out;
}

std::vector<const QetNode*> breadth_first(const QetNode& root) {
  std::vector<const QetNode*> order{&root};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (const auto& c : order[i]->children()) order.push_back(c.get());
  }
  return order;
}

bool isomorphic(const QetNode& a, const QetNode& b) {
  if (a.kind() != b.kind() || a.id() != b.id() || !same_semantics(a.semantics(), b.semantics()) ||
      a.volume() != b.volume()) {
    return false;
  }
  if (a.is_leaf()) return true;
  if (a.op() != b.op() || a.children().size() != b.children().size()) return false;
  for (std::size_t i = 0; i < a.children().size(); ++i) {
    if (!isomorphic(*a.children()[i], *b.children()[i])) return false;
  }
  return true;
}

void check_well_formed(const QueryEvaluationTree& t) {
  if (!t.root) throw StructureError("tree without a root");
  for (const QetNode* n : breadth_first(*t.root)) {
    if (n->is_leaf() && !n->children().empty()) throw StructureError("leaf node with children");
    if (!n->is_leaf() && n->children().size() < 2) throw StructureError("operator node with fewer than two children");
  }
}

namespace {

NodePtr replace_leaf(const NodePtr& node, std::string_view leafId, const NodePtr& replacement, bool& done) {
  if (node->is_leaf()) {
    if (node->id() == leafId) {
      done = true;
      return replacement;
    }
    return node;
  }
  std::vector<NodePtr> children;
  children.reserve(node->children().size());
  bool changed = false;
  for (const auto& c : node->children()) {
    auto r = done ? c : replace_leaf(c, leafId, replacement, done);
    changed = changed || r != c;
    children.push_back(std::move(r));
  }
  if (!changed) return node;
  return QetNode::combine(node->op(), std::move(children), node->semantics(), node->address());
}

}  // namespace

QueryEvaluationTree fragment_leaf(const QueryEvaluationTree& t, std::string_view leafId, NodePtr replacement) {
  if (!t.root) throw FragmentationError("cannot fragment an empty tree");
  if (!replacement) throw FragmentationError("null replacement subtree");
  const auto all = leaves(t);
  const auto hits = std::count_if(all.begin(), all.end(), [&](const QetNode* n) { return n->id() == leafId; });
  if (hits == 0) throw FragmentationError(fmt::format("leaf '{}' not found", leafId));
  if (hits > 1) throw FragmentationError(fmt::format("leaf id '{}' is ambiguous", leafId));
  const QetNode* target = *std::find_if(all.begin(), all.end(), [&](const QetNode* n) { return n->id() == leafId; });
  if (!same_semantics(target->semantics(), replacement->semantics())) {
    throw FragmentationError(fmt::format("replacement semantics differ from leaf '{}'", leafId));
  }
  if (replacement->leaf_count() < 2) {
    throw FragmentationError("replacement must contain at least two sub-queries");
  }
  check_well_formed(QueryEvaluationTree{t.queryId, replacement});
  bool done = false;
  return QueryEvaluationTree{t.queryId, replace_leaf(t.root, leafId, replacement, done)};
}

NodePtr restrict_to_leaves(const NodePtr& root, const std::vector<std::string>& keep) {
  if (root->is_leaf()) {
    return std::binary_search(keep.begin(), keep.end(), root->id()) ? root : nullptr;
  }
  std::vector<NodePtr> kept;
  bool all = true;
  for (const auto& c : root->children()) {
    auto r = restrict_to_leaves(c, keep);
    all = all && r == c;
    if (r) kept.push_back(std::move(r));
  }
  if (all) return root;
  if (kept.empty()) return nullptr;
  if (kept.size() == 1) return kept.front();
  return QetNode::combine(root->op(), std::move(kept));
}

}  // namespace sqf
