#include "sqf/plan_format.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>

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

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

// -- infix expression ---------------------------------------------------------

enum class TokKind { Open, Close, Par, Seq, Ident };

struct Token {
  TokKind kind;
  std::string_view text;
};

constexpr std::string_view kParallelGlyph = "∥";

std::vector<Token> tokenize(std::string_view expr) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < expr.size()) {
    const char ch = expr[i];
    if (ch == ' ' || ch == '\t') {
      ++i;
    } else if (ch == '(') {
      out.push_back({TokKind::Open, expr.substr(i, 1)});
      ++i;
    } else if (ch == ')') {
      out.push_back({TokKind::Close, expr.substr(i, 1)});
      ++i;
    } else if (ch == '|') {
      const std::size_t len = (i + 1 < expr.size() && expr[i + 1] == '|') ? 2 : 1;
      out.push_back({TokKind::Par, expr.substr(i, len)});
      i += len;
    } else if (expr.substr(i).starts_with(kParallelGlyph)) {
      out.push_back({TokKind::Par, expr.substr(i, kParallelGlyph.size())});
      i += kParallelGlyph.size();
    } else {
      const auto start = i;
      while (i < expr.size() && expr[i] != ' ' && expr[i] != '\t' && expr[i] != '(' && expr[i] != ')' &&
             expr[i] != '|' && !expr.substr(i).starts_with(kParallelGlyph)) {
        ++i;
      }
      const auto word = expr.substr(start, i - start);
      out.push_back({word == "_" ? TokKind::Seq : TokKind::Ident, word});
    }
  }
  return out;
}

class InfixParser {
 public:
  InfixParser(std::vector<Token> tokens, const std::map<std::string, NodePtr, std::less<>>& leaves)
      : tokens_(std::move(tokens)), leaves_(leaves) {}

  NodePtr parse() {
    if (tokens_.empty()) throw ParseError("empty expression", 0, "expr");
    auto node = expression();
    if (pos_ != tokens_.size()) {
      throw ParseError(fmt::format("unexpected '{}' in expression", tokens_[pos_].text), 0, "expr");
    }
    return node;
  }

 private:
  NodePtr expression() {
    std::vector<NodePtr> terms{term()};
    std::optional<TokKind> op;
    while (pos_ < tokens_.size() && (tokens_[pos_].kind == TokKind::Par || tokens_[pos_].kind == TokKind::Seq)) {
      const auto kind = tokens_[pos_].kind;
      if (op && *op != kind) {
        throw StructureError("mixing '∥' and '_' at one level requires parentheses");
      }
      op = kind;
      ++pos_;
      terms.push_back(term());
    }
    if (terms.size() == 1) return terms.front();
    return QetNode::combine(*op == TokKind::Par ? Operator::Parallel : Operator::Sequential, std::move(terms));
  }

  NodePtr term() {
    if (pos_ >= tokens_.size()) throw ParseError("expression ends early", 0, "expr");
    const Token& t = tokens_[pos_];
    if (t.kind == TokKind::Open) {
      ++pos_;
      auto inner = expression();
      if (pos_ >= tokens_.size() || tokens_[pos_].kind != TokKind::Close) {
        throw ParseError("missing ')'", 0, "expr");
      }
      ++pos_;
      return inner;
    }
    if (t.kind == TokKind::Ident) {
      ++pos_;
      const auto it = leaves_.find(t.text);
      if (it == leaves_.end()) throw ParseError(fmt::format("unknown sub-query '{}'", t.text), 0, "expr");
      return it->second;
    }
    throw ParseError(fmt::format("unexpected '{}' in expression", t.text), 0, "expr");
  }

  std::vector<Token> tokens_;
  const std::map<std::string, NodePtr, std::less<>>& leaves_;
  std::size_t pos_ = 0;
};

// -- document ---------------------------------------------------------------

struct DescriptorBlock {
  std::string id;
  SemanticDescriptor semantics;
  std::optional<std::string> address;
  bool hasVolume = false;
  std::size_t line = 0;
};

double parse_volume(std::string_view text, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || !(v >= 0.0)) {
    throw ParseError(fmt::format("volume must be a non-negative number, got '{}'", text), line, "volume");
  }
  return v;
}

std::string join_predicates(const std::vector<Predicate>& ps) {
  std::string out;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (i > 0) out += "; ";
    out += ps[i].str();
  }
  return out;
}

void write_descriptor(std::string& out, const SemanticDescriptor& d) {
  out += "  relations";
  for (const auto& r : d.relations) out += " " + r.str();
  out += "\n  attributes";
  for (const auto& a : d.attributes) out += " " + a.str();
  out += "\n  predicates";
  if (!d.predicates.empty()) out += " " + join_predicates(d.predicates);
  out += fmt::format("\n  volume {}\n", d.resultVolumeGB);
}

}  // namespace

NodePtr parse_infix(std::string_view expr, const std::vector<NodePtr>& leaves) {
  std::map<std::string, NodePtr, std::less<>> byId;
  for (const auto& l : leaves) byId.emplace(l->id(), l);
  return InfixParser(tokenize(expr), byId).parse();
}

QueryEvaluationTree parse_plan_lines(const std::vector<std::string_view>& lines, std::size_t& pos,
                                     std::size_t lineOffset) {
  auto lineNo = [&](std::size_t i) { return i + 1 + lineOffset; };

  // Skip leading blanks and comments.
  while (pos < lines.size() && (trim(lines[pos]).empty() || trim(lines[pos]).starts_with('#'))) ++pos;
  if (pos >= lines.size()) throw ParseError("empty plan document");

  {
    const auto header = split_ws(trim(lines[pos]));
    if (header.size() != 2 || header[0] != kPlanMagic) {
      throw ParseError(fmt::format("expected '{} {}' header", kPlanMagic, kPlanVersion), lineNo(pos), "header");
    }
    if (header[1] != std::to_string(kPlanVersion)) {
      throw ParseError(fmt::format("unsupported plan version '{}'", header[1]), lineNo(pos), "header");
    }
    ++pos;
  }

  std::string queryId;
  std::vector<DescriptorBlock> subqueries;
  std::optional<DescriptorBlock> root;
  DescriptorBlock* current = nullptr;
  std::optional<std::string> expr;
  std::size_t exprLine = 0;
  bool closed = false;

  for (; pos < lines.size(); ++pos) {
    const auto line = trim(lines[pos]);
    if (line.empty() || line.starts_with('#')) continue;
    const auto space = line.find_first_of(" \t");
    const auto key = line.substr(0, space);
    const auto value = space == std::string_view::npos ? std::string_view{} : trim(line.substr(space));
    const auto ln = lineNo(pos);

    if (key == "end") {
      closed = true;
      ++pos;
      break;
    } else if (key == "query") {
      if (value.empty()) throw ParseError("query id missing", ln, "query");
      queryId = std::string(value);
      current = nullptr;
    } else if (key == "subquery") {
      if (value.empty() || value.find_first_of(" \t()|") != std::string_view::npos || value == "_") {
        throw ParseError(fmt::format("invalid sub-query id '{}'", value), ln, "subquery");
      }
      if (std::any_of(subqueries.begin(), subqueries.end(), [&](const auto& b) { return b.id == value; })) {
        throw ParseError(fmt::format("duplicate sub-query '{}'", value), ln, "subquery");
      }
      subqueries.push_back(DescriptorBlock{std::string(value), {}, std::nullopt, false, ln});
      current = &subqueries.back();
    } else if (key == "root") {
      if (root) throw ParseError("duplicate root block", ln, "root");
      root = DescriptorBlock{"root", {}, std::nullopt, false, ln};
      current = &*root;
    } else if (key == "expr") {
      if (value.empty()) throw ParseError("empty expression", ln, "expr");
      expr = std::string(value);
      exprLine = ln;
      current = nullptr;
    } else if (key == "relations" || key == "attributes" || key == "predicates" || key == "volume" ||
               key == "address") {
      if (current == nullptr) {
        throw ParseError(fmt::format("'{}' outside a subquery or root block", key), ln, std::string(key));
      }
      try {
        if (key == "relations") {
          for (auto tok : split_ws(value)) current->semantics.relations.push_back(parse_relation(tok));
        } else if (key == "attributes") {
          for (auto tok : split_ws(value)) current->semantics.attributes.push_back(parse_attribute(tok));
        } else if (key == "predicates") {
          std::size_t start = 0;
          while (start <= value.size()) {
            const auto semi = value.find(';', start);
            const auto piece = trim(value.substr(start, semi == std::string_view::npos ? value.npos : semi - start));
            if (!piece.empty()) current->semantics.predicates.push_back(parse_predicate(piece));
            if (semi == std::string_view::npos) break;
            start = semi + 1;
          }
        } else if (key == "volume") {
          current->semantics.resultVolumeGB = parse_volume(value, ln);
          current->hasVolume = true;
        } else {
          if (value.empty()) throw ParseError("empty address", ln, "address");
          current->address = std::string(value);
        }
      } catch (const ParseError& e) {
        if (e.line() != 0) throw;
        throw ParseError(e.what(), ln, std::string(key));
      }
    } else {
      throw ParseError(fmt::format("unknown key '{}'", key), ln, std::string(key));
    }
  }

  if (!closed) throw ParseError("plan document not terminated by 'end'", lineNo(lines.empty() ? 0 : pos - 1), "end");
  if (queryId.empty()) throw ParseError("plan without 'query' line", lineNo(pos - 1), "query");
  if (subqueries.empty()) throw ParseError("plan without sub-queries", lineNo(pos - 1), "subquery");
  if (!expr) throw ParseError("plan without 'expr' line", lineNo(pos - 1), "expr");

  std::vector<NodePtr> leafNodes;
  for (auto& b : subqueries) {
    if (!b.hasVolume) throw ParseError(fmt::format("sub-query '{}' has no volume", b.id), b.line, "volume");
    try {
      validate(b.semantics);
    } catch (const StructureError& e) {
      throw ParseError(e.what(), b.line, b.id);
    }
    if (b.semantics.resultHandle.empty()) b.semantics.resultHandle = "qr:" + b.id;
    leafNodes.push_back(QetNode::leaf(b.id, std::move(b.semantics), std::move(b.address)));
  }

  NodePtr tree;
  try {
    tree = parse_infix(*expr, leafNodes);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), exprLine, "expr");
  }

  // Each sub-query must be used exactly once.
  std::map<std::string, int, std::less<>> uses;
  for (const QetNode* l : leaves(*tree)) ++uses[l->id()];
  for (const auto& l : leafNodes) {
    const auto n = uses[l->id()];
    if (n != 1) {
      throw StructureError(fmt::format("sub-query '{}' is referenced {} times in expr (line {})", l->id(), n, exprLine));
    }
  }

  if (root) {
    if (tree->is_leaf()) throw StructureError(fmt::format("root block on a single-leaf plan (line {})", root->line));
    try {
      validate(root->semantics);
    } catch (const StructureError& e) {
      throw ParseError(e.what(), root->line, "root");
    }
    if (!root->hasVolume) root->semantics.resultVolumeGB = tree->volume();
    root->semantics.resultHandle = "qr:" + queryId;
    std::vector<NodePtr> children = tree->children();
    tree = QetNode::combine(tree->op(), std::move(children), std::move(root->semantics));
  }

  QueryEvaluationTree t{std::move(queryId), std::move(tree)};
  check_well_formed(t);
  return t;
}

QueryEvaluationTree parse_plan(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    lines.push_back(text.substr(start, nl == std::string_view::npos ? text.npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  std::size_t pos = 0;
  auto t = parse_plan_lines(lines, pos);
  for (; pos < lines.size(); ++pos) {
    const auto l = trim(lines[pos]);
    if (!l.empty() && !l.starts_with('#')) throw ParseError("trailing content after 'end'", pos + 1);
  }
  return t;
}

std::string write_plan(const QueryEvaluationTree& t) {
  if (!t.root) throw StructureError("cannot write a tree without a root");
  std::string out = fmt::format("{} {}\nquery {}\n", kPlanMagic, kPlanVersion, t.queryId);
  for (const QetNode* l : leaves(*t.root)) {
    out += "subquery " + l->id() + "\n";
    write_descriptor(out, l->semantics());
    if (l->address()) out += "  address " + *l->address() + "\n";
  }
  if (!t.root->is_leaf()) {
    const auto derived = merge_semantics(t.root->children());
    if (!same_semantics(derived, t.root->semantics()) || derived.resultVolumeGB != t.root->volume()) {
      out += "root\n";
      write_descriptor(out, t.root->semantics());
    }
  }
  out += "expr " + t.root->expr() + "\nend\n";
  return out;
}

}  // namespace sqf
