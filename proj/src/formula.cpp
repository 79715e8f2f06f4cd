// SPDX-License-Identifier: Apache-2.0

#include "deadannot/formula.hpp"

#include <cctype>
#include <vector>

namespace deadannot {

struct Formula::Node {
  Op op = Op::constant;
  bool value = true;
  std::string name;
  std::vector<Formula> children;
};

Formula Formula::constant(bool value) {
  auto node = std::make_shared<Node>();
  node->op = Op::constant;
  node->value = value;
  return Formula(std::move(node));
}

Formula Formula::variable(std::string name) {
  auto node = std::make_shared<Node>();
  node->op = Op::variable;
  node->name = std::move(name);
  return Formula(std::move(node));
}

Formula Formula::negation(Formula operand) {
  auto node = std::make_shared<Node>();
  node->op = Op::negation;
  node->children.push_back(std::move(operand));
  return Formula(std::move(node));
}

Formula Formula::conjunction(Formula lhs, Formula rhs) {
  auto node = std::make_shared<Node>();
  node->op = Op::conjunction;
  node->children = {std::move(lhs), std::move(rhs)};
  return Formula(std::move(node));
}

Formula Formula::disjunction(Formula lhs, Formula rhs) {
  auto node = std::make_shared<Node>();
  node->op = Op::disjunction;
  node->children = {std::move(lhs), std::move(rhs)};
  return Formula(std::move(node));
}

Formula::Op Formula::op() const { return node_->op; }

bool Formula::evaluate(const std::function<bool(const std::string&)>& present) const {
  switch (node_->op) {
    case Op::constant: return node_->value;
    case Op::variable: return present(node_->name);
    case Op::negation: return !node_->children[0].evaluate(present);
    case Op::conjunction:
      return node_->children[0].evaluate(present) && node_->children[1].evaluate(present);
    case Op::disjunction:
      return node_->children[0].evaluate(present) || node_->children[1].evaluate(present);
  }
  return false;
}

bool Formula::monotone() const {
  if (node_->op == Op::negation) return false;
  for (const auto& c : node_->children) {
    if (!c.monotone()) return false;
  }
  return true;
}

void Formula::collect_variables(std::set<std::string>& out) const {
  if (node_->op == Op::variable) out.insert(node_->name);
  for (const auto& c : node_->children) c.collect_variables(out);
}

Formula Formula::substitute(const std::function<Formula(const std::string&)>& replace) const {
  switch (node_->op) {
    case Op::constant: return *this;
    case Op::variable: return replace(node_->name);
    case Op::negation: return negation(node_->children[0].substitute(replace));
    case Op::conjunction:
      return conjunction(node_->children[0].substitute(replace),
                         node_->children[1].substitute(replace));
    case Op::disjunction:
      return disjunction(node_->children[0].substitute(replace),
                         node_->children[1].substitute(replace));
  }
  return *this;
}

std::string Formula::to_string() const {
  switch (node_->op) {
    case Op::constant: return node_->value ? "true" : "false";
    case Op::variable: return node_->name;
    case Op::negation: return "!" + node_->children[0].to_string();
    case Op::conjunction:
      return "(" + node_->children[0].to_string() + " & " + node_->children[1].to_string() + ")";
    case Op::disjunction:
      return "(" + node_->children[0].to_string() + " | " + node_->children[1].to_string() + ")";
  }
  return {};
}

namespace {

bool is_id_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == ':' ||
         c == '.' || c == '?' || static_cast<unsigned char>(c) >= 0x80;
}

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : text_(text) {}

  Formula parse() {
    Formula f = parse_or();
    skip_blanks();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw FormulaError(message + " at position " + std::to_string(pos_), pos_);
  }

  void skip_blanks() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_blanks();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Formula parse_or() {
    Formula lhs = parse_and();
    while (accept('|')) lhs = Formula::disjunction(lhs, parse_and());
    return lhs;
  }

  Formula parse_and() {
    Formula lhs = parse_unary();
    while (accept('&')) lhs = Formula::conjunction(lhs, parse_unary());
    return lhs;
  }

  Formula parse_unary() {
    if (accept('!')) return Formula::negation(parse_unary());
    if (accept('(')) {
      Formula inner = parse_or();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    skip_blanks();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_id_char(text_[pos_])) ++pos_;
    if (pos_ == start) {
      if (pos_ >= text_.size()) fail("unexpected end of formula");
      fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    }
    const std::string word(text_.substr(start, pos_ - start));
    if (word == "true") return Formula::constant(true);
    if (word == "false") return Formula::constant(false);
    return Formula::variable(word);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Formula parse_formula(std::string_view text) { return FormulaParser(text).parse(); }

}  // namespace deadannot
