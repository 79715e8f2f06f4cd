// SPDX-License-Identifier: Apache-2.0
//
// Boolean formulas over annotation-presence variables.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace deadannot {

class FormulaError : public std::runtime_error {
 public:
  FormulaError(std::string message, std::size_t position)
      : std::runtime_error(std::move(message)), position_(position) {}
  /// 0-based character position in the formula text.
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Immutable formula tree. Copies share structure.
class Formula {
 public:
  enum class Op { constant, variable, negation, conjunction, disjunction };

  static Formula constant(bool value);
  static Formula variable(std::string name);
  static Formula negation(Formula operand);
  static Formula conjunction(Formula lhs, Formula rhs);
  static Formula disjunction(Formula lhs, Formula rhs);

  Formula() : Formula(constant(true)) {}

  Op op() const;
  bool evaluate(const std::function<bool(const std::string&)>& present) const;
  /// True iff the formula contains no negation.
  bool monotone() const;
  void collect_variables(std::set<std::string>& out) const;
  /// Replaces every variable by `replace(name)`.
  Formula substitute(const std::function<Formula(const std::string&)>& replace) const;
  /// Fully parenthesized rendering accepted by parse_formula.
  std::string to_string() const;

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parses `true | false | ID | !f | f & f | f | f | (f)`; `!` binds
/// tightest, then `&`, then `|`.
Formula parse_formula(std::string_view text);

}  // namespace deadannot
