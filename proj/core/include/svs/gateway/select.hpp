#pragma once

// Minimal SQL SELECT dialect used by gateway rules:
//
//   stmt       := "SELECT" proj "FROM" quoted_topic_filter ["WHERE" expr]
//   proj       := "*" | ident {"," ident}
//   expr       := term {("AND" | "OR") term}      (AND binds tighter)
//   term       := ["NOT"] (comparison | "(" expr ")")
//   comparison := ident op literal
//   op         := "=" | "!=" | "<" | "<=" | ">" | ">="
//   literal    := number | quoted string | "true" | "false"
//
// Keywords are case-insensitive; identifiers are normalized to lower case.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "svs/domain.hpp"
#include "svs/error.hpp"

namespace svs::gateway {

class SelectSyntaxError : public ParseError {
 public:
  SelectSyntaxError(const std::string& what, std::size_t offset)
      : ParseError("offset " + std::to_string(offset) + ": " + what, 0), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class RuleEvaluationError : public Error {
 public:
  using Error::Error;
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CompareOp op);

using Literal = std::variant<double, std::string, bool>;

struct Comparison {
  std::string field;
  CompareOp op = CompareOp::Eq;
  Literal literal;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Compare, And, Or, Not };
  Kind kind = Kind::Compare;
  Comparison comparison;  // Compare only
  ExprPtr lhs;            // And/Or/Not
  ExprPtr rhs;            // And/Or
};

struct SelectStatement {
  bool select_all = false;
  std::vector<std::string> fields;
  std::string from;  // topic filter
  ExprPtr where;     // null when absent

  // Fields referenced by the projection and the predicate.
  std::vector<std::string> referenced_fields() const;
};

SelectStatement parse_select(std::string_view text);

// Canonical text form, stable for golden tests.
std::string to_string(const SelectStatement& stmt);
std::string to_string(const Expr& expr);

// Throws RuleEvaluationError on a missing field or a type mismatch.
bool evaluate(const Expr& expr, const Json& message);
// Projected copy of `message`; the input is never modified.
Json project(const SelectStatement& stmt, const Json& message);

}  // namespace svs::gateway
