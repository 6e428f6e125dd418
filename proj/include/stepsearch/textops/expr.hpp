#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace stepsearch::textops {

using Rational = boost::multiprecision::cpp_rational;

// Exact rational, or a double once a decimal literal or a fractional
// exponent is involved.
class Number {
 public:
  Number() : value_(Rational(0)) {}
  Number(Rational r) : value_(std::move(r)) {}  // NOLINT: implicit by design of literals
  Number(double d) : value_(d) {}                // NOLINT

  bool is_exact() const { return std::holds_alternative<Rational>(value_); }
  const Rational& exact() const { return std::get<Rational>(value_); }
  double to_double() const;
  std::string to_string() const;

  bool operator==(const Number&) const = default;

 private:
  std::variant<Rational, double> value_;
};

enum class ExprKind { Integer, Decimal, Negate, Add, Sub, Mul, Div, Pow, Group };

struct Expr {
  ExprKind kind = ExprKind::Integer;
  Number literal;  // Integer and Decimal only
  std::vector<Expr> children;

  static Expr integer(long long v);
  static Expr decimal(double v);
  static Expr unary(ExprKind kind, Expr operand);
  static Expr binary(ExprKind kind, Expr lhs, Expr rhs);

  bool operator==(const Expr&) const = default;
};

// Grammar: + - (also U+2212), * × \times \cdot, / ÷, ^ (right associative,
// binds tighter than unary minus), ( ) and { } groups, integer and decimal
// literals. Throws Error(ParseError) unless the whole input is consumed.
Expr parse_expr(std::string_view text);
std::optional<Expr> try_parse_expr(std::string_view text);

// Integer powers stay exact; fractional exponents go through pow(). Throws
// Error(DivisionByZero), Error(Overflow) for results beyond kMaxBits or
// non-finite doubles, and Error(DomainError) for NaN results.
Number eval_expr(const Expr& expr);

inline constexpr unsigned kMaxBits = 4096;

// ASCII rendering that parse_expr accepts. Parsing it back yields the same
// value; it yields the same tree when precedence is spelled out with Group
// nodes and literals are non-negative, as in trees produced by parse_expr.
std::string to_string(const Expr& expr);

}  // namespace stepsearch::textops
