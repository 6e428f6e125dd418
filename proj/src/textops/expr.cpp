#include "stepsearch/textops/expr.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "stepsearch/core/error.hpp"

namespace stepsearch::textops {

using boost::multiprecision::cpp_int;

double Number::to_double() const {
  if (is_exact()) return exact().convert_to<double>();
  return std::get<double>(value_);
}

std::string Number::to_string() const {
  if (is_exact()) {
    const auto& r = exact();
    auto den = boost::multiprecision::denominator(r);
    auto num = boost::multiprecision::numerator(r);
    return den == 1 ? num.str() : num.str() + "/" + den.str();
  }
  std::ostringstream os;
  os.precision(17);
  os << std::get<double>(value_);
  return os.str();
}

Expr Expr::integer(long long v) {
  Expr e;
  e.kind = ExprKind::Integer;
  e.literal = Number(Rational(v));
  return e;
}

Expr Expr::decimal(double v) {
  Expr e;
  e.kind = ExprKind::Decimal;
  e.literal = Number(v);
  return e;
}

Expr Expr::unary(ExprKind kind, Expr operand) {
  Expr e;
  e.kind = kind;
  e.children.push_back(std::move(operand));
  return e;
}

Expr Expr::binary(ExprKind kind, Expr lhs, Expr rhs) {
  Expr e;
  e.kind = kind;
  e.children.push_back(std::move(lhs));
  e.children.push_back(std::move(rhs));
  return e;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::ParseError,
                why + " at offset " + std::to_string(pos_) + " in '" +
                    std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(std::string_view token) {
    skip_space();
    if (text_.substr(pos_, token.size()) == token) {
      // \times must not be the prefix of a longer command such as \timesx.
      if (token.front() == '\\' && pos_ + token.size() < text_.size() &&
          std::isalpha(static_cast<unsigned char>(text_[pos_ + token.size()]))) {
        return false;
      }
      pos_ += token.size();
      return true;
    }
    return false;
  }

  bool accept_minus() { return accept("-") || accept("\xE2\x88\x92"); }
  bool accept_times() {
    return accept("*") || accept("\xC3\x97") || accept("\\times") || accept("\\cdot");
  }
  bool accept_divide() { return accept("/") || accept("\xC3\xB7") || accept("\\div"); }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept("+")) {
        lhs = Expr::binary(ExprKind::Add, std::move(lhs), parse_product());
      } else if (accept_minus()) {
        lhs = Expr::binary(ExprKind::Sub, std::move(lhs), parse_product());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept_times()) {
        lhs = Expr::binary(ExprKind::Mul, std::move(lhs), parse_unary());
      } else if (accept_divide()) {
        lhs = Expr::binary(ExprKind::Div, std::move(lhs), parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept_minus()) return Expr::unary(ExprKind::Negate, parse_unary());
    if (accept("+")) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept("^")) {
      return Expr::binary(ExprKind::Pow, std::move(base), parse_unary());
    }
    return base;
  }

  Expr parse_primary() {
    if (accept("(")) return parse_group(")");
    if (accept("{")) return parse_group("}");
    skip_space();
    return parse_number();
  }

  Expr parse_group(std::string_view closer) {
    skip_space();
    if (text_.substr(pos_, closer.size()) == closer) fail("empty group");
    Expr inner = parse_sum();
    if (!accept(closer)) fail("expected '" + std::string(closer) + "'");
    return Expr::unary(ExprKind::Group, std::move(inner));
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digit_run = [&] {
      const std::size_t from = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
      return pos_ - from;
    };
    const std::size_t whole = digit_run();
    std::size_t frac = 0;
    bool has_point = false;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      has_point = true;
      ++pos_;
      frac = digit_run();
      if (frac == 0) fail("expected digits after decimal point");
    }
    if (whole == 0 && frac == 0) fail("expected a number");
    const std::string literal(text_.substr(start, pos_ - start));
    Expr e;
    if (has_point) {
      e.kind = ExprKind::Decimal;
      e.literal = Number(std::stod(literal));
    } else {
      e.kind = ExprKind::Integer;
      // Built digit by digit: cpp_int reads a leading 0 as octal.
      cpp_int v = 0;
      for (char c : literal) v = v * 10 + (c - '0');
      e.literal = Number(Rational(v));
    }
    return e;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

[[noreturn]] void overflow(const std::string& what) {
  throw Error(ErrorKind::Overflow, what);
}

Number checked(Rational r) {
  if (boost::multiprecision::msb(abs(boost::multiprecision::numerator(r)) + 1) > kMaxBits ||
      boost::multiprecision::msb(boost::multiprecision::denominator(r)) > kMaxBits) {
    overflow("rational result exceeds " + std::to_string(kMaxBits) + " bits");
  }
  return Number(std::move(r));
}

Number checked(double d) {
  if (std::isnan(d)) throw Error(ErrorKind::DomainError, "result is not a number");
  if (std::isinf(d)) overflow("floating-point result is infinite");
  return Number(d);
}

unsigned bit_length(const cpp_int& v) {
  return v == 0 ? 0 : boost::multiprecision::msb(abs(v)) + 1;
}

Number power(const Number& base, const Number& exponent) {
  if (base.is_exact() && exponent.is_exact() &&
      boost::multiprecision::denominator(exponent.exact()) == 1) {
    const cpp_int e = boost::multiprecision::numerator(exponent.exact());
    const Rational& b = base.exact();
    if (b == 0) {
      if (e < 0) throw Error(ErrorKind::DivisionByZero, "zero raised to a negative power");
      return Number(Rational(e == 0 ? 1 : 0));
    }
    const auto num = boost::multiprecision::numerator(b);
    const auto den = boost::multiprecision::denominator(b);
    if (abs(num) == 1 && den == 1) {
      const bool odd = (e % 2) != 0;
      return Number(Rational(num < 0 && odd ? -1 : 1));
    }
    const cpp_int magnitude = abs(e);
    const unsigned bits = std::max(bit_length(num), bit_length(den));
    if (magnitude > kMaxBits || (bits - 1) * magnitude.convert_to<unsigned>() > kMaxBits) {
      overflow("exact power exceeds " + std::to_string(kMaxBits) + " bits");
    }
    const auto k = magnitude.convert_to<unsigned>();
    cpp_int pn = boost::multiprecision::pow(num, k);
    cpp_int pd = boost::multiprecision::pow(den, k);
    if (e < 0) std::swap(pn, pd);
    return checked(Rational(pn, pd));
  }
  return checked(std::pow(base.to_double(), exponent.to_double()));
}

}  // namespace

Expr parse_expr(std::string_view text) { return Parser(text).parse(); }

std::optional<Expr> try_parse_expr(std::string_view text) {
  try {
    return parse_expr(text);
  } catch (const Error&) {
    return std::nullopt;
  } catch (const std::out_of_range&) {  // stod on an absurd literal
    return std::nullopt;
  }
}

Number eval_expr(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Integer:
    case ExprKind::Decimal:
      return e.literal;
    case ExprKind::Group:
      return eval_expr(e.children.at(0));
    case ExprKind::Negate: {
      Number v = eval_expr(e.children.at(0));
      return v.is_exact() ? Number(Rational(-v.exact())) : Number(-v.to_double());
    }
    default:
      break;
  }
  const Number a = eval_expr(e.children.at(0));
  const Number b = eval_expr(e.children.at(1));
  const bool exact = a.is_exact() && b.is_exact();
  switch (e.kind) {
    case ExprKind::Add:
      return exact ? checked(a.exact() + b.exact()) : checked(a.to_double() + b.to_double());
    case ExprKind::Sub:
      return exact ? checked(a.exact() - b.exact()) : checked(a.to_double() - b.to_double());
    case ExprKind::Mul:
      return exact ? checked(a.exact() * b.exact()) : checked(a.to_double() * b.to_double());
    case ExprKind::Div:
      if (b.is_exact() ? b.exact() == 0 : b.to_double() == 0.0) {
        throw Error(ErrorKind::DivisionByZero, "division by zero");
      }
      return exact ? checked(a.exact() / b.exact()) : checked(a.to_double() / b.to_double());
    case ExprKind::Pow:
      return power(a, b);
    default:
      break;
  }
  throw Error(ErrorKind::ParseError, "malformed expression node");
}

std::string to_string(const Expr& e) {
  auto bin = [&](const char* op) {
    return to_string(e.children.at(0)) + " " + op + " " + to_string(e.children.at(1));
  };
  switch (e.kind) {
    case ExprKind::Integer:
      return e.literal.to_string();
    case ExprKind::Decimal: {
      std::ostringstream os;
      os.precision(17);
      os << std::fixed << e.literal.to_double();
      std::string s = os.str();
      // Trim trailing zeros while keeping at least one fractional digit.
      while (s.size() > 2 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
      return s;
    }
    case ExprKind::Group:
      return "(" + to_string(e.children.at(0)) + ")";
    case ExprKind::Negate:
      return "-" + to_string(e.children.at(0));
    case ExprKind::Add: return bin("+");
    case ExprKind::Sub: return bin("-");
    case ExprKind::Mul: return bin("*");
    case ExprKind::Div: return bin("/");
    case ExprKind::Pow: return bin("^");
  }
  return {};
}

}  // namespace stepsearch::textops
