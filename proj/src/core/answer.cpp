#include "stepsearch/core/answer.hpp"

#include <cctype>

#include <boost/multiprecision/cpp_int.hpp>

namespace stepsearch {
namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

std::string strip_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (!std::isspace(c)) out.push_back(static_cast<char>(c));
  }
  return out;
}

// Strips a single \boxed{...} when it spans the whole string.
std::string strip_boxed(const std::string& s) {
  constexpr std::string_view opener = "\\boxed{";
  if (s.size() < opener.size() + 1 || s.compare(0, opener.size(), opener) != 0 ||
      s.back() != '}') {
    return s;
  }
  int depth = 0;
  for (std::size_t i = opener.size() - 1; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) {
      if (i + 1 != s.size()) return s;
      return s.substr(opener.size(), s.size() - opener.size() - 1);
    }
  }
  return s;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (!std::isdigit(c)) return false;
  }
  return true;
}

// cpp_int reads a leading 0 as an octal prefix.
cpp_int decimal(std::string_view digits) {
  cpp_int out = 0;
  for (char c : digits) out = out * 10 + (c - '0');
  return out;
}

std::optional<cpp_rational> parse_unsigned_number(std::string_view s) {
  if (all_digits(s)) return cpp_rational(decimal(s));
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    auto whole = s.substr(0, dot);
    auto frac = s.substr(dot + 1);
    if ((!whole.empty() && !all_digits(whole)) || !all_digits(frac)) {
      return std::nullopt;
    }
    cpp_int num = decimal(std::string(whole) + std::string(frac));
    cpp_int den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    return cpp_rational(num, den);
  }
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    auto a = s.substr(0, slash);
    auto b = s.substr(slash + 1);
    if (!all_digits(a) || !all_digits(b)) return std::nullopt;
    cpp_int den = decimal(b);
    if (den == 0) return std::nullopt;
    return cpp_rational(decimal(a), den);
  }
  for (std::string_view frac : {"\\frac{", "\\dfrac{", "\\tfrac{"}) {
    if (s.substr(0, frac.size()) != frac) continue;
    auto rest = s.substr(frac.size());
    auto mid = rest.find("}{");
    if (mid == std::string_view::npos || rest.empty() || rest.back() != '}') {
      return std::nullopt;
    }
    auto a = rest.substr(0, mid);
    auto b = rest.substr(mid + 2, rest.size() - mid - 3);
    if (!all_digits(a) || !all_digits(b)) return std::nullopt;
    cpp_int den = decimal(b);
    if (den == 0) return std::nullopt;
    return cpp_rational(decimal(a), den);
  }
  return std::nullopt;
}

std::string render(const cpp_rational& r) {
  auto num = boost::multiprecision::numerator(r);
  auto den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

std::optional<std::string> numeric_key_of_stripped(const std::string& s) {
  std::string_view body = s;
  bool negative = false;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  auto value = parse_unsigned_number(body);
  if (!value) return std::nullopt;
  if (negative) *value = -*value;
  return render(*value);
}

}  // namespace

std::optional<std::string> numeric_answer_key(std::string_view answer) {
  return numeric_key_of_stripped(strip_boxed(strip_whitespace(answer)));
}

std::string canonical_answer(std::string_view answer) {
  std::string s = strip_boxed(strip_whitespace(answer));
  if (auto key = numeric_key_of_stripped(s)) return *key;
  return s;
}

bool answers_match(std::string_view a, std::string_view b) {
  return canonical_answer(a) == canonical_answer(b);
}

}  // namespace stepsearch
