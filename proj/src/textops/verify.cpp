#include "stepsearch/textops/verify.hpp"

#include <cctype>
#include <cmath>

#include "stepsearch/core/error.hpp"

namespace stepsearch::textops {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Characters that may sit directly before an expression.
bool left_boundary(char c) {
  return is_space(c) || c == ',' || c == ';' || c == ':' || c == '(' ||
         c == '[' || c == '{' || c == '$';
}

// Characters that may sit directly after an expression. A '.' counts only as
// sentence punctuation, i.e. when no digit follows.
bool right_boundary(std::string_view text, std::size_t pos) {
  const char c = text[pos];
  if (c == '.') return pos + 1 >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos + 1]));
  return is_space(c) || c == ',' || c == ';' || c == ':' || c == ')' ||
         c == ']' || c == '}' || c == '$' || c == '!' || c == '?';
}

bool can_start_expr(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == '(' || c == '{' ||
         c == '-' || c == '+' || c == '.' || c == '\xE2';
}

bool is_operator_at(std::string_view text, std::size_t i) {
  const char c = text[i];
  if (c == '+' || c == '-' || c == '*' || c == '/' || c == '^' || c == '=' || c == '\\') {
    return true;
  }
  // U+2212, U+00D7, U+00F7 (last byte of their UTF-8 encodings).
  if (i >= 2 && text.substr(i - 2, 3) == "\xE2\x88\x92") return true;
  if (i >= 1 && (text.substr(i - 1, 2) == "\xC3\x97" || text.substr(i - 1, 2) == "\xC3\xB7")) {
    return true;
  }
  return false;
}

bool is_sign_start(std::string_view text, std::size_t i) {
  return text[i] == '+' || text[i] == '-' || text.substr(i, 3) == "\xE2\x88\x92";
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Rejects starts that would cut an expression in half ("x - 3" must not
// yield "- 3" or "3"). A leading sign is allowed after a word of two or more
// letters but not after a lone letter, which reads as a variable.
bool acceptable_left_context(std::string_view text, std::size_t region_begin,
                             std::size_t start) {
  std::size_t p = start;
  while (p > region_begin && is_space(text[p - 1])) --p;
  if (p == region_begin) return true;
  const std::size_t prev = p - 1;
  const char c = text[prev];
  if (std::isdigit(static_cast<unsigned char>(c)) || c == ')' || c == '.' ||
      is_operator_at(text, prev)) {
    return false;
  }
  if (is_sign_start(text, start) && is_alpha(c)) {
    return prev > region_begin && is_alpha(text[prev - 1]);
  }
  return true;
}

bool acceptable_right_context(std::string_view text, std::size_t region_end,
                              std::size_t end) {
  std::size_t p = end;
  while (p < region_end && is_space(text[p])) ++p;
  if (p >= region_end) return true;
  const char c = text[p];
  if (std::isdigit(static_cast<unsigned char>(c)) || c == '(') return false;
  if (is_operator_at(text, p)) return false;
  // First byte of a multibyte operator.
  if (text.substr(p, 3) == "\xE2\x88\x92" || text.substr(p, 2) == "\xC3\x97" ||
      text.substr(p, 2) == "\xC3\xB7") {
    return false;
  }
  return true;
}

Span trim(std::string_view text, Span s) {
  while (s.begin < s.end && is_space(text[s.begin])) ++s.begin;
  while (s.end > s.begin && is_space(text[s.end - 1])) --s.end;
  return s;
}

bool is_equals_sign(std::string_view text, std::size_t i) {
  if (text[i] != '=') return false;
  if (i > 0 && (text[i - 1] == '<' || text[i - 1] == '>' || text[i - 1] == '!' ||
                text[i - 1] == '=')) {
    return false;
  }
  if (i + 1 < text.size() && text[i + 1] == '=') return false;
  return true;
}

std::optional<Span> longest_suffix(std::string_view text, Span region) {
  for (std::size_t start = region.begin; start < region.end; ++start) {
    if (!can_start_expr(text[start])) continue;
    if (start > region.begin && !left_boundary(text[start - 1])) continue;
    if (!acceptable_left_context(text, region.begin, start)) continue;
    Span s = trim(text, {start, region.end});
    if (s.begin == s.end) continue;
    if (try_parse_expr(text.substr(s.begin, s.end - s.begin))) return s;
  }
  return std::nullopt;
}

std::optional<Span> longest_prefix(std::string_view text, Span region) {
  Span lead = trim(text, region);
  if (lead.begin == lead.end || !can_start_expr(text[lead.begin])) return std::nullopt;
  for (std::size_t end = region.end; end > lead.begin; --end) {
    if (end < region.end && !right_boundary(text, end)) continue;
    Span s = trim(text, {lead.begin, end});
    if (s.begin == s.end) continue;
    if (!acceptable_right_context(text, region.end, s.end)) continue;
    if (try_parse_expr(text.substr(s.begin, s.end - s.begin))) return s;
  }
  return std::nullopt;
}

}  // namespace

std::vector<Equation> extract_equations(std::string_view body) {
  std::vector<std::size_t> signs;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (is_equals_sign(body, i)) signs.push_back(i);
  }
  std::vector<Equation> out;
  for (std::size_t k = 0; k < signs.size(); ++k) {
    const std::size_t left_begin = k == 0 ? 0 : signs[k - 1] + 1;
    const std::size_t right_end = k + 1 < signs.size() ? signs[k + 1] : body.size();
    auto lhs = longest_suffix(body, {left_begin, signs[k]});
    if (!lhs) continue;
    auto rhs = longest_prefix(body, {signs[k] + 1, right_end});
    if (!rhs) continue;
    out.push_back(Equation{std::string(body.substr(lhs->begin, lhs->end - lhs->begin)),
                           std::string(body.substr(rhs->begin, rhs->end - rhs->begin)),
                           Span{lhs->begin, rhs->end}});
  }
  return out;
}

bool numbers_match(const Number& recomputed, const Number& claimed) {
  if (recomputed.is_exact() && claimed.is_exact()) {
    return recomputed.exact() == claimed.exact();
  }
  const double a = recomputed.to_double();
  const double b = claimed.to_double();
  if (a == b) return true;
  const double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= kRelativeTolerance * scale;
}

std::vector<EquationCheck> verify_step(const Step& step) {
  std::vector<EquationCheck> checks;
  for (auto& eq : extract_equations(step.body)) {
    EquationCheck check;
    check.source_span = eq.span;
    check.lhs_text = std::move(eq.lhs_text);
    check.rhs_text = std::move(eq.rhs_text);
    try {
      check.recomputed_value = eval_expr(parse_expr(check.lhs_text));
      check.claimed_value = eval_expr(parse_expr(check.rhs_text));
      check.matches = numbers_match(*check.recomputed_value, *check.claimed_value);
    } catch (const Error& e) {
      check.matches = false;
      check.note = std::string(to_string(e.kind())) + ": " + e.what();
    }
    checks.push_back(std::move(check));
  }
  return checks;
}

bool has_mismatch(const Step& step) {
  for (const auto& c : verify_step(step)) {
    if (!c.matches) return true;
  }
  return false;
}

}  // namespace stepsearch::textops
