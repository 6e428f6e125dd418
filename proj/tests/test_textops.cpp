#include <doctest.h>

#include <fstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "stepsearch/core/error.hpp"
#include "stepsearch/core/rng.hpp"
#include "stepsearch/textops/expr.hpp"
#include "stepsearch/textops/format.hpp"
#include "stepsearch/textops/verify.hpp"
#include "oracles.hpp"

using namespace stepsearch;
using namespace stepsearch::textops;
using boost::multiprecision::cpp_rational;
using oracles::random_expr;
using oracles::random_solution;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("format and parse round trip on random solutions") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_solution(rng);
    const auto text = format_solution(s);
    const auto back = parse_solution(text);
    CAPTURE(text);
    CHECK(back.rephrasing == s.rephrasing);
    CHECK(back.steps == s.steps);
    CHECK(back.final_answer == s.final_answer);
    CHECK(back.raw_text == text);
    CHECK(format_solution(back) == text);
  }
}

TEST_CASE("parse_solution reads both header spellings and keeps indices") {
  const auto s = parse_solution(
      "**Problem Formulation**\nAdd the numbers.\n\n**Step 1. Setup**\nWe add.\n\n"
      "**Step 3: Sum**\n2 + 2 = 4\n\n**Final Answer**\n\\boxed{4}");
  CHECK(s.rephrasing == "Add the numbers.");
  REQUIRE(s.steps.size() == 2);
  CHECK(s.steps[0] == Step{1, "Setup", "We add."});
  CHECK(s.steps[1] == Step{3, "Sum", "2 + 2 = 4"});
  CHECK(s.final_answer == std::optional<std::string>("4"));
}

TEST_CASE("parse_solution tolerates CRLF line endings") {
  const auto s = parse_solution("**Step 1: A**\r\nbody\r\n\r\n**Final Answer**\r\n\\boxed{7}\r\n");
  REQUIRE(s.steps.size() == 1);
  CHECK(s.steps[0].title == "A");
  CHECK(s.final_answer == std::optional<std::string>("7"));
}

TEST_CASE("parse_solution without a final answer leaves it empty") {
  const auto s = parse_solution("**Step 1: A**\nstill working");
  CHECK_FALSE(s.final_answer.has_value());
  CHECK_FALSE(has_final_answer(s.raw_text));
}

TEST_CASE("parse_solution rejects text without structure") {
  CHECK(kind_of([] { parse_solution("just some prose"); }) == ErrorKind::MalformedFormat);
  CHECK(kind_of([] { parse_solution("**Step 1: A**\n\\boxed{1"); }) == ErrorKind::MalformedFormat);
  CHECK(kind_of([] { parse_solution("**Step x: A**\nbody"); }) == ErrorKind::MalformedFormat);
}

TEST_CASE("extract_boxed takes the last box and keeps nesting") {
  CHECK(extract_boxed("a \\boxed{1} b \\boxed{2}") == std::optional<std::string>("2"));
  CHECK(extract_boxed("\\boxed{\\frac{1}{2}}") == std::optional<std::string>("\\frac{1}{2}"));
  CHECK(extract_boxed("\\boxed{{a}{b{c}}} tail") == std::optional<std::string>("{a}{b{c}}"));
  CHECK(extract_boxed("\\boxed{}") == std::optional<std::string>(""));
  CHECK_FALSE(extract_boxed("no box here").has_value());
  CHECK(kind_of([] { extract_boxed("\\boxed{1} \\boxed{2"); }) == ErrorKind::UnbalancedBraces);
  CHECK(kind_of([] { extract_boxed("\\boxed{{1}"); }) == ErrorKind::UnbalancedBraces);
  CHECK(has_final_answer("so \\boxed{3}"));
  CHECK_FALSE(has_final_answer("so \\boxed{3"));
}

TEST_CASE("format_prefix omits the final answer block") {
  const std::vector<Step> steps = {{1, "A", "x"}, {2, "B", "y"}};
  CHECK(format_prefix("", steps) == "**Step 1: A**\nx\n\n**Step 2: B**\ny");
  CHECK(format_prefix("R", {}) == "**Problem Formulation**\nR");
}

TEST_CASE("is_clean_text") {
  CHECK(is_clean_text("plain\ttext\nwith café and ×"));
  CHECK_FALSE(is_clean_text(std::string("nul\0byte", 8)));
  CHECK_FALSE(is_clean_text("\x7f"));
  CHECK_FALSE(is_clean_text("\xc3"));
  CHECK_FALSE(is_clean_text("\xc0\xaf"));
  CHECK_FALSE(is_clean_text("\xed\xa0\x80"));
  CHECK_FALSE(is_clean_text("\xff"));
}

TEST_CASE("expression precedence and notation") {
  auto value = [](const char* s) { return eval_expr(parse_expr(s)); };
  CHECK(value("2 * 3 + 4").exact() == 10);
  CHECK(value("2 + 3 * 4").exact() == 14);
  CHECK(value("(1 + 2) * 3").exact() == 9);
  CHECK(value("2^3^2").exact() == 512);
  CHECK(value("-2^2").exact() == -4);
  CHECK(value("10 - 3 - 2").exact() == 5);
  CHECK(value("24 / 4 / 3").exact() == 2);
  CHECK(value("7 / 2").exact() == cpp_rational(7, 2));
  CHECK(value("2^-1").exact() == cpp_rational(1, 2));
  CHECK(value("6 × 7").exact() == 42);
  CHECK(value("8 ÷ 2").exact() == 4);
  CHECK(value("5 − 3").exact() == 2);
  CHECK(value("3 \\times 4").exact() == 12);
  CHECK(value("3 \\cdot 4").exact() == 12);
  CHECK(value("{2 + 3} * 2").exact() == 10);
  CHECK(value("010").exact() == 10);
  CHECK_FALSE(value("1.5").is_exact());
  CHECK(value("1.5 * 2").to_double() == doctest::Approx(3.0));
  CHECK(value("4^0.5").to_double() == doctest::Approx(2.0));
  CHECK(value("(-1)^1000001").exact() == -1);
}

TEST_CASE("expression errors carry their kind") {
  CHECK(kind_of([] { eval_expr(parse_expr("1/0")); }) == ErrorKind::DivisionByZero);
  CHECK(kind_of([] { eval_expr(parse_expr("1/(2-2)")); }) == ErrorKind::DivisionByZero);
  CHECK(kind_of([] { eval_expr(parse_expr("0^-1")); }) == ErrorKind::DivisionByZero);
  CHECK(kind_of([] { eval_expr(parse_expr("2^100000")); }) == ErrorKind::Overflow);
  CHECK(kind_of([] { eval_expr(parse_expr("10.0^400")); }) == ErrorKind::Overflow);
  CHECK(kind_of([] { eval_expr(parse_expr("(0-8)^0.5")); }) == ErrorKind::DomainError);
  for (const char* bad : {"", "1 +", "(1", "1)", "* 2", "1..2", "abc", "2 3"}) {
    CAPTURE(bad);
    CHECK(kind_of([bad] { parse_expr(bad); }) == ErrorKind::ParseError);
    CHECK_FALSE(try_parse_expr(bad).has_value());
  }
}

TEST_CASE("random expressions agree with an exact rational oracle") {
  Rng rng(77);
  int checked_values = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto g = random_expr(rng, 4);
    CAPTURE(g.text);
    const Expr e = parse_expr(g.text);
    if (!g.value) {
      CHECK(kind_of([&] { eval_expr(e); }) == ErrorKind::DivisionByZero);
      continue;
    }
    const Number n = eval_expr(e);
    REQUIRE(n.is_exact());
    CHECK(n.exact() == *g.value);
    // The library's own rendering parses back to the same value.
    CHECK(eval_expr(parse_expr(to_string(e))).exact() == *g.value);
    ++checked_values;
  }
  CHECK(checked_values > 1000);
}

TEST_CASE("to_string of parsed trees is a fixed point") {
  for (const char* s : {"1 + 2 * 3", "(1 + 2) * 3", "2^3^2", "-(4 - 5)", "1.25 / 0.5", "{7}"}) {
    const Expr e = parse_expr(s);
    CHECK(parse_expr(to_string(e)) == e);
  }
  const Expr built = Expr::binary(ExprKind::Add, Expr::integer(1),
                                  Expr::unary(ExprKind::Group, Expr::binary(ExprKind::Mul, Expr::integer(2),
                                                                            Expr::decimal(0.5))));
  CHECK(eval_expr(parse_expr(to_string(built))).to_double() == doctest::Approx(2.0));
}

TEST_CASE("equation fixture: every true equation passes and every perturbed one fails") {
  std::ifstream in(std::string(STEPSEARCH_FIXTURES) + "/equations.txt");
  REQUIRE(in.good());
  std::string line;
  int rows = 0, agreed = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    const bool expected = line[0] == '1';
    const Step step{1, "Check", line.substr(2)};
    const auto checks = verify_step(step);
    CAPTURE(line);
    REQUIRE(checks.size() == 1);
    CHECK(checks[0].matches == expected);
    CHECK(has_mismatch(step) == !expected);
    if (checks[0].matches == expected) ++agreed;
  }
  CHECK(rows == 50);
  CHECK(agreed == 50);
}

TEST_CASE("equation extraction boundaries") {
  auto eqs = extract_equations("We know 2 + 3 = 5 and then 5 * 2 = 10.");
  REQUIRE(eqs.size() == 2);
  CHECK(eqs[0].lhs_text == "2 + 3");
  CHECK(eqs[0].rhs_text == "5");
  CHECK(eqs[1].lhs_text == "5 * 2");
  CHECK(eqs[1].rhs_text == "10");

  CHECK(extract_equations("so x - 3 = 4 here").empty());
  CHECK(extract_equations("a = b").empty());
  CHECK(extract_equations("x <= 3 and y >= 2").empty());

  eqs = extract_equations("3 + 3 = 6 = 7");
  REQUIRE(eqs.size() == 2);
  CHECK(eqs[1].lhs_text == "6");
  CHECK(eqs[1].rhs_text == "7");

  const std::string body = "Total: 4 * 5 = 20, done";
  eqs = extract_equations(body);
  REQUIRE(eqs.size() == 1);
  CHECK(body.substr(eqs[0].span.begin, eqs[0].span.end - eqs[0].span.begin) == "4 * 5 = 20");
}

TEST_CASE("verify_step reports values and evaluation errors") {
  auto checks = verify_step({1, "t", "Then 12 * 4 = 46."});
  REQUIRE(checks.size() == 1);
  CHECK_FALSE(checks[0].matches);
  CHECK(checks[0].recomputed_value->exact() == 48);
  CHECK(checks[0].claimed_value->exact() == 46);

  checks = verify_step({1, "t", "Careful: 1/0 = 3"});
  REQUIRE(checks.size() == 1);
  CHECK_FALSE(checks[0].matches);
  CHECK(checks[0].note.rfind("division_by_zero", 0) == 0);

  CHECK_FALSE(has_mismatch({1, "t", "No arithmetic in this step."}));
}

TEST_CASE("numbers_match tolerance") {
  CHECK(numbers_match(Number(cpp_rational(1, 3)), Number(cpp_rational(1, 3))));
  CHECK_FALSE(numbers_match(Number(cpp_rational(1, 3)), Number(cpp_rational(333333, 1000000))));
  CHECK(numbers_match(Number(cpp_rational(1, 3)), Number(0.33333333)));
  CHECK_FALSE(numbers_match(Number(cpp_rational(1, 3)), Number(0.3333)));
  CHECK(numbers_match(Number(1e9), Number(1e9 + 1)));
  CHECK_FALSE(numbers_match(Number(0.0), Number(1e-12)));
}
