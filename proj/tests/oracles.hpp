#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. None of these call into the library under test.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "stepsearch/core/rng.hpp"
#include "stepsearch/core/types.hpp"

namespace oracles {

using boost::multiprecision::cpp_rational;
using Big = boost::multiprecision::cpp_bin_float_50;

// Index of the best (value, visits) child under UCB; first index on ties.
inline std::size_t ucb_argmax(const std::vector<std::pair<double, std::int64_t>>& kids,
                              std::int64_t parent_visits, double c) {
  const long double n_parent = parent_visits < 1 ? 1.0L : static_cast<long double>(parent_visits);
  long double best = -1e300L;
  std::size_t out = 0;
  for (std::size_t i = 0; i < kids.size(); ++i) {
    const long double u = kids[i].first + c * std::sqrt(std::log(n_parent) / (1.0L + kids[i].second));
    if (u > best + 1e-15L) {
      best = u;
      out = i;
    }
  }
  return out;
}

// Indices with value > μ + λδ (population δ), else the first maximum.
// Plain double arithmetic, so boundary values compare like the definition.
inline std::vector<std::size_t> threshold_select(const std::vector<double>& values, double lambda) {
  double sum = 0.0;
  for (double v : values) sum += v;
  double mean = sum / static_cast<double>(values.size());
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    mean = values.front();
  }
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double p = mean + lambda * std::sqrt(var / static_cast<double>(values.size()));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > p) out.push_back(i);
  }
  if (out.empty()) out.push_back(static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin()));
  return out;
}

// Fully parenthesized expression text with its exact value computed here.
struct Generated {
  std::string text;
  std::optional<cpp_rational> value;  // nullopt: division by zero somewhere
};

inline Generated random_expr(stepsearch::Rng& rng, int depth) {
  if (depth == 0 || rng.bernoulli(0.25)) {
    const auto v = static_cast<long long>(rng.below(20));
    return {std::to_string(v), cpp_rational(v)};
  }
  const auto op = rng.below(6);
  if (op == 5) {
    auto inner = random_expr(rng, depth - 1);
    std::optional<cpp_rational> v;
    if (inner.value) v = -*inner.value;
    return {"-(" + inner.text + ")", v};
  }
  if (op == 4) {
    auto base = random_expr(rng, depth - 1);
    const auto e = rng.below(4);
    std::optional<cpp_rational> v;
    if (base.value) {
      cpp_rational acc = 1;
      for (std::uint64_t i = 0; i < e; ++i) acc *= *base.value;
      v = acc;
    }
    return {"(" + base.text + ")^" + std::to_string(e), v};
  }
  auto a = random_expr(rng, depth - 1);
  auto b = random_expr(rng, depth - 1);
  static const char* ops[] = {" + ", " - ", " * ", " / "};
  std::optional<cpp_rational> v;
  if (a.value && b.value) {
    switch (op) {
      case 0: v = *a.value + *b.value; break;
      case 1: v = *a.value - *b.value; break;
      case 2: v = *a.value * *b.value; break;
      case 3:
        if (*b.value != 0) v = *a.value / *b.value;
        break;
    }
  }
  return {"(" + a.text + ")" + ops[op] + "(" + b.text + ")", v};
}

inline std::set<std::string> grams(const std::string& text, int n) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text + " ") {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  std::set<std::string> out;
  if (tokens.empty()) return out;
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(n), tokens.size());
  for (std::size_t i = 0; i + w <= tokens.size(); ++i) {
    std::string g;
    for (std::size_t j = 0; j < w; ++j) g += (j ? "\x1f" : "") + tokens[i + j];
    out.insert(g);
  }
  return out;
}

inline double jaccard(const std::string& a, const std::string& b, int n) {
  const auto ga = grams(a, n);
  const auto gb = grams(b, n);
  if (ga.empty() && gb.empty()) return 1.0;
  std::vector<std::string> inter, uni;
  std::set_intersection(ga.begin(), ga.end(), gb.begin(), gb.end(), std::back_inserter(inter));
  std::set_union(ga.begin(), ga.end(), gb.begin(), gb.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

inline Big sigmoid(const Big& x) { return 1 / (1 + exp(-x)); }

inline double dpo_loss(double pos, double neg, double ref_pos, double ref_neg, double beta) {
  const Big z = Big(beta) * (Big(pos) - Big(ref_pos)) - Big(beta) * (Big(neg) - Big(ref_neg));
  return static_cast<double>(-log(sigmoid(z)));
}

// L1..L4 at (y+, y-).
inline std::array<double, 4> discriminative_losses(double y_pos, double y_neg) {
  const Big sp = sigmoid(Big(y_pos));
  const Big sn = sigmoid(Big(y_neg));
  return {static_cast<double>(-(log(sp) + log(1 - sn))), static_cast<double>(sp - sn),
          static_cast<double>((sp - 1) * (sp - 1) + sn * sn),
          static_cast<double>(-log(sigmoid(Big(y_pos) - Big(y_neg))))};
}

inline std::string random_words(stepsearch::Rng& rng, int max_words, bool allow_newlines) {
  static const char* words[] = {"the", "sum", "x", "=", "3", "4.5", "(a+b)", "café", "**bold**",
                                "{", "}", "Step", "\\frac{1}{2}", "-", "×", "answer:", "π"};
  std::string s;
  const auto n = rng.below(static_cast<std::uint64_t>(max_words + 1));
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i > 0) s += allow_newlines && rng.bernoulli(0.15) ? "\n" : " ";
    s += words[rng.below(std::size(words))];
  }
  return s;
}

inline stepsearch::CandidateSolution random_solution(stepsearch::Rng& rng) {
  stepsearch::CandidateSolution s;
  if (rng.bernoulli(0.7)) s.rephrasing = "Find " + random_words(rng, 8, true);
  const auto steps = rng.below(6) + (rng.bernoulli(0.5) ? 1 : 0);
  const int first = 1 + static_cast<int>(rng.below(3));
  for (std::uint64_t i = 0; i < steps; ++i) {
    s.steps.push_back({first + static_cast<int>(i), random_words(rng, 5, false), random_words(rng, 20, true)});
  }
  if (s.steps.empty() || rng.bernoulli(0.8)) {
    s.final_answer = rng.bernoulli(0.5) ? std::to_string(rng.below(1000))
                                        : "\\frac{" + std::to_string(rng.below(9)) + "}{" +
                                              std::to_string(1 + rng.below(9)) + "}";
  }
  return s;
}

}  // namespace oracles
