// Copyright 2026 The maskctc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Test-only oracles and helpers. Nothing here calls into the code paths it
// is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "maskctc/lattice.hpp"

namespace maskctc::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& x : m.values()) x = u(rng);
  return m;
}

inline TokenSeq random_target(std::size_t len, int alphabet, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> tok(0, alphabet - 1);
  TokenSeq y;
  for (std::size_t i = 0; i < len; ++i) y.tokens.push_back(tok(rng));
  return y;
}

// Logits whose softmax puts probability `probs[v]` on column v; zeros become
// -1000 (exp underflows to exactly 0).
inline Matrix logits_from_probs(const std::vector<std::vector<double>>& probs) {
  Matrix m(probs.size(), probs.at(0).size());
  for (std::size_t r = 0; r < probs.size(); ++r) {
    for (std::size_t c = 0; c < probs[r].size(); ++c) {
      m(r, c) = probs[r][c] > 0.0 ? std::log(probs[r][c]) : -1000.0;
    }
  }
  return m;
}

// Plain recursive edit distance with memoization.
inline std::size_t naive_levenshtein(const std::vector<TokenId>& a,
                                     const std::vector<TokenId>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go =
      [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = std::min(go(i + 1, j) + 1, go(i, j + 1) + 1);
    best = std::min(best, go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1));
    return memo[key] = best;
  };
  return go(0, 0);
}

// Naive log-softmax straight from the definition, with max shift.
inline double naive_log_prob(std::span<const double> row, std::size_t v) {
  double hi = row[0];
  for (double x : row) hi = std::max(hi, x);
  double s = 0.0;
  for (double x : row) s += std::exp(x - hi);
  return row[v] - hi - std::log(s);
}

// Costs of every monotonic AXE operator path, sorted ascending. Skip-target
// before any prediction charges prediction row 1.
inline std::vector<double> all_axe_path_costs(const Matrix& logits,
                                              const std::vector<TokenId>& target,
                                              TokenId eps, double gamma) {
  std::vector<double> costs;
  const std::size_t st = target.size(), sp = logits.rows();
  auto nlp = [&](std::size_t row, TokenId v) {
    return -naive_log_prob(logits.row(row), static_cast<std::size_t>(v));
  };
  std::function<void(std::size_t, std::size_t, double)> walk =
      [&](std::size_t i, std::size_t j, double cost) {
        if (i == st && j == sp) {
          costs.push_back(cost);
          return;
        }
        if (i < st && j < sp) walk(i + 1, j + 1, cost + nlp(j, target[i]));
        if (j < sp) walk(i, j + 1, cost + nlp(j, eps));
        if (i < st) walk(i + 1, j, cost + gamma * nlp(j == 0 ? 0 : j - 1, target[i]));
      };
  walk(0, 0, 0.0);
  std::sort(costs.begin(), costs.end());
  return costs;
}

// Central finite differences of f over every entry of x.
inline Matrix numeric_grad(const std::function<double(const Matrix&)>& f,
                           Matrix x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  auto vals = x.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double saved = vals[i];
    vals[i] = saved + h;
    const double up = f(x);
    vals[i] = saved - h;
    const double down = f(x);
    vals[i] = saved;
    g.values()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ||a - b|| / max(||a||, ||b||, floor).
inline double rel_err(std::span<const double> a, std::span<const double> b,
                      double floor = 1e-6) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(diff) / std::max({l2(a), l2(b), floor});
}

}  // namespace maskctc::testing
