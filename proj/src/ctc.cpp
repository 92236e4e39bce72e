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

#include "maskctc/ctc.hpp"

#include <algorithm>
#include <limits>

#include "maskctc/error.hpp"

namespace maskctc {
namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

void check_shapes(const LogitLattice& logits, const TokenSeq& target,
                  const Vocab& vocab) {
  if (logits.vocab_size() != static_cast<std::size_t>(vocab.total())) {
    throw Error(ErrorCode::kInvalidInput,
                "lattice width does not match vocabulary");
  }
  for (TokenId id : target.tokens) {
    if (!vocab.is_valid(id) || id == vocab.blank()) {
      throw Error(ErrorCode::kInvalidInput,
                  "CTC target must be blank-free and in range");
    }
  }
}

// Blank-extended label sequence: blank, y1, blank, y2, ..., yL, blank.
std::vector<TokenId> extend_with_blanks(const TokenSeq& target,
                                        TokenId blank) {
  std::vector<TokenId> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

}  // namespace

std::size_t ctc_min_frames(const TokenSeq& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

CtcResult ctc_loss(const LogitLattice& logits, const TokenSeq& target,
                   const Vocab& vocab) {
  check_shapes(logits, target, vocab);
  const std::size_t frames = logits.rows();
  const std::size_t width = logits.vocab_size();
  const Matrix lp = log_softmax(logits);
  const std::vector<TokenId> ext = extend_with_blanks(target, vocab.blank());
  const std::size_t states = ext.size();

  CtcResult result;
  result.grad = Matrix(frames, width);
  result.log_alpha = Matrix(frames, states, kLogZero);
  if (frames == 0) {
    result.loss = target.empty() ? 0.0
                                 : std::numeric_limits<double>::infinity();
    return result;
  }

  // A state may be entered by skipping the preceding blank unless it is a
  // blank itself or repeats the label two states back.
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && ext[s] != vocab.blank() && ext[s] != ext[s - 2];
  };

  Matrix& alpha = result.log_alpha;
  alpha(0, 0) = lp(0, ext[0]);
  if (states > 1) alpha(0, 1) = lp(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kLogZero) alpha(t, s) = acc + lp(t, ext[s]);
    }
  }

  double log_z = alpha(frames - 1, states - 1);
  if (states > 1) log_z = log_add(log_z, alpha(frames - 1, states - 2));
  if (log_z == kLogZero) {
    result.loss = std::numeric_limits<double>::infinity();
    return result;
  }
  result.loss = -log_z;

  // Backward variables exclude the emission at t.
  Matrix beta(frames, states, kLogZero);
  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + lp(t + 1, ext[s]);
      if (s + 1 < states) {
        acc = log_add(acc, beta(t + 1, s + 1) + lp(t + 1, ext[s + 1]));
      }
      if (s + 2 < states && can_skip(s + 2)) {
        acc = log_add(acc, beta(t + 1, s + 2) + lp(t + 1, ext[s + 2]));
      }
      beta(t, s) = acc;
    }
  }

  // grad = softmax - state occupancy summed per label.
  std::vector<double> occupancy(width);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kLogZero);
    for (std::size_t s = 0; s < states; ++s) {
      const double a = alpha(t, s);
      const double b = beta(t, s);
      if (a == kLogZero || b == kLogZero) continue;
      occupancy[ext[s]] = log_add(occupancy[ext[s]], a + b);
    }
    for (std::size_t v = 0; v < width; ++v) {
      const double post = occupancy[v] == kLogZero
                              ? 0.0
                              : std::exp(occupancy[v] - log_z);
      result.grad(t, v) = std::exp(lp(t, v)) - post;
    }
  }
  return result;
}

double ctc_loss_bruteforce(const LogitLattice& logits, const TokenSeq& target,
                           const Vocab& vocab) {
  check_shapes(logits, target, vocab);
  const std::size_t frames = logits.rows();
  const std::size_t width = logits.vocab_size();
  double paths = 1.0;
  for (std::size_t t = 0; t < frames; ++t) paths *= static_cast<double>(width);
  if (paths > 1e7) {
    throw Error(ErrorCode::kOracleTooLarge,
                "path enumeration exceeds 1e7 paths");
  }
  const Matrix lp = log_softmax(logits);

  std::vector<TokenId> path(frames, 0);
  double total = 0.0;
  while (true) {
    if (collapse(path, vocab).tokens == target.tokens) {
      double lpath = 0.0;
      for (std::size_t t = 0; t < frames; ++t) lpath += lp(t, path[t]);
      total += std::exp(lpath);
    }
    // Odometer increment over frames.
    std::size_t t = 0;
    while (t < frames && ++path[t] == static_cast<TokenId>(width)) {
      path[t] = 0;
      ++t;
    }
    if (t == frames) break;
  }
  return total > 0.0 ? -std::log(total)
                     : std::numeric_limits<double>::infinity();
}

GreedyDecode ctc_greedy(const LogitLattice& logits, const Vocab& vocab) {
  if (logits.vocab_size() != static_cast<std::size_t>(vocab.total())) {
    throw Error(ErrorCode::kInvalidInput,
                "lattice width does not match vocabulary");
  }
  const Matrix lp = log_softmax(logits);
  GreedyDecode out;
  out.path.reserve(lp.rows());
  TokenId prev = vocab.blank();
  for (std::size_t t = 0; t < lp.rows(); ++t) {
    const auto row = lp.row(t);
    // Reserved symbols after blank are never emitted.
    const auto best = static_cast<TokenId>(
        std::max_element(row.begin(), row.begin() + vocab.blank() + 1) -
        row.begin());
    const double prob = std::exp(row[best]);
    out.path.push_back(best);
    if (best != vocab.blank()) {
      if (best != prev) {
        out.tokens.tokens.push_back(best);
        out.confidences.push_back(prob);
      } else {
        out.confidences.back() = std::max(out.confidences.back(), prob);
      }
    }
    prev = best;
  }
  return out;
}

}  // namespace maskctc
