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

#include "maskctc/axe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "maskctc/error.hpp"

namespace maskctc {
namespace {

void check_instance(const LogitLattice& logits, const TokenSeq& target,
                    const Vocab& vocab, const AxeConfig& cfg) {
  if (target.empty() || logits.rows() == 0) {
    throw Error(ErrorCode::kDegenerateInstance,
                "AXE needs a non-empty target and prediction");
  }
  if (logits.vocab_size() != static_cast<std::size_t>(vocab.total())) {
    throw Error(ErrorCode::kInvalidInput,
                "lattice width does not match vocabulary");
  }
  if (!(cfg.skip_target_penalty >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "skip-target penalty must be >= 0");
  }
  for (TokenId id : target.tokens) {
    if (!vocab.is_valid(id) || id == vocab.blank() || id == vocab.mask()) {
      throw Error(ErrorCode::kInvalidInput,
                  "AXE target must be blank-free and mask-free");
    }
  }
}

// Prediction row charged by a step arriving at column j.
std::size_t cost_row(std::size_t j) { return j == 0 ? 0 : j - 1; }

}  // namespace

const char* axe_op_name(AxeOp op) {
  switch (op) {
    case AxeOp::kAlign: return "align";
    case AxeOp::kSkipPrediction: return "skip_prediction";
    case AxeOp::kSkipTarget: return "skip_target";
    case AxeOp::kNone: break;
  }
  return "none";
}

AxeResult axe_loss(const LogitLattice& logits, const TokenSeq& target,
                   const Vocab& vocab, const AxeConfig& cfg) {
  check_instance(logits, target, vocab, cfg);
  const Matrix lp = log_softmax(logits);
  const std::size_t st = target.size();
  const std::size_t sp = logits.rows();
  const double gamma = cfg.skip_target_penalty;
  auto c = [&](std::size_t i, std::size_t j) {
    return -lp(cost_row(j), target[i - 1]);
  };
  auto e = [&](std::size_t j) { return -lp(j - 1, vocab.eps()); };

  AxeResult result;
  AxeDpMatrix& dp = result.dp;
  dp.m = Matrix(st + 1, sp + 1);
  dp.op.assign((st + 1) * (sp + 1), AxeOp::kNone);
  auto op = [&](std::size_t i, std::size_t j) -> AxeOp& {
    return dp.op[i * (sp + 1) + j];
  };

  for (std::size_t j = 1; j <= sp; ++j) {
    dp.m(0, j) = dp.m(0, j - 1) + e(j);
    op(0, j) = AxeOp::kSkipPrediction;
  }
  for (std::size_t i = 1; i <= st; ++i) {
    dp.m(i, 0) = dp.m(i - 1, 0) + gamma * c(i, 0);
    op(i, 0) = AxeOp::kSkipTarget;
  }
  for (std::size_t i = 1; i <= st; ++i) {
    for (std::size_t j = 1; j <= sp; ++j) {
      const double cij = c(i, j);
      double best = dp.m(i - 1, j - 1) + cij;
      AxeOp chosen = AxeOp::kAlign;
      if (const double v = dp.m(i, j - 1) + e(j); v < best) {
        best = v;
        chosen = AxeOp::kSkipPrediction;
      }
      if (const double v = dp.m(i - 1, j) + gamma * cij; v < best) {
        best = v;
        chosen = AxeOp::kSkipTarget;
      }
      dp.m(i, j) = best;
      op(i, j) = chosen;
    }
  }
  result.loss = dp.m(st, sp);
  return result;
}

AxeAlignment axe_backtrace(const AxeDpMatrix& dp) {
  AxeAlignment out;
  std::size_t i = dp.target_len();
  std::size_t j = dp.pred_len();
  out.loss = dp.m(i, j);
  while (i > 0 || j > 0) {
    const AxeOp op = dp.op_at(i, j);
    out.steps.push_back({op, i, j});
    switch (op) {
      case AxeOp::kAlign: --i, --j; break;
      case AxeOp::kSkipPrediction: --j; break;
      case AxeOp::kSkipTarget: --i; break;
      case AxeOp::kNone:
        throw Error(ErrorCode::kInvalidInput, "corrupt AXE DP matrix");
    }
  }
  std::reverse(out.steps.begin(), out.steps.end());
  return out;
}

Matrix alignment_grad(const Matrix& log_probs, const TokenSeq& target,
                      const AxeAlignment& alignment, const Vocab& vocab,
                      const AxeConfig& cfg) {
  Matrix grad(log_probs.rows(), log_probs.cols());
  // d(-log softmax_k)/dz = softmax - onehot(k), scaled by the step weight.
  auto add_ce = [&](std::size_t row, TokenId token, double weight) {
    const auto lp = log_probs.row(row);
    auto g = grad.row(row);
    for (std::size_t v = 0; v < lp.size(); ++v) g[v] += weight * std::exp(lp[v]);
    g[token] -= weight;
  };
  for (const AxeStep& step : alignment.steps) {
    switch (step.op) {
      case AxeOp::kAlign:
        add_ce(step.prediction_index - 1, target[step.target_index - 1], 1.0);
        break;
      case AxeOp::kSkipPrediction:
        add_ce(step.prediction_index - 1, vocab.eps(), 1.0);
        break;
      case AxeOp::kSkipTarget:
        if (cfg.skip_target_penalty != 0.0) {
          add_ce(cost_row(step.prediction_index), target[step.target_index - 1],
                 cfg.skip_target_penalty);
        }
        break;
      case AxeOp::kNone: break;
    }
  }
  return grad;
}

Matrix axe_grad(const LogitLattice& logits, const TokenSeq& target,
                const Vocab& vocab, const AxeConfig& cfg) {
  const AxeResult res = axe_loss(logits, target, vocab, cfg);
  return alignment_grad(log_softmax(logits), target, axe_backtrace(res.dp),
                        vocab, cfg);
}

double ce_loss(const LogitLattice& logits, const TokenSeq& target) {
  if (logits.rows() != target.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "CE needs as many predictions as target tokens");
  }
  const Matrix lp = log_softmax(logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) loss -= lp(i, target[i]);
  return loss;
}

Matrix ce_grad(const LogitLattice& logits, const TokenSeq& target) {
  if (logits.rows() != target.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "CE needs as many predictions as target tokens");
  }
  const Matrix lp = log_softmax(logits);
  Matrix grad(lp.rows(), lp.cols());
  for (std::size_t i = 0; i < target.size(); ++i) {
    for (std::size_t v = 0; v < lp.cols(); ++v) grad(i, v) = std::exp(lp(i, v));
    grad(i, target[i]) -= 1.0;
  }
  return grad;
}

namespace {

struct Enumerator {
  const Matrix& lp;
  const TokenSeq& target;
  TokenId eps;
  double gamma;
  double best = std::numeric_limits<double>::infinity();

  void walk(std::size_t i, std::size_t j, double cost) {
    const std::size_t st = target.size();
    const std::size_t sp = lp.rows();
    if (i == st && j == sp) {
      best = std::min(best, cost);
      return;
    }
    if (i < st && j < sp) walk(i + 1, j + 1, cost - lp(j, target[i]));
    if (j < sp) walk(i, j + 1, cost - lp(j, eps));
    // Skip-target consumes target i+1 against the current prediction row,
    // or row 1 before any prediction is consumed.
    if (i < st) {
      const std::size_t row = j == 0 ? 0 : j - 1;
      walk(i + 1, j, cost - gamma * lp(row, target[i]));
    }
  }
};

}  // namespace

double axe_bruteforce(const LogitLattice& logits, const TokenSeq& target,
                      const Vocab& vocab, const AxeConfig& cfg) {
  check_instance(logits, target, vocab, cfg);
  if (target.size() > 7 || logits.rows() > 7) {
    throw Error(ErrorCode::kOracleTooLarge,
                "alignment enumeration limited to 7x7 instances");
  }
  const Matrix lp = log_softmax(logits);
  Enumerator en{lp, target, vocab.eps(), cfg.skip_target_penalty};
  en.walk(0, 0, 0.0);
  return en.best;
}

}  // namespace maskctc
