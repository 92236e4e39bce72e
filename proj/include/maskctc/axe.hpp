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

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "maskctc/lattice.hpp"

namespace maskctc {

struct AxeConfig {
  // gamma: weight on the cross entropy charged when a target token is skipped.
  double skip_target_penalty = 1.0;
};

enum class AxeOp : std::uint8_t { kNone, kAlign, kSkipPrediction, kSkipTarget };

const char* axe_op_name(AxeOp op);

// Minimal partial losses over (target prefix i, prediction prefix j) for
// i in [0, S_t], j in [0, S_p], plus the operator chosen at each cell.
struct AxeDpMatrix {
  Matrix m;
  std::vector<AxeOp> op;

  std::size_t target_len() const { return m.rows() - 1; }
  std::size_t pred_len() const { return m.cols() - 1; }
  AxeOp op_at(std::size_t i, std::size_t j) const {
    return op[i * m.cols() + j];
  }
};

// One operator of a monotonic alignment. (target_index, prediction_index)
// is the DP cell the step arrives at, i.e. 1-based counts of consumed
// targets and predictions.
struct AxeStep {
  AxeOp op = AxeOp::kNone;
  std::size_t target_index = 0;
  std::size_t prediction_index = 0;
};

struct AxeAlignment {
  std::vector<AxeStep> steps;
  double loss = 0.0;
};

struct AxeResult {
  double loss = 0.0;
  AxeDpMatrix dp;
};

// Aligned cross entropy of a decoder lattice (S_p x |V|) against a target of
// length S_t. Recurrence, with c(i,j) = -log P_j(target_i), e(j) = -log P_j(eps):
//
//   m[i][j] = min(m[i-1][j-1] + c(i,j),        align
//                 m[i][j-1]   + e(j),          skip prediction
//                 m[i-1][j]   + gamma*c(i,j))  skip target
//
// Column 0 charges skip-target costs against prediction row 1.
AxeResult axe_loss(const LogitLattice& logits, const TokenSeq& target,
                   const Vocab& vocab, const AxeConfig& cfg);

// Recovers the optimal operator path. Ties prefer align, then
// skip-prediction, then skip-target.
AxeAlignment axe_backtrace(const AxeDpMatrix& dp);

// Gradient of the optimal-path cost w.r.t. the logits with the backtraced
// alignment held fixed.
Matrix axe_grad(const LogitLattice& logits, const TokenSeq& target,
                const Vocab& vocab, const AxeConfig& cfg);

// Gradient of a fixed alignment's cost. Shared by axe_grad and the model's
// backward pass.
Matrix alignment_grad(const Matrix& log_probs, const TokenSeq& target,
                      const AxeAlignment& alignment, const Vocab& vocab,
                      const AxeConfig& cfg);

// Position-wise cross entropy; requires equal lengths.
double ce_loss(const LogitLattice& logits, const TokenSeq& target);
Matrix ce_grad(const LogitLattice& logits, const TokenSeq& target);

// Exhaustive minimum over all monotonic operator paths. S_t, S_p <= 7.
double axe_bruteforce(const LogitLattice& logits, const TokenSeq& target,
                      const Vocab& vocab, const AxeConfig& cfg);

}  // namespace maskctc
