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

#include <cmath>
#include <vector>

#include "maskctc/lattice.hpp"

namespace maskctc {

struct CtcResult {
  // -ln P(target | lattice); +infinity when no path of length T collapses to
  // the target, in which case grad is all zeros.
  double loss = 0.0;
  // d loss / d logits, T x |V|.
  Matrix grad;
  // Log forward variables, T x (2L+1) over the blank-extended target.
  Matrix log_alpha;

  bool feasible() const { return std::isfinite(loss); }
};

struct GreedyDecode {
  TokenSeq tokens{{}, SeqRole::kCtcGreedy};
  // Confidence of each emitted token: the highest posterior for that token
  // among the consecutive frames that produced it.
  std::vector<double> confidences;
  // Per-frame argmax path before collapsing.
  std::vector<TokenId> path;
};

CtcResult ctc_loss(const LogitLattice& logits, const TokenSeq& target,
                   const Vocab& vocab);

// Minimum number of frames any path for `target` needs (labels plus one
// blank between each pair of equal neighbours).
std::size_t ctc_min_frames(const TokenSeq& target);

// Enumerates all |V|^T frame paths. Throws OracleTooLarge past 1e7 paths.
double ctc_loss_bruteforce(const LogitLattice& logits, const TokenSeq& target,
                           const Vocab& vocab);

// Frame-wise argmax over ordinary tokens and blank, then collapse.
GreedyDecode ctc_greedy(const LogitLattice& logits, const Vocab& vocab);

}  // namespace maskctc
