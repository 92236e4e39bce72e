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
#include <string>
#include <vector>

#include "maskctc/ctc.hpp"
#include "maskctc/masking.hpp"
#include "maskctc/model.hpp"

namespace maskctc {

struct DecodeConfig {
  std::size_t iterations = 10;  // K
  double p_thres = 0.999;
  bool strip_eps = true;
};

void validate(const DecodeConfig& cfg);

struct DecodeIteration {
  std::size_t index = 0;  // 1-based
  TokenSeq input{{}, SeqRole::kMasked};       // decoder input this round
  TokenSeq hypothesis{{}, SeqRole::kMasked};  // after keeping the top fills
  std::vector<std::size_t> filled_positions;  // ascending
  std::vector<TokenId> filled_tokens;
  std::vector<double> probabilities;
  std::size_t masks_remaining = 0;
};

struct DecodeTrace {
  GreedyDecode greedy;
  TokenSeq initial{{}, SeqRole::kMasked};  // thresholded greedy output
  std::size_t initial_masks = 0;           // N0
  std::size_t fill_budget = 0;             // C = ceil(N0 / K)
  std::vector<DecodeIteration> iterations;
  TokenSeq final_tokens{{}, SeqRole::kPredicted};
};

// Greedy CTC, threshold masking, then mask-predict refinement.
DecodeTrace iterative_decode(const ToyModel& model, const Matrix& features,
                             const DecodeConfig& cfg);

// Refinement loop from an already-masked hypothesis. Each round fills every
// mask with the decoder's argmax over ordinary tokens and eps, keeps the C
// most probable fills and leaves the rest masked. Kept tokens are frozen.
DecodeTrace refine(const ToyModel& model, const LogitLattice& enc,
                   const MaskedSample& start, const DecodeConfig& cfg);

// Token error rate: levenshtein(hyp, ref) / |ref|.
double evaluate_wer(const TokenSeq& hyp, const TokenSeq& ref);

// One JSON record per line: a start record, one per iteration and a final
// record. A non-empty id is attached to every record.
std::string trace_to_jsonl(const DecodeTrace& trace, const Vocab& vocab,
                           const std::string& id = {});

}  // namespace maskctc
