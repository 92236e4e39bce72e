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
#include <functional>
#include <random>
#include <vector>

#include "maskctc/ctc.hpp"
#include "maskctc/lattice.hpp"

namespace maskctc {

using Rng = std::mt19937_64;

struct MaskConfig {
  // Upper bounds on the number of training masks and rectification re-masks.
  // Zero means "sentence length".
  std::size_t l_mask = 0;
  std::size_t l_rec = 0;
  // Inference confidence threshold; tokens strictly below it are masked.
  double p_thres = 0.999;
  std::uint64_t rng_seed = 0;
};

void validate(const MaskConfig& cfg);

struct MaskedSample {
  TokenSeq y;
  TokenSeq y_mask{{}, SeqRole::kMasked};
  std::vector<std::size_t> positions;  // ascending
};

struct RectifiedSample {
  TokenSeq y;
  TokenSeq y_mask{{}, SeqRole::kMasked};
  TokenSeq y_tilde{{}, SeqRole::kPredicted};
  TokenSeq y_rec{{}, SeqRole::kRectified};
  std::vector<std::size_t> mask_positions;
  std::vector<std::size_t> rec_positions;

  bool operator==(const RectifiedSample&) const = default;
};

// Fills a masked sentence; must return a sentence of the same length.
using FillFn = std::function<TokenSeq(const TokenSeq& y_mask)>;

// Draws N ~ Uniform{1..min(max_count, n)} (max_count 0 = n) and then N
// distinct positions uniformly without replacement. Sorted ascending.
std::vector<std::size_t> sample_positions(std::size_t n, std::size_t max_count,
                                          Rng& rng);

MaskedSample sample_train_mask(const TokenSeq& y, const Vocab& vocab,
                               const MaskConfig& cfg, Rng& rng);

// Masks every greedy token whose confidence is strictly below p_thres.
MaskedSample threshold_mask(const GreedyDecode& greedy, const Vocab& vocab,
                            const MaskConfig& cfg);

// Fills the masks with `fill`, then re-masks a fresh random subset drawn
// over the whole sentence.
RectifiedSample dynamic_rectify(const MaskedSample& masked, const FillFn& fill,
                                const Vocab& vocab, const MaskConfig& cfg,
                                Rng& rng);

// As dynamic_rectify with caller-chosen re-mask positions.
RectifiedSample rectify_at(const MaskedSample& masked, const FillFn& fill,
                           std::vector<std::size_t> rec_positions,
                           const Vocab& vocab);

}  // namespace maskctc
