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

#include "maskctc/masking.hpp"

#include <algorithm>
#include <numeric>

#include "maskctc/error.hpp"

namespace maskctc {

void validate(const MaskConfig& cfg) {
  if (!(cfg.p_thres > 0.0 && cfg.p_thres < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "p_thres must lie in (0, 1)");
  }
}

std::vector<std::size_t> sample_positions(std::size_t n, std::size_t max_count,
                                          Rng& rng) {
  if (n == 0) {
    throw Error(ErrorCode::kDegenerateInstance, "cannot mask an empty sentence");
  }
  const std::size_t cap = max_count == 0 ? n : std::min(max_count, n);
  const std::size_t count =
      std::uniform_int_distribution<std::size_t>(1, cap)(rng);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` slots are a uniform subset.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick =
        std::uniform_int_distribution<std::size_t>(k, n - 1)(rng);
    std::swap(idx[k], idx[pick]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

MaskedSample sample_train_mask(const TokenSeq& y, const Vocab& vocab,
                               const MaskConfig& cfg, Rng& rng) {
  if (y.empty()) {
    throw Error(ErrorCode::kDegenerateInstance, "cannot mask an empty sentence");
  }
  MaskedSample out;
  out.y = y;
  out.positions = sample_positions(y.size(), cfg.l_mask, rng);
  out.y_mask.tokens = y.tokens;
  for (std::size_t p : out.positions) out.y_mask.tokens[p] = vocab.mask();
  return out;
}

MaskedSample threshold_mask(const GreedyDecode& greedy, const Vocab& vocab,
                            const MaskConfig& cfg) {
  MaskedSample out;
  out.y = greedy.tokens;
  out.y_mask.tokens = greedy.tokens.tokens;
  for (std::size_t p = 0; p < greedy.confidences.size(); ++p) {
    if (greedy.confidences[p] < cfg.p_thres) {
      out.y_mask.tokens[p] = vocab.mask();
      out.positions.push_back(p);
    }
  }
  return out;
}

RectifiedSample rectify_at(const MaskedSample& masked, const FillFn& fill,
                           std::vector<std::size_t> rec_positions,
                           const Vocab& vocab) {
  const std::size_t n = masked.y_mask.size();
  const TokenSeq filled = fill(masked.y_mask);
  if (filled.size() != n) {
    throw Error(ErrorCode::kFillLengthMismatch,
                "fill returned " + std::to_string(filled.size()) +
                    " tokens for a sentence of " + std::to_string(n));
  }
  RectifiedSample out;
  out.y = masked.y;
  out.y_mask = masked.y_mask;
  out.mask_positions = masked.positions;
  out.y_tilde.tokens = masked.y_mask.tokens;
  for (std::size_t p : masked.positions) {
    const TokenId id = filled[p];
    if (!vocab.is_valid(id) || id == vocab.mask() || id == vocab.blank()) {
      throw Error(ErrorCode::kInvalidInput,
                  "fill produced a mask or blank at a masked position");
    }
    out.y_tilde.tokens[p] = id;
  }
  std::sort(rec_positions.begin(), rec_positions.end());
  out.y_rec.tokens = out.y_tilde.tokens;
  for (std::size_t p : rec_positions) {
    if (p >= n) {
      throw Error(ErrorCode::kInvalidInput, "re-mask position out of range");
    }
    out.y_rec.tokens[p] = vocab.mask();
  }
  out.rec_positions = std::move(rec_positions);
  return out;
}

RectifiedSample dynamic_rectify(const MaskedSample& masked, const FillFn& fill,
                                const Vocab& vocab, const MaskConfig& cfg,
                                Rng& rng) {
  const std::size_t n = masked.y_mask.size();
  if (n == 0) {
    throw Error(ErrorCode::kDegenerateInstance, "cannot rectify an empty sentence");
  }
  // Fill first so the draw order is fill, then re-mask count and positions.
  RectifiedSample out = rectify_at(masked, fill, {}, vocab);
  out.rec_positions = sample_positions(n, cfg.l_rec, rng);
  for (std::size_t p : out.rec_positions) out.y_rec.tokens[p] = vocab.mask();
  return out;
}

}  // namespace maskctc
