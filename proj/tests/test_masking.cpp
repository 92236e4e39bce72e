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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "maskctc/error.hpp"
#include "maskctc/masking.hpp"

using namespace maskctc;

namespace {

const Vocab kVocab(26);

TokenSeq seq(std::initializer_list<TokenId> ids) { return TokenSeq{ids}; }

// Fills masked positions with the reference tokens.
FillFn oracle_fill(const TokenSeq& y) {
  return [y](const TokenSeq&) { return TokenSeq{y.tokens, SeqRole::kPredicted}; };
}

}  // namespace

TEST_CASE("sample_train_mask on a single token") {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const MaskedSample s = sample_train_mask(seq({4}), kVocab, {}, rng);
    CHECK(s.positions == std::vector<std::size_t>{0});
    CHECK(s.y_mask.tokens == std::vector<TokenId>{kVocab.mask()});
  }
}

TEST_CASE("sample_train_mask rejects empty sentences") {
  Rng rng(1);
  try {
    sample_train_mask(TokenSeq{}, kVocab, {}, rng);
    FAIL("expected DegenerateInstance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateInstance);
  }
}

TEST_CASE("sample_train_mask is deterministic per seed and masks exactly its positions") {
  const TokenSeq y = seq({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    const MaskedSample s1 = sample_train_mask(y, kVocab, {}, a);
    const MaskedSample s2 = sample_train_mask(y, kVocab, {}, b);
    CHECK(s1.positions == s2.positions);
    CHECK(s1.y_mask == s2.y_mask);
    for (std::size_t p = 0; p < y.size(); ++p) {
      const bool masked = std::binary_search(s1.positions.begin(), s1.positions.end(), p);
      CHECK((s1.y_mask[p] == kVocab.mask()) == masked);
      if (!masked) CHECK(s1.y_mask[p] == y[p]);
    }
  }
}

TEST_CASE("sample_train_mask respects l_mask") {
  Rng rng(5);
  MaskConfig cfg;
  cfg.l_mask = 3;
  for (int i = 0; i < 200; ++i) {
    const auto n = sample_train_mask(seq({0, 1, 2, 3, 4, 5, 6}), kVocab, cfg, rng).positions.size();
    CHECK((n >= 1 && n <= 3));
  }
}

TEST_CASE("mask count is uniform and positions are masked equally often") {
  Rng rng(20260101);
  const TokenSeq y = seq({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  MaskConfig cfg;
  cfg.l_mask = 10;
  constexpr int kDraws = 10000;
  std::vector<int> count_hist(11, 0), pos_hist(10, 0);
  for (int i = 0; i < kDraws; ++i) {
    const MaskedSample s = sample_train_mask(y, kVocab, cfg, rng);
    ++count_hist[s.positions.size()];
    for (std::size_t p : s.positions) ++pos_hist[p];
  }
  CHECK(count_hist[0] == 0);
  double chi2 = 0.0;
  for (int n = 1; n <= 10; ++n) {
    const double expected = kDraws / 10.0;
    chi2 += (count_hist[n] - expected) * (count_hist[n] - expected) / expected;
  }
  // 99th percentile of chi-square with 9 degrees of freedom.
  CHECK(chi2 < 21.666);
  // Each position is masked with probability E[N]/S = 0.55.
  const double mean = kDraws * 0.55;
  const double sigma = std::sqrt(kDraws * 0.55 * 0.45);
  for (int c : pos_hist) CHECK(std::abs(c - mean) < 3.0 * sigma);
}

TEST_CASE("threshold_mask examples") {
  MaskConfig cfg;
  cfg.p_thres = 0.999;
  GreedyDecode g;
  g.tokens.tokens = {3, 4};
  SUBCASE("certain tokens stay") {
    g.confidences = {1.0, 1.0};
    const MaskedSample s = threshold_mask(g, kVocab, cfg);
    CHECK(s.positions.empty());
    CHECK(s.y_mask.tokens == g.tokens.tokens);
  }
  SUBCASE("boundary value is kept") {
    g.confidences = {0.999, 0.5};
    const MaskedSample s = threshold_mask(g, kVocab, cfg);
    CHECK(s.positions == std::vector<std::size_t>{1});
    CHECK(s.y_mask.tokens == std::vector<TokenId>{3, kVocab.mask()});
  }
  SUBCASE("empty greedy output") {
    const MaskedSample s = threshold_mask(GreedyDecode{}, kVocab, cfg);
    CHECK(s.y_mask.empty());
    CHECK(s.positions.empty());
  }
}

TEST_CASE("mask config validation") {
  MaskConfig cfg;
  cfg.p_thres = 1.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.p_thres = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.p_thres = 0.5;
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("rectification reproduces the illustrated sample") {
  // this is dynamic alignment mask ctc non autoregressive speech recognition
  // as tokens t0..t9; "task" is t10.
  const TokenId task = 10;
  const TokenSeq y = seq({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const TokenId m = kVocab.mask();
  MaskedSample masked;
  masked.y = y;
  masked.positions = {1, 3, 4, 7, 8};
  masked.y_mask.tokens = {0, m, 2, m, m, 5, 6, m, m, 9};

  FillFn fill = [&](const TokenSeq& in) {
    TokenSeq out{y.tokens, SeqRole::kPredicted};
    out.tokens[4] = task;
    CHECK(in == masked.y_mask);
    return out;
  };
  const RectifiedSample r = rectify_at(masked, fill, {2, 3, 6}, kVocab);
  CHECK(r.y_tilde.tokens == std::vector<TokenId>{0, 1, 2, 3, task, 5, 6, 7, 8, 9});
  CHECK(r.y_rec.tokens == std::vector<TokenId>{0, 1, m, m, task, 5, m, 7, 8, 9});
  CHECK(r.y_mask == masked.y_mask);
  CHECK(r.y == y);
}

TEST_CASE("rectify round trip and saturation") {
  const TokenSeq y = seq({7, 8, 9, 10});
  Rng rng(3);
  const MaskedSample masked = sample_train_mask(y, kVocab, {}, rng);
  SUBCASE("identity fill, same positions") {
    const RectifiedSample r = rectify_at(masked, oracle_fill(y), masked.positions, kVocab);
    CHECK(r.y_tilde.tokens == y.tokens);
    CHECK(r.y_rec.tokens == masked.y_mask.tokens);
  }
  SUBCASE("re-masking every position") {
    FillFn junk = [](const TokenSeq& in) {
      return TokenSeq{std::vector<TokenId>(in.size(), 0), SeqRole::kPredicted};
    };
    const RectifiedSample r = rectify_at(masked, junk, {0, 1, 2, 3}, kVocab);
    CHECK(r.y_rec.tokens == std::vector<TokenId>(4, kVocab.mask()));
  }
  SUBCASE("fill length mismatch") {
    FillFn shorter = [](const TokenSeq&) { return TokenSeq{{1}}; };
    try {
      dynamic_rectify(masked, shorter, kVocab, {}, rng);
      FAIL("expected FillLengthMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFillLengthMismatch);
    }
  }
}

TEST_CASE("dynamic_rectify invariants") {
  const TokenSeq y = seq({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  Rng rng(77);
  bool remasked_visible_position = false;
  for (int i = 0; i < 500; ++i) {
    const MaskedSample masked = sample_train_mask(y, kVocab, {}, rng);
    // A fill that is wrong everywhere it is allowed to write.
    FillFn wrong = [](const TokenSeq& in) {
      TokenSeq out{in.tokens, SeqRole::kPredicted};
      for (auto& t : out.tokens) t = 20;
      return out;
    };
    const RectifiedSample r = dynamic_rectify(masked, wrong, kVocab, {}, rng);
    REQUIRE(r.y_rec.size() == y.size());
    CHECK(r.y_tilde.size() == y.size());
    const auto masks = std::count(r.y_rec.tokens.begin(), r.y_rec.tokens.end(), kVocab.mask());
    CHECK((masks >= 1 && masks <= 10));
    CHECK(static_cast<std::size_t>(masks) == r.rec_positions.size());
    for (std::size_t p = 0; p < y.size(); ++p) {
      const bool was_masked = std::binary_search(masked.positions.begin(), masked.positions.end(), p);
      const bool re_masked = std::binary_search(r.rec_positions.begin(), r.rec_positions.end(), p);
      CHECK(r.y_tilde[p] != kVocab.mask());
      CHECK(r.y_tilde[p] == (was_masked ? 20 : y[p]));
      CHECK(r.y_rec[p] == (re_masked ? kVocab.mask() : r.y_tilde[p]));
      remasked_visible_position |= re_masked && !was_masked;
    }
  }
  CHECK(remasked_visible_position);
}

TEST_CASE("dynamic_rectify is deterministic per seed") {
  const TokenSeq y = seq({3, 1, 4, 1, 5, 9, 2, 6});
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    const MaskedSample masked = sample_train_mask(y, kVocab, {}, rng);
    return dynamic_rectify(masked, oracle_fill(y), kVocab, {}, rng);
  };
  CHECK(run(12) == run(12));
}
