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
#include <random>
#include <sstream>

#include <json.hpp>

#include "maskctc/decoder.hpp"
#include "maskctc/error.hpp"
#include "oracles.hpp"

using namespace maskctc;

namespace {

const Vocab kVocab(6);

ToyModel random_model(std::uint64_t seed) {
  return ToyModel::init(kVocab, static_cast<std::size_t>(kVocab.total()), 5, seed, 0.8);
}

MaskedSample masked_at(const TokenSeq& y, const std::vector<std::size_t>& positions) {
  MaskedSample s;
  s.y = y;
  s.y_mask.tokens = y.tokens;
  for (std::size_t p : positions) s.y_mask.tokens[p] = kVocab.mask();
  s.positions = positions;
  return s;
}

// Argmax over ordinary tokens and eps, ties to the lower id.
std::pair<TokenId, double> best_fill(const Matrix& logits, std::size_t row) {
  TokenId best = -1;
  double best_lp = -1e300;
  for (TokenId id = 0; id < kVocab.total(); ++id) {
    if (id >= kVocab.size() && id != kVocab.eps()) continue;
    const double lp = testing::naive_log_prob(logits.row(row), static_cast<std::size_t>(id));
    if (lp > best_lp) {
      best_lp = lp;
      best = id;
    }
  }
  return {best, std::exp(best_lp)};
}

void check_trace_invariants(const ToyModel& model, const LogitLattice& enc,
                            const DecodeTrace& trace, std::size_t k) {
  const std::size_t n0 = trace.initial_masks;
  const std::size_t c = trace.fill_budget;
  CHECK(c == (n0 + k - 1) / k);
  CHECK(trace.iterations.size() <= k);
  std::vector<std::size_t> filled;
  for (std::size_t t = 0; t < trace.iterations.size(); ++t) {
    const DecodeIteration& it = trace.iterations[t];
    const std::size_t expected_left = n0 > (t + 1) * c ? n0 - (t + 1) * c : 0;
    CHECK(it.masks_remaining == expected_left);
    const auto masks = std::count(it.hypothesis.tokens.begin(), it.hypothesis.tokens.end(),
                                  kVocab.mask());
    CHECK(static_cast<std::size_t>(masks) == expected_left);
    const Matrix dec = decode_positions(model, it.input, enc).scores();
    for (std::size_t f = 0; f < it.filled_positions.size(); ++f) {
      const std::size_t pos = it.filled_positions[f];
      CHECK(it.input[pos] == kVocab.mask());
      const auto [tok, prob] = best_fill(dec, pos);
      CHECK(it.filled_tokens[f] == tok);
      CHECK(it.probabilities[f] == doctest::Approx(prob).epsilon(1e-12));
      CHECK(std::find(filled.begin(), filled.end(), pos) == filled.end());
      filled.push_back(pos);
    }
    // Earlier fills stay frozen.
    if (t > 0) {
      const DecodeIteration& prev = trace.iterations[t - 1];
      for (std::size_t p = 0; p < prev.hypothesis.size(); ++p) {
        if (prev.hypothesis[p] != kVocab.mask()) CHECK(it.hypothesis[p] == prev.hypothesis[p]);
      }
    }
  }
  CHECK(std::find(trace.final_tokens.tokens.begin(), trace.final_tokens.tokens.end(),
                  kVocab.mask()) == trace.final_tokens.tokens.end());
}

}  // namespace

TEST_CASE("five masks over ten iterations fill one per round") {
  std::mt19937_64 rng(1);
  const ToyModel model = random_model(3);
  const LogitLattice enc(testing::random_matrix(12, 10, rng));
  const TokenSeq y{{0, 1, 2, 3, 4, 5, 0, 1}};
  DecodeConfig cfg;
  cfg.iterations = 10;
  const DecodeTrace trace = refine(model, enc, masked_at(y, {0, 2, 3, 5, 7}), cfg);
  CHECK(trace.initial_masks == 5);
  CHECK(trace.fill_budget == 1);
  REQUIRE(trace.iterations.size() == 5);
  for (const DecodeIteration& it : trace.iterations) CHECK(it.filled_positions.size() == 1);
  check_trace_invariants(model, enc, trace, 10);
}

TEST_CASE("a single iteration fills every mask by argmax") {
  std::mt19937_64 rng(2);
  const ToyModel model = random_model(4);
  const LogitLattice enc(testing::random_matrix(9, 10, rng));
  const TokenSeq y{{5, 4, 3, 2, 1, 0}};
  const MaskedSample start = masked_at(y, {1, 2, 4});
  DecodeConfig cfg;
  cfg.iterations = 1;
  cfg.strip_eps = false;
  const DecodeTrace trace = refine(model, enc, start, cfg);
  REQUIRE(trace.iterations.size() == 1);
  CHECK(trace.fill_budget == 3);
  const Matrix dec = decode_positions(model, start.y_mask, enc).scores();
  TokenSeq expected = start.y_mask;
  for (std::size_t p : start.positions) expected.tokens[p] = best_fill(dec, p).first;
  CHECK(trace.final_tokens.tokens == expected.tokens);
}

TEST_CASE("nothing masked returns the greedy output") {
  std::mt19937_64 rng(3);
  const ToyModel model = random_model(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix feats = testing::random_matrix(10, 10, rng);
    DecodeConfig cfg;
    cfg.p_thres = 1e-12;
    const DecodeTrace trace = iterative_decode(model, feats, cfg);
    CHECK(trace.initial_masks == 0);
    CHECK(trace.iterations.empty());
    CHECK(trace.final_tokens.tokens == ctc_greedy(encode(model, feats), kVocab).tokens.tokens);
  }
}

TEST_CASE("iterative_decode invariants on random models") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const ToyModel model = random_model(10 + trial);
    const Matrix feats = testing::random_matrix(6 + rng() % 20, 10, rng);
    DecodeConfig cfg;
    cfg.iterations = 1 + rng() % 6;
    cfg.p_thres = 0.9;
    cfg.strip_eps = false;
    const DecodeTrace trace = iterative_decode(model, feats, cfg);
    CHECK(trace.initial.size() == trace.greedy.tokens.size());
    check_trace_invariants(model, encode(model, feats), trace, cfg.iterations);
  }
}

TEST_CASE("eps predictions are stripped from the output") {
  std::mt19937_64 rng(5);
  ToyModel model = random_model(6);
  model.params.dec_b(0, static_cast<std::size_t>(kVocab.eps())) = 50.0;
  const LogitLattice enc(testing::random_matrix(8, 10, rng));
  const TokenSeq y{{0, 1, 2, 3}};
  DecodeConfig cfg;
  cfg.iterations = 2;
  cfg.strip_eps = false;
  const DecodeTrace kept = refine(model, enc, masked_at(y, {1, 3}), cfg);
  CHECK(kept.final_tokens.tokens == std::vector<TokenId>{0, kVocab.eps(), 2, kVocab.eps()});
  cfg.strip_eps = true;
  const DecodeTrace stripped = refine(model, enc, masked_at(y, {1, 3}), cfg);
  CHECK(stripped.final_tokens.tokens == std::vector<TokenId>{0, 2});
}

TEST_CASE("empty greedy output decodes to an empty sentence") {
  ToyModel model = random_model(7);
  model.params.enc_b(0, static_cast<std::size_t>(kVocab.blank())) = 100.0;
  std::mt19937_64 rng(6);
  const DecodeTrace trace = iterative_decode(model, testing::random_matrix(5, 10, rng), {});
  CHECK(trace.final_tokens.empty());
  CHECK(trace.iterations.empty());
}

TEST_CASE("decode config validation") {
  DecodeConfig cfg;
  cfg.iterations = 0;
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("evaluate_wer examples") {
  const TokenSeq ref{{0, 1, 2, 3, 4, 5, 0, 1, 2, 3}};
  CHECK(evaluate_wer(ref, ref) == 0.0);
  CHECK(evaluate_wer(TokenSeq{}, TokenSeq{{0, 1, 2, 3}}) == 1.0);
  TokenSeq hyp = ref;
  hyp.tokens[4] = 0;
  CHECK(evaluate_wer(hyp, ref) == doctest::Approx(0.1));
  try {
    evaluate_wer(hyp, TokenSeq{});
    FAIL("expected DegenerateReference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateReference);
  }
}

TEST_CASE("trace serializes one record per line") {
  std::mt19937_64 rng(7);
  const ToyModel model = random_model(8);
  const LogitLattice enc(testing::random_matrix(10, 10, rng));
  DecodeConfig cfg;
  cfg.iterations = 3;
  const DecodeTrace trace = refine(model, enc, masked_at(TokenSeq{{0, 1, 2, 3, 4}}, {0, 1, 2, 4}), cfg);
  std::istringstream lines(trace_to_jsonl(trace, kVocab));
  std::string line;
  std::vector<nlohmann::json> recs;
  while (std::getline(lines, line)) recs.push_back(nlohmann::json::parse(line));
  REQUIRE(recs.size() == trace.iterations.size() + 2);
  CHECK(recs.front()["record"] == "start");
  CHECK(recs.front()["initial_masks"] == 4);
  CHECK(recs.front()["fill_budget"] == 2);
  CHECK(recs[1]["iteration"] == 1);
  CHECK(recs[1]["filled_positions"].size() == 2);
  CHECK(recs.back()["record"] == "final");
  CHECK(recs.back()["hypothesis"] == to_text(trace.final_tokens.tokens, kVocab));
  CHECK_FALSE(recs.front().contains("id"));

  std::istringstream tagged(trace_to_jsonl(trace, kVocab, "utt7"));
  while (std::getline(tagged, line)) CHECK(nlohmann::json::parse(line)["id"] == "utt7");
}
