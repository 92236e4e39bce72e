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

#include "maskctc/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "maskctc/error.hpp"

namespace maskctc {

void validate(const DecodeConfig& cfg) {
  if (cfg.iterations == 0) {
    throw Error(ErrorCode::kInvalidConfig, "decoding needs at least one iteration");
  }
  if (!(cfg.p_thres > 0.0 && cfg.p_thres < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "p_thres must lie in (0, 1)");
  }
}

DecodeTrace refine(const ToyModel& model, const LogitLattice& enc,
                   const MaskedSample& start, const DecodeConfig& cfg) {
  validate(cfg);
  const Vocab& vocab = model.vocab;
  DecodeTrace trace;
  trace.initial = start.y_mask;
  trace.initial_masks = start.positions.size();
  trace.fill_budget =
      (trace.initial_masks + cfg.iterations - 1) / cfg.iterations;

  TokenSeq hyp = start.y_mask;
  std::vector<std::size_t> masked = start.positions;
  for (std::size_t round = 1; !masked.empty(); ++round) {
    const Matrix lp = log_softmax(decode_positions(model, hyp, enc));
    struct Fill {
      std::size_t pos;
      TokenId token;
      double prob;
    };
    std::vector<Fill> fills;
    fills.reserve(masked.size());
    for (std::size_t pos : masked) {
      const auto row = lp.row(pos);
      TokenId best = vocab.eps();
      for (TokenId id = 0; id < vocab.size(); ++id) {
        if (row[id] > row[best] || (row[id] == row[best] && id < best)) {
          best = id;
        }
      }
      fills.push_back({pos, best, std::exp(row[best])});
    }
    const std::size_t keep = std::min(trace.fill_budget, fills.size());
    std::stable_sort(fills.begin(), fills.end(),
                     [](const Fill& a, const Fill& b) { return a.prob > b.prob; });
    std::vector<Fill> kept(fills.begin(), fills.begin() + keep);
    std::sort(kept.begin(), kept.end(),
              [](const Fill& a, const Fill& b) { return a.pos < b.pos; });

    DecodeIteration it;
    it.index = round;
    it.input = hyp;
    for (const Fill& f : kept) {
      hyp.tokens[f.pos] = f.token;
      it.filled_positions.push_back(f.pos);
      it.filled_tokens.push_back(f.token);
      it.probabilities.push_back(f.prob);
    }
    std::erase_if(masked, [&](std::size_t pos) {
      return hyp[pos] != vocab.mask();
    });
    it.hypothesis = hyp;
    it.masks_remaining = masked.size();
    trace.iterations.push_back(std::move(it));
  }

  trace.final_tokens.tokens = hyp.tokens;
  if (cfg.strip_eps) {
    std::erase(trace.final_tokens.tokens, vocab.eps());
  }
  return trace;
}

DecodeTrace iterative_decode(const ToyModel& model, const Matrix& features,
                             const DecodeConfig& cfg) {
  validate(cfg);
  const LogitLattice enc = encode(model, features);
  GreedyDecode greedy = ctc_greedy(enc, model.vocab);
  MaskConfig mask_cfg;
  mask_cfg.p_thres = cfg.p_thres;
  const MaskedSample start = threshold_mask(greedy, model.vocab, mask_cfg);
  DecodeTrace trace = refine(model, enc, start, cfg);
  trace.greedy = std::move(greedy);
  return trace;
}

double evaluate_wer(const TokenSeq& hyp, const TokenSeq& ref) {
  if (ref.empty()) {
    throw Error(ErrorCode::kDegenerateReference, "reference sentence is empty");
  }
  return static_cast<double>(levenshtein(hyp.tokens, ref.tokens)) /
         static_cast<double>(ref.size());
}

std::string trace_to_jsonl(const DecodeTrace& trace, const Vocab& vocab,
                           const std::string& id) {
  using nlohmann::json;
  std::string out;
  json head = {
      {"record", "start"},
      {"greedy", to_text(trace.greedy.tokens.tokens, vocab)},
      {"confidences", trace.greedy.confidences},
      {"masked", to_text(trace.initial.tokens, vocab)},
      {"initial_masks", trace.initial_masks},
      {"fill_budget", trace.fill_budget},
  };
  if (!id.empty()) head["id"] = id;
  out += head.dump() + '\n';
  for (const DecodeIteration& it : trace.iterations) {
    json rec = {
        {"record", "iteration"},
        {"iteration", it.index},
        {"input", to_text(it.input.tokens, vocab)},
        {"hypothesis", to_text(it.hypothesis.tokens, vocab)},
        {"filled_positions", it.filled_positions},
        {"probabilities", it.probabilities},
        {"masks_remaining", it.masks_remaining},
    };
    if (!id.empty()) rec["id"] = id;
    out += rec.dump() + '\n';
  }
  json tail = {{"record", "final"},
               {"hypothesis", to_text(trace.final_tokens.tokens, vocab)}};
  if (!id.empty()) tail["id"] = id;
  out += tail.dump() + '\n';
  return out;
}

}  // namespace maskctc
