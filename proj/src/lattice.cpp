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

#include "maskctc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "maskctc/error.hpp"

namespace maskctc {

Vocab::Vocab(int size) : size_(size) {
  if (size <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "vocabulary size must be positive");
  }
}

std::string Vocab::symbol(TokenId id) const {
  if (id == blank()) return "<blank>";
  if (id == mask()) return "<mask>";
  if (id == eps()) return "<eps>";
  if (id == pad()) return "<pad>";
  if (!is_ordinary(id)) {
    throw Error(ErrorCode::kInvalidInput,
                "token id out of range: " + std::to_string(id));
  }
  if (id < 26) return std::string(1, static_cast<char>('a' + id));
  return "s" + std::to_string(id);
}

TokenId Vocab::id_of(std::string_view sym) const {
  if (sym == "<blank>") return blank();
  if (sym == "<mask>") return mask();
  if (sym == "<eps>") return eps();
  if (sym == "<pad>") return pad();
  TokenId id = -1;
  if (sym.size() == 1 && sym[0] >= 'a' && sym[0] <= 'z') {
    id = sym[0] - 'a';
  } else if (sym.size() > 1 && sym[0] == 's') {
    id = 0;
    for (char c : sym.substr(1)) {
      if (c < '0' || c > '9' || id > size_) {
        id = -1;
        break;
      }
      id = id * 10 + (c - '0');
    }
    if (id < 26) id = -1;
  }
  if (!is_ordinary(id)) {
    throw Error(ErrorCode::kInvalidInput,
                "unknown token symbol: " + std::string(sym));
  }
  return id;
}

void validate(const TokenSeq& seq, const Vocab& vocab) {
  for (TokenId id : seq.tokens) {
    if (!vocab.is_valid(id)) {
      throw Error(ErrorCode::kInvalidInput,
                  "token id out of range: " + std::to_string(id));
    }
    switch (seq.role) {
      case SeqRole::kGroundTruth:
        if (vocab.is_reserved(id)) {
          throw Error(ErrorCode::kInvalidInput,
                      "ground-truth sequence contains reserved id");
        }
        break;
      case SeqRole::kMasked:
      case SeqRole::kRectified:
        if (id == vocab.blank()) {
          throw Error(ErrorCode::kInvalidInput,
                      "masked sequence contains blank");
        }
        break;
      case SeqRole::kPredicted:
        if (id == vocab.blank() || id == vocab.mask()) {
          throw Error(ErrorCode::kInvalidInput,
                      "predicted sequence contains blank or mask");
        }
        break;
      case SeqRole::kCtcGreedy:
        if (id == vocab.blank()) {
          throw Error(ErrorCode::kInvalidInput,
                      "collapsed greedy output contains blank");
        }
        break;
    }
  }
}

std::string to_text(std::span<const TokenId> tokens, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.symbol(tokens[i]);
  }
  return out;
}

TokenSeq parse_tokens(std::string_view text, const Vocab& vocab,
                      SeqRole role) {
  TokenSeq seq{{}, role};
  std::istringstream in{std::string(text)};
  std::string sym;
  while (in >> sym) seq.tokens.push_back(vocab.id_of(sym));
  validate(seq, vocab);
  return seq;
}

LogitLattice::LogitLattice(Matrix scores) : scores_(std::move(scores)) {
  if (!all_finite(scores_)) {
    throw Error(ErrorCode::kInvalidLattice, "lattice contains non-finite scores");
  }
}

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

Matrix log_softmax(const Matrix& scores) {
  if (!all_finite(scores)) {
    throw Error(ErrorCode::kInvalidLattice, "lattice contains non-finite scores");
  }
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto in = scores.row(r);
    const double z = logsumexp(in);
    auto o = out.row(r);
    for (std::size_t v = 0; v < in.size(); ++v) o[v] = in[v] - z;
  }
  return out;
}

Matrix log_softmax(const LogitLattice& lattice) {
  return log_softmax(lattice.scores());
}

TokenSeq collapse(std::span<const TokenId> path, const Vocab& vocab) {
  TokenSeq out{{}, SeqRole::kCtcGreedy};
  TokenId prev = -1;
  for (TokenId id : path) {
    if (id != prev && id != vocab.blank()) out.tokens.push_back(id);
    prev = id;
  }
  return out;
}

std::size_t levenshtein(std::span<const TokenId> a,
                        std::span<const TokenId> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace maskctc
