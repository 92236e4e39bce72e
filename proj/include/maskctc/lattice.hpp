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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskctc/matrix.hpp"

namespace maskctc {

using TokenId = int;

// Token inventory. Ordinary tokens occupy ids [0, size); the four reserved
// ids follow in the order blank, mask, eps, pad.
class Vocab {
 public:
  explicit Vocab(int size);

  int size() const noexcept { return size_; }
  int total() const noexcept { return size_ + 4; }

  TokenId blank() const noexcept { return size_; }
  TokenId mask() const noexcept { return size_ + 1; }
  TokenId eps() const noexcept { return size_ + 2; }
  TokenId pad() const noexcept { return size_ + 3; }

  bool is_valid(TokenId id) const noexcept { return id >= 0 && id < total(); }
  bool is_ordinary(TokenId id) const noexcept { return id >= 0 && id < size_; }
  bool is_reserved(TokenId id) const noexcept {
    return id >= size_ && id < total();
  }

  // Ordinary tokens print as a..z, then s26, s27, ... past the alphabet.
  std::string symbol(TokenId id) const;
  TokenId id_of(std::string_view symbol) const;

  bool operator==(const Vocab&) const = default;

 private:
  int size_;
};

enum class SeqRole { kGroundTruth, kMasked, kPredicted, kRectified, kCtcGreedy };

struct TokenSeq {
  std::vector<TokenId> tokens;
  SeqRole role = SeqRole::kGroundTruth;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  TokenId operator[](std::size_t i) const { return tokens[i]; }

  bool operator==(const TokenSeq&) const = default;
};

// Throws InvalidInput when an id is out of range or the role forbids it.
void validate(const TokenSeq& seq, const Vocab& vocab);

std::string to_text(std::span<const TokenId> tokens, const Vocab& vocab);
TokenSeq parse_tokens(std::string_view text, const Vocab& vocab,
                      SeqRole role = SeqRole::kGroundTruth);

// rows x |V| unnormalized scores; every entry finite.
class LogitLattice {
 public:
  LogitLattice() = default;
  explicit LogitLattice(Matrix scores);

  std::size_t rows() const noexcept { return scores_.rows(); }
  std::size_t vocab_size() const noexcept { return scores_.cols(); }
  const Matrix& scores() const noexcept { return scores_; }

 private:
  Matrix scores_;
};

double logsumexp(std::span<const double> xs);

// Row-wise log-softmax of the lattice.
Matrix log_softmax(const LogitLattice& lattice);
Matrix log_softmax(const Matrix& scores);

// The CTC collapse: merge adjacent duplicates, then drop blanks.
TokenSeq collapse(std::span<const TokenId> path, const Vocab& vocab);

std::size_t levenshtein(std::span<const TokenId> a, std::span<const TokenId> b);

}  // namespace maskctc
