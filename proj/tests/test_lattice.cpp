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

#include <cmath>
#include <limits>
#include <random>

#include "maskctc/error.hpp"
#include "maskctc/lattice.hpp"
#include "oracles.hpp"

using namespace maskctc;

TEST_CASE("vocab places reserved ids after ordinary tokens") {
  const Vocab v(26);
  CHECK(v.total() == 30);
  CHECK(v.blank() == 26);
  CHECK(v.mask() == 27);
  CHECK(v.eps() == 28);
  CHECK(v.pad() == 29);
  CHECK(v.symbol(0) == "a");
  CHECK(v.symbol(v.mask()) == "<mask>");
  CHECK(v.id_of("z") == 25);
  CHECK_THROWS_AS(Vocab(0), Error);

  const Vocab big(40);
  CHECK(big.symbol(30) == "s30");
  CHECK(big.id_of("s30") == 30);
  CHECK_THROWS_AS(big.id_of("s3"), Error);
  CHECK_THROWS_AS(big.id_of("s99"), Error);
}

TEST_CASE("token text form round-trips") {
  const Vocab v(5);
  const TokenSeq y = parse_tokens("a <mask> c <eps>", v, SeqRole::kMasked);
  CHECK(y.tokens == std::vector<TokenId>{0, v.mask(), 2, v.eps()});
  CHECK(to_text(y.tokens, v) == "a <mask> c <eps>");
  CHECK_THROWS_AS(parse_tokens("a <mask>", v, SeqRole::kGroundTruth), Error);
  CHECK_THROWS_AS(parse_tokens("a <blank>", v, SeqRole::kMasked), Error);
  CHECK_THROWS_AS(parse_tokens("q", v), Error);
}

TEST_CASE("log_softmax examples") {
  SUBCASE("symmetric row") {
    const Matrix lp = log_softmax(Matrix(1, 2, 0.0));
    CHECK(lp(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    CHECK(lp(0, 1) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("shift invariance") {
    for (double c : {-700.0, -3.5, 0.0, 42.0, 700.0}) {
      const Matrix lp = log_softmax(Matrix(1, 2, c));
      CHECK(lp(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    }
  }
  SUBCASE("[1, 0, 0]") {
    Matrix m(1, 3, 0.0);
    m(0, 0) = 1.0;
    const Matrix lp = log_softmax(m);
    // Frozen from direct logsumexp: ln(e + 2) = 1.5514447139320509.
    CHECK(lp(0, 0) == doctest::Approx(-0.5514447139320509).epsilon(1e-12));
    CHECK(lp(0, 1) == doctest::Approx(-1.5514447139320509).epsilon(1e-12));
    CHECK(lp(0, 2) == doctest::Approx(-1.5514447139320509).epsilon(1e-12));
  }
  SUBCASE("non-finite input") {
    Matrix m(1, 2, 0.0);
    m(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(log_softmax(m), Error);
    m(0, 1) = std::nan("");
    CHECK_THROWS_AS(LogitLattice{m}, Error);
  }
}

TEST_CASE("log_softmax rows normalize for random inputs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix m = testing::random_matrix(4, 9, rng, -50.0, 50.0);
    const Matrix lp = log_softmax(LogitLattice(m));
    for (std::size_t r = 0; r < lp.rows(); ++r) {
      double s = 0.0;
      for (double x : lp.row(r)) s += std::exp(x);
      CHECK(std::abs(s - 1.0) < 1e-9);
      CHECK(lp(r, 3) == doctest::Approx(testing::naive_log_prob(m.row(r), 3)).epsilon(1e-12));
    }
  }
}

TEST_CASE("collapse examples") {
  const Vocab v(3);
  const TokenId a = 0, b = 1, blank = v.blank();
  CHECK(collapse(std::vector<TokenId>{a, a, blank, b}, v).tokens ==
        std::vector<TokenId>{a, b});
  CHECK(collapse(std::vector<TokenId>{blank, blank}, v).tokens.empty());
  CHECK(collapse(std::vector<TokenId>{a, blank, a}, v).tokens ==
        std::vector<TokenId>{a, a});
}

TEST_CASE("collapse is idempotent on blank-free paths") {
  const Vocab v(3);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<TokenId> tok(0, v.size() - 1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<TokenId> path(rng() % 12);
    for (auto& t : path) t = tok(rng);
    const TokenSeq once = collapse(path, v);
    CHECK(collapse(once.tokens, v).tokens == once.tokens);
  }
}

TEST_CASE("levenshtein examples") {
  const std::vector<TokenId> abc{0, 1, 2};
  CHECK(levenshtein(abc, abc) == 0);
  CHECK(levenshtein(abc, std::vector<TokenId>{}) == 3);
  // Frozen from the naive recursive oracle.
  const std::vector<TokenId> axcd{0, 23, 2, 3};
  CHECK(testing::naive_levenshtein(abc, axcd) == 2);
  CHECK(levenshtein(abc, axcd) == 2);
}

TEST_CASE("levenshtein properties on random triples") {
  std::mt19937_64 rng(3);
  auto draw = [&] {
    std::vector<TokenId> s(rng() % 8);
    for (auto& t : s) t = static_cast<TokenId>(rng() % 3);
    return s;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = draw(), b = draw(), c = draw();
    const std::size_t ab = levenshtein(a, b);
    CHECK(ab == testing::naive_levenshtein(a, b));
    CHECK(ab == levenshtein(b, a));
    CHECK((ab == 0) == (a == b));
    CHECK(levenshtein(a, c) <= ab + levenshtein(b, c));
  }
}
