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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maskctc/axe.hpp"
#include "maskctc/lattice.hpp"
#include "maskctc/masking.hpp"

namespace maskctc {

// Parameter bundle of the toy encoder-decoder. Gradients reuse this type.
struct Params {
  Matrix embed;   // |V| x d token embeddings
  Matrix enc_w;   // F x |V| per-frame encoder map
  Matrix enc_b;   // 1 x |V|
  Matrix dec_w;   // 4d x |V| decoder window map
  Matrix dec_b;   // 1 x |V|
  Matrix pool_w;  // |V| x d projection of the mean encoder posterior

  // Visits (name, matrix) in a fixed order.
  template <typename Self, typename F>
  static void for_each(Self& self, F&& f) {
    f("embed", self.embed);
    f("enc_w", self.enc_w);
    f("enc_b", self.enc_b);
    f("dec_w", self.dec_w);
    f("dec_b", self.dec_b);
    f("pool_w", self.pool_w);
  }

  // Same shapes, all zeros.
  Params zeros_like() const;
  Params& operator+=(const Params& other);
  Params& operator*=(double s);
  bool operator==(const Params&) const = default;
};

struct ToyModel {
  Vocab vocab{1};
  std::size_t feature_dim = 0;
  std::size_t embed_dim = 0;
  std::uint64_t seed = 0;
  Params params;

  // Gaussian init (stddev init_scale) for weight matrices, zero biases.
  static ToyModel init(const Vocab& vocab, std::size_t feature_dim,
                       std::size_t embed_dim, std::uint64_t seed,
                       double init_scale = 0.1);

  bool operator==(const ToyModel&) const = default;
};

struct LossConfig {
  double ctc_weight = 0.3;  // lambda
  AxeConfig axe;
  bool use_axe = true;  // false: position-wise CE
  bool rectify = false;
  // Whether decoder-side gradients reach the encoder through the pooled
  // posterior.
  bool decoder_grad_to_encoder = true;
  double learning_rate = 0.5;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
};

void validate(const LossConfig& cfg);

// features: T x F. Row t of the result is features[t] * enc_w + enc_b.
LogitLattice encode(const ToyModel& model, const Matrix& features);

// Decoder lattice (S x |V|) for input sentence y_in, conditioned on the
// encoder lattice through its mean posterior. Row p sees tokens p-1, p, p+1
// with pad outside the sentence.
LogitLattice decode_positions(const ToyModel& model, const TokenSeq& y_in,
                              const LogitLattice& enc);

// Fills each masked position with the decoder's most likely ordinary token.
TokenSeq model_fill(const ToyModel& model, const TokenSeq& y_mask,
                    const LogitLattice& enc);

struct JointLoss {
  double loss = 0.0;
  double ctc = 0.0;
  double decoder = 0.0;  // AXE or CE, unweighted
  Params grads;
};

// lambda * CTC(encode(features), y) + (1 - lambda) * AXE-or-CE(decoder
// lattice for dec_input, y). Throws SampleSkipped when y is CTC-infeasible.
JointLoss joint_loss(const ToyModel& model, const Matrix& features,
                     const TokenSeq& y, const TokenSeq& dec_input,
                     const LossConfig& cfg);

// Builds the decoder input for one training sample: random masking, then
// dynamic rectification with the live model when cfg.rectify is set.
TokenSeq make_decoder_input(const ToyModel& model, const Matrix& features,
                            const TokenSeq& y, const LossConfig& loss_cfg,
                            const MaskConfig& mask_cfg, Rng& rng);

struct Example {
  std::string id;
  Matrix features;
  TokenSeq y;
};

struct TrainRecord {
  std::vector<double> step_loss;  // mean batch loss before each update
  std::size_t skipped = 0;
};

// Plain minibatch SGD. Deterministic given the seed; throws
// TrainingDiverged on a non-finite loss.
TrainRecord train(ToyModel& model, std::span<const Example> data,
                  const LossConfig& cfg, const MaskConfig& mask_cfg,
                  std::uint64_t seed,
                  const std::function<void(std::size_t, double)>& on_step = {});

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace maskctc
