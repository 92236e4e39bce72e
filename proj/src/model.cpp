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

#include "maskctc/model.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "maskctc/ctc.hpp"
#include "maskctc/error.hpp"

namespace maskctc {

Params Params::zeros_like() const {
  Params out;
  out.embed = Matrix(embed.rows(), embed.cols());
  out.enc_w = Matrix(enc_w.rows(), enc_w.cols());
  out.enc_b = Matrix(enc_b.rows(), enc_b.cols());
  out.dec_w = Matrix(dec_w.rows(), dec_w.cols());
  out.dec_b = Matrix(dec_b.rows(), dec_b.cols());
  out.pool_w = Matrix(pool_w.rows(), pool_w.cols());
  return out;
}

Params& Params::operator+=(const Params& other) {
  embed += other.embed;
  enc_w += other.enc_w;
  enc_b += other.enc_b;
  dec_w += other.dec_w;
  dec_b += other.dec_b;
  pool_w += other.pool_w;
  return *this;
}

Params& Params::operator*=(double s) {
  for_each(*this, [s](const char*, Matrix& m) { m *= s; });
  return *this;
}

ToyModel ToyModel::init(const Vocab& vocab, std::size_t feature_dim,
                        std::size_t embed_dim, std::uint64_t seed,
                        double init_scale) {
  if (feature_dim == 0 || embed_dim == 0) {
    throw Error(ErrorCode::kInvalidConfig, "model dimensions must be positive");
  }
  const auto v = static_cast<std::size_t>(vocab.total());
  ToyModel model;
  model.vocab = vocab;
  model.feature_dim = feature_dim;
  model.embed_dim = embed_dim;
  model.seed = seed;
  Params& p = model.params;
  p.embed = Matrix(v, embed_dim);
  p.enc_w = Matrix(feature_dim, v);
  p.enc_b = Matrix(1, v);
  p.dec_w = Matrix(4 * embed_dim, v);
  p.dec_b = Matrix(1, v);
  p.pool_w = Matrix(v, embed_dim);

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, init_scale);
  for (Matrix* m : {&p.embed, &p.enc_w, &p.dec_w, &p.pool_w}) {
    for (double& x : m->values()) x = normal(rng);
  }
  return model;
}

void validate(const LossConfig& cfg) {
  if (!(cfg.ctc_weight >= 0.0 && cfg.ctc_weight <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "ctc_weight must lie in [0, 1]");
  }
  if (!(cfg.axe.skip_target_penalty >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "skip-target penalty must be >= 0");
  }
  if (!(cfg.learning_rate >= 0.0) || cfg.batch_size == 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "learning_rate must be >= 0 and batch_size positive");
  }
}

LogitLattice encode(const ToyModel& model, const Matrix& features) {
  if (features.cols() != model.feature_dim) {
    throw Error(ErrorCode::kInvalidInput, "feature dimension mismatch");
  }
  if (!all_finite(features)) {
    throw Error(ErrorCode::kInvalidInput, "features contain non-finite values");
  }
  const Params& p = model.params;
  const std::size_t v = p.enc_w.cols();
  Matrix out(features.rows(), v);
  for (std::size_t t = 0; t < features.rows(); ++t) {
    auto o = out.row(t);
    std::copy(p.enc_b.row(0).begin(), p.enc_b.row(0).end(), o.begin());
    const auto x = features.row(t);
    for (std::size_t f = 0; f < x.size(); ++f) {
      if (x[f] == 0.0) continue;
      const auto w = p.enc_w.row(f);
      for (std::size_t k = 0; k < v; ++k) o[k] += x[f] * w[k];
    }
  }
  return LogitLattice(std::move(out));
}

namespace {

// Intermediate values of the decoder forward pass kept for backprop.
struct DecoderForward {
  Matrix enc_probs;             // T x |V|
  std::vector<double> pooled;   // |V|, mean encoder posterior
  std::vector<double> context;  // d
  Matrix logits;                // S x |V|
};

TokenId neighbour(const TokenSeq& y, std::ptrdiff_t p, TokenId pad) {
  if (p < 0 || p >= static_cast<std::ptrdiff_t>(y.size())) return pad;
  return y[static_cast<std::size_t>(p)];
}

DecoderForward decoder_forward(const ToyModel& model, const TokenSeq& y_in,
                               const LogitLattice& enc) {
  const Params& p = model.params;
  const std::size_t d = model.embed_dim;
  const std::size_t v = static_cast<std::size_t>(model.vocab.total());
  if (enc.vocab_size() != v) {
    throw Error(ErrorCode::kInvalidInput, "encoder lattice width mismatch");
  }
  for (TokenId id : y_in.tokens) {
    if (!model.vocab.is_valid(id)) {
      throw Error(ErrorCode::kInvalidInput, "decoder input id out of range");
    }
  }

  DecoderForward fw;
  const Matrix lp = log_softmax(enc);
  fw.enc_probs = Matrix(lp.rows(), v);
  fw.pooled.assign(v, 0.0);
  for (std::size_t t = 0; t < lp.rows(); ++t) {
    for (std::size_t k = 0; k < v; ++k) {
      fw.enc_probs(t, k) = std::exp(lp(t, k));
      fw.pooled[k] += fw.enc_probs(t, k);
    }
  }
  if (lp.rows() > 0) {
    for (double& x : fw.pooled) x /= static_cast<double>(lp.rows());
  }
  fw.context.assign(d, 0.0);
  for (std::size_t k = 0; k < v; ++k) {
    const auto w = p.pool_w.row(k);
    for (std::size_t c = 0; c < d; ++c) fw.context[c] += fw.pooled[k] * w[c];
  }

  // The context block of the window is shared by every position.
  std::vector<double> shared(p.dec_b.row(0).begin(), p.dec_b.row(0).end());
  for (std::size_t c = 0; c < d; ++c) {
    const auto w = p.dec_w.row(3 * d + c);
    for (std::size_t k = 0; k < v; ++k) shared[k] += fw.context[c] * w[k];
  }

  const TokenId pad = model.vocab.pad();
  fw.logits = Matrix(y_in.size(), v);
  for (std::size_t pos = 0; pos < y_in.size(); ++pos) {
    auto o = fw.logits.row(pos);
    std::copy(shared.begin(), shared.end(), o.begin());
    const auto sp = static_cast<std::ptrdiff_t>(pos);
    const TokenId window[3] = {neighbour(y_in, sp - 1, pad), y_in[pos],
                               neighbour(y_in, sp + 1, pad)};
    for (std::size_t slot = 0; slot < 3; ++slot) {
      const auto e = p.embed.row(static_cast<std::size_t>(window[slot]));
      for (std::size_t c = 0; c < d; ++c) {
        const auto w = p.dec_w.row(slot * d + c);
        for (std::size_t k = 0; k < v; ++k) o[k] += e[c] * w[k];
      }
    }
  }
  return fw;
}

// Accumulates decoder parameter gradients for dL/dlogits = g_dec, and
// returns dL/d(encoder logits) through the pooled posterior.
Matrix decoder_backward(const ToyModel& model, const TokenSeq& y_in,
                        const DecoderForward& fw, const Matrix& g_dec,
                        Params& grads) {
  const Params& p = model.params;
  const std::size_t d = model.embed_dim;
  const std::size_t v = static_cast<std::size_t>(model.vocab.total());
  const TokenId pad = model.vocab.pad();

  std::vector<double> d_context(d, 0.0);
  std::vector<double> dh(4 * d);
  for (std::size_t pos = 0; pos < y_in.size(); ++pos) {
    const auto g = g_dec.row(pos);
    const auto sp = static_cast<std::ptrdiff_t>(pos);
    const TokenId window[3] = {neighbour(y_in, sp - 1, pad), y_in[pos],
                               neighbour(y_in, sp + 1, pad)};
    for (std::size_t k = 0; k < v; ++k) grads.dec_b(0, k) += g[k];

    for (std::size_t r = 0; r < 4 * d; ++r) {
      const auto w = p.dec_w.row(r);
      double acc = 0.0;
      for (std::size_t k = 0; k < v; ++k) acc += w[k] * g[k];
      dh[r] = acc;
    }
    for (std::size_t slot = 0; slot < 3; ++slot) {
      const auto tok = static_cast<std::size_t>(window[slot]);
      const auto e = p.embed.row(tok);
      auto ge = grads.embed.row(tok);
      for (std::size_t c = 0; c < d; ++c) {
        ge[c] += dh[slot * d + c];
        auto gw = grads.dec_w.row(slot * d + c);
        for (std::size_t k = 0; k < v; ++k) gw[k] += e[c] * g[k];
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      d_context[c] += dh[3 * d + c];
      auto gw = grads.dec_w.row(3 * d + c);
      for (std::size_t k = 0; k < v; ++k) gw[k] += fw.context[c] * g[k];
    }
  }

  std::vector<double> d_pooled(v, 0.0);
  for (std::size_t k = 0; k < v; ++k) {
    const auto w = p.pool_w.row(k);
    auto gw = grads.pool_w.row(k);
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      gw[c] += fw.pooled[k] * d_context[c];
      acc += w[c] * d_context[c];
    }
    d_pooled[k] = acc;
  }

  // pooled = mean_t softmax(z_t); softmax Jacobian per frame.
  const std::size_t frames = fw.enc_probs.rows();
  Matrix g_enc(frames, v);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto s = fw.enc_probs.row(t);
    double dot = 0.0;
    for (std::size_t k = 0; k < v; ++k) dot += s[k] * d_pooled[k];
    for (std::size_t k = 0; k < v; ++k) {
      g_enc(t, k) = s[k] * (d_pooled[k] - dot) / static_cast<double>(frames);
    }
  }
  return g_enc;
}

void encoder_backward(const Matrix& features, const Matrix& g_enc,
                      Params& grads) {
  for (std::size_t t = 0; t < features.rows(); ++t) {
    const auto g = g_enc.row(t);
    for (std::size_t k = 0; k < g.size(); ++k) grads.enc_b(0, k) += g[k];
    const auto x = features.row(t);
    for (std::size_t f = 0; f < x.size(); ++f) {
      if (x[f] == 0.0) continue;
      auto gw = grads.enc_w.row(f);
      for (std::size_t k = 0; k < g.size(); ++k) gw[k] += x[f] * g[k];
    }
  }
}

}  // namespace

LogitLattice decode_positions(const ToyModel& model, const TokenSeq& y_in,
                              const LogitLattice& enc) {
  return LogitLattice(decoder_forward(model, y_in, enc).logits);
}

TokenSeq model_fill(const ToyModel& model, const TokenSeq& y_mask,
                    const LogitLattice& enc) {
  TokenSeq out{y_mask.tokens, SeqRole::kPredicted};
  const LogitLattice dec = decode_positions(model, y_mask, enc);
  const auto ordinary = static_cast<std::size_t>(model.vocab.size());
  for (std::size_t pos = 0; pos < y_mask.size(); ++pos) {
    if (y_mask[pos] != model.vocab.mask()) continue;
    const auto row = dec.scores().row(pos).first(ordinary);
    out.tokens[pos] = static_cast<TokenId>(
        std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

JointLoss joint_loss(const ToyModel& model, const Matrix& features,
                     const TokenSeq& y, const TokenSeq& dec_input,
                     const LossConfig& cfg) {
  if (y.empty()) {
    throw Error(ErrorCode::kDegenerateInstance, "empty target sentence");
  }
  const double lambda = cfg.ctc_weight;
  const LogitLattice enc = encode(model, features);
  const CtcResult ctc = ctc_loss(enc, y, model.vocab);
  if (!ctc.feasible()) {
    throw Error(ErrorCode::kSampleSkipped,
                "target does not fit in " + std::to_string(features.rows()) +
                    " frames");
  }

  const DecoderForward fw = decoder_forward(model, dec_input, enc);
  const LogitLattice dec(fw.logits);
  JointLoss out;
  out.ctc = ctc.loss;
  Matrix g_dec;
  if (cfg.use_axe) {
    const AxeResult axe = axe_loss(dec, y, model.vocab, cfg.axe);
    out.decoder = axe.loss;
    g_dec = alignment_grad(log_softmax(dec), y, axe_backtrace(axe.dp),
                           model.vocab, cfg.axe);
  } else {
    out.decoder = ce_loss(dec, y);
    g_dec = ce_grad(dec, y);
  }
  out.loss = lambda * out.ctc + (1.0 - lambda) * out.decoder;

  out.grads = model.params.zeros_like();
  g_dec *= 1.0 - lambda;
  Matrix g_enc = ctc.grad;
  g_enc *= lambda;
  Matrix g_pool = decoder_backward(model, dec_input, fw, g_dec, out.grads);
  if (cfg.decoder_grad_to_encoder) g_enc += g_pool;
  encoder_backward(features, g_enc, out.grads);
  return out;
}

TokenSeq make_decoder_input(const ToyModel& model, const Matrix& features,
                            const TokenSeq& y, const LossConfig& loss_cfg,
                            const MaskConfig& mask_cfg, Rng& rng) {
  MaskedSample masked = sample_train_mask(y, model.vocab, mask_cfg, rng);
  if (!loss_cfg.rectify) return masked.y_mask;
  const LogitLattice enc = encode(model, features);
  const FillFn fill = [&](const TokenSeq& y_mask) {
    return model_fill(model, y_mask, enc);
  };
  return dynamic_rectify(masked, fill, model.vocab, mask_cfg, rng).y_rec;
}

TrainRecord train(ToyModel& model, std::span<const Example> data,
                  const LossConfig& cfg, const MaskConfig& mask_cfg,
                  std::uint64_t seed,
                  const std::function<void(std::size_t, double)>& on_step) {
  validate(cfg);
  if (data.empty()) {
    throw Error(ErrorCode::kInvalidInput, "empty training set");
  }
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  TrainRecord record;
  record.step_loss.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Params batch_grad = model.params.zeros_like();
    double batch_loss = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const Example& ex = data[pick(rng)];
      try {
        const TokenSeq dec_in =
            make_decoder_input(model, ex.features, ex.y, cfg, mask_cfg, rng);
        JointLoss jl = joint_loss(model, ex.features, ex.y, dec_in, cfg);
        batch_loss += jl.loss;
        batch_grad += jl.grads;
        ++used;
      } catch (const Error& err) {
        if (err.code() == ErrorCode::kSampleSkipped) {
          ++record.skipped;
          continue;
        }
        // Finite but huge parameters overflow the logits.
        if (err.code() == ErrorCode::kInvalidLattice) {
          throw Error(ErrorCode::kTrainingDiverged,
                      "non-finite logits at step " + std::to_string(step));
        }
        throw;
      }
    }
    if (used == 0) continue;
    batch_loss /= static_cast<double>(used);
    if (!std::isfinite(batch_loss)) {
      throw Error(ErrorCode::kTrainingDiverged,
                  "non-finite loss at step " + std::to_string(step));
    }
    record.step_loss.push_back(batch_loss);
    if (on_step) on_step(step, batch_loss);
    batch_grad *= -cfg.learning_rate / static_cast<double>(used);
    model.params += batch_grad;
    bool finite = true;
    Params::for_each(model.params,
                     [&](const char*, const Matrix& m) { finite &= all_finite(m); });
    if (!finite) {
      throw Error(ErrorCode::kTrainingDiverged,
                  "non-finite parameters after step " + std::to_string(step));
    }
  }
  return record;
}

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
  out << "maskctc-checkpoint 1\n"
      << "vocab_size " << model.vocab.size() << '\n'
      << "feature_dim " << model.feature_dim << '\n'
      << "embed_dim " << model.embed_dim << '\n'
      << "seed " << model.seed << '\n';
  char buf[64];
  Params::for_each(model.params, [&](const char* name, const Matrix& m) {
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        // Hex floats round-trip exactly.
        std::snprintf(buf, sizeof buf, "%a", m(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  });
  if (!out) {
    throw Error(ErrorCode::kIoError, "write failed for " + path.string());
  }
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  }
  auto bad = [&](const std::string& what) {
    return Error(ErrorCode::kIoError,
                 "malformed checkpoint " + path.string() + ": " + what);
  };
  std::string magic, key;
  int version = 0;
  in >> magic >> version;
  if (magic != "maskctc-checkpoint" || version != 1) throw bad("header");
  int vocab_size = 0;
  ToyModel model;
  in >> key >> vocab_size;
  if (key != "vocab_size" || vocab_size <= 0) throw bad("vocab_size");
  model.vocab = Vocab(vocab_size);
  in >> key >> model.feature_dim;
  if (key != "feature_dim") throw bad("feature_dim");
  in >> key >> model.embed_dim;
  if (key != "embed_dim") throw bad("embed_dim");
  in >> key >> model.seed;
  if (key != "seed") throw bad("seed");

  Params::for_each(model.params, [&](const char* name, Matrix& m) {
    std::string tag, got;
    std::size_t rows = 0, cols = 0;
    in >> tag >> got >> rows >> cols;
    if (tag != "matrix" || got != name) throw bad(std::string("matrix ") + name);
    m = Matrix(rows, cols);
    std::string tok;
    for (double& x : m.values()) {
      if (!(in >> tok)) throw bad("truncated values");
      char* end = nullptr;
      x = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw bad("value " + tok);
    }
  });

  const auto v = static_cast<std::size_t>(model.vocab.total());
  const std::size_t d = model.embed_dim;
  const Params& p = model.params;
  if (p.embed.rows() != v || p.embed.cols() != d ||
      p.enc_w.rows() != model.feature_dim || p.enc_w.cols() != v ||
      p.enc_b.cols() != v || p.dec_w.rows() != 4 * d || p.dec_w.cols() != v ||
      p.dec_b.cols() != v || p.pool_w.rows() != v || p.pool_w.cols() != d) {
    throw bad("parameter shapes");
  }
  return model;
}

}  // namespace maskctc
