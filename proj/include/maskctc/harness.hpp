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
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskctc/decoder.hpp"
#include "maskctc/masking.hpp"
#include "maskctc/model.hpp"

namespace maskctc {

// Synthetic transcription task. Sentences come from a random bigram chain
// over the alphabet; each token becomes a run of noisy one-hot frames.
struct SynthSpec {
  int alphabet = 26;
  std::size_t min_len = 5;
  std::size_t max_len = 12;
  std::size_t min_frames_per_token = 2;
  std::size_t max_frames_per_token = 4;
  double noise_sigma = 0.3;
  double substitution_rate = 0.05;
  std::size_t train_size = 2000;
  std::size_t dev_size = 200;
  std::size_t test_size = 500;
  // Each symbol gets lm_branching preferred successors sharing lm_mass of
  // the transition probability; the rest is uniform.
  std::size_t lm_branching = 3;
  double lm_mass = 0.9;
  std::uint64_t seed = 1;

  Vocab vocab() const { return Vocab(alphabet); }
  std::size_t feature_dim() const {
    return static_cast<std::size_t>(vocab().total());
  }
};

void validate(const SynthSpec& spec);

struct Corpus {
  SynthSpec spec;
  std::vector<Example> train, dev, test;

  const std::vector<Example>& split(const std::string& name) const;
};

Corpus generate_corpus(const SynthSpec& spec);

// Writes <dir>/dataset.json plus, per split, <split>/text (one sentence per
// line) and <split>/feats/<id>.bin.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

// Per-utterance feature file: "MCF1", uint32 rows, uint32 cols, then
// rows*cols little-endian doubles.
void write_features(const Matrix& features, const std::filesystem::path& path);
Matrix read_features(const std::filesystem::path& path);

enum class ExperimentTag { kMaskCe, kMaskAxe, kMaskRecAxe };

std::string tag_name(ExperimentTag tag);
ExperimentTag parse_tag(const std::string& name);
// Sets use_axe and rectify for the tag.
LossConfig loss_config_for(ExperimentTag tag, LossConfig base);

struct RunConfig {
  std::uint64_t seed = 1;
  SynthSpec synth;
  LossConfig loss;
  MaskConfig mask;
  std::vector<std::size_t> iterations = {1, 10};
  bool strip_eps = true;
  std::size_t embed_dim = 32;
  double init_scale = 0.1;
  std::vector<ExperimentTag> tags = {ExperimentTag::kMaskCe,
                                     ExperimentTag::kMaskAxe,
                                     ExperimentTag::kMaskRecAxe};
  std::vector<std::string> eval_splits = {"dev", "test"};
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::size_t threads = 1;

  DecodeConfig decode_config(std::size_t k) const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

ToyModel train_model(const RunConfig& cfg, ExperimentTag tag,
                     const Corpus& corpus, TrainRecord* record = nullptr);

struct DecodeResult {
  std::vector<DecodeTrace> traces;  // one per utterance, in corpus order
  std::size_t edits = 0;
  std::size_t ref_tokens = 0;
  double seconds = 0.0;  // wall clock, informational

  double wer_percent() const {
    return ref_tokens ? 100.0 * static_cast<double>(edits) /
                            static_cast<double>(ref_tokens)
                      : 0.0;
  }
};

DecodeResult decode_split(const ToyModel& model,
                          const std::vector<Example>& data,
                          const DecodeConfig& cfg, std::size_t threads);

struct WerRow {
  std::string tag;
  std::string split;
  std::size_t iterations = 0;
  std::size_t utterances = 0;
  std::size_t ref_tokens = 0;
  std::size_t edits = 0;
  double wer_percent = 0.0;
  double mean_refine_rounds = 0.0;
};

struct TagRun {
  ExperimentTag tag;
  ToyModel model;
  TrainRecord record;
  // (split, K) -> decode result
  std::map<std::pair<std::string, std::size_t>, DecodeResult> decodes;
};

struct ExperimentReport {
  std::vector<WerRow> rows;
  std::vector<TagRun> runs;
  // Set when training diverged; rows then cover the tags finished before.
  std::string error;
};

// Trains every configured tag on the corpus at cfg.data_dir, decodes each
// evaluation split at each K and writes into cfg.out_dir:
//   report.csv, summary.json          deterministic for a fixed config
//   timing.json                       wall-clock decode seconds
//   model_<tag>.ckpt, loss_<tag>.csv  per tag
ExperimentReport run_experiment(const RunConfig& cfg);

// Evaluates an already-trained model; rows carry the given tag name.
std::vector<WerRow> evaluate_model(const ToyModel& model, const Corpus& corpus,
                                   const RunConfig& cfg,
                                   const std::string& tag);

// report.csv and summary.json; keys of `extra` are merged into the summary.
void write_report(const std::vector<WerRow>& rows, const RunConfig& cfg,
                  const std::filesystem::path& dir,
                  const nlohmann::json& extra = nlohmann::json::object());

enum class ScatterLoss { kCe, kAxe };

struct ScatterPoint {
  std::string id;
  double loss = 0.0;
  std::size_t distance = 0;
};

struct ScatterResult {
  std::vector<ScatterPoint> points;
  double pearson = 0.0;
  std::size_t mask_draws = 0;
};

// Per utterance: the chosen decoder loss on training-style masked inputs,
// averaged over `mask_draws` mask draws (seeded by `seed` and the utterance
// index, so both loss kinds see identical inputs), and the Levenshtein
// distance between the iteratively decoded output and the reference.
ScatterResult scatter_export(const ToyModel& model,
                             const std::vector<Example>& data,
                             ScatterLoss kind, const AxeConfig& axe,
                             const MaskConfig& mask, const DecodeConfig& decode,
                             std::uint64_t seed, std::size_t threads,
                             std::size_t mask_draws = 16);

void write_scatter_csv(const ScatterResult& result, ScatterLoss kind,
                       const std::filesystem::path& path);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace maskctc
