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

#include "maskctc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "maskctc/error.hpp"

namespace maskctc {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

const char* kSplits[] = {"train", "dev", "test"};

std::string utterance_id(const std::string& split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06zu", split.c_str(), index);
  return buf;
}

std::string format_double(double v, const char* fmt = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "cannot create directory " + dir.string());
  }
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; fn must write only
// to slot i of its output.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Bigram chain over the alphabet.
struct BigramChain {
  std::vector<std::vector<TokenId>> successors;
  double mass = 0.9;
  int alphabet = 0;

  TokenId next(TokenId prev, Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> any(0, alphabet - 1);
    if (prev < 0 || successors[prev].empty() || u(rng) >= mass) return any(rng);
    const auto& succ = successors[prev];
    return succ[std::uniform_int_distribution<std::size_t>(0, succ.size() - 1)(rng)];
  }
};

BigramChain make_chain(const SynthSpec& spec) {
  Rng rng = make_rng(spec.seed, 0);
  BigramChain chain;
  chain.mass = spec.lm_mass;
  chain.alphabet = spec.alphabet;
  std::vector<TokenId> order(spec.alphabet);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k =
      std::min<std::size_t>(spec.lm_branching, static_cast<std::size_t>(spec.alphabet));
  for (int a = 0; a < spec.alphabet; ++a) {
    std::shuffle(order.begin(), order.end(), rng);
    chain.successors.emplace_back(order.begin(), order.begin() + k);
  }
  return chain;
}

Example make_utterance(const SynthSpec& spec, const BigramChain& chain,
                       const Vocab& vocab, Rng& rng) {
  std::uniform_int_distribution<std::size_t> len(spec.min_len, spec.max_len);
  std::uniform_int_distribution<std::size_t> reps(spec.min_frames_per_token,
                                                  spec.max_frames_per_token);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> any(0, spec.alphabet - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  Example ex;
  ex.y.role = SeqRole::kGroundTruth;
  const std::size_t n = len(rng);
  TokenId prev = -1;
  for (std::size_t i = 0; i < n; ++i) {
    prev = chain.next(prev, rng);
    ex.y.tokens.push_back(prev);
  }

  // Frame labels: a run per token, one silence (blank) frame between equal
  // neighbours so repeats stay separable.
  std::vector<TokenId> labels;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && ex.y[i] == ex.y[i - 1]) labels.push_back(vocab.blank());
    const std::size_t r = reps(rng);
    for (std::size_t k = 0; k < r; ++k) labels.push_back(ex.y[i]);
  }
  const std::size_t dim = spec.feature_dim();
  ex.features = Matrix(labels.size(), dim);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    TokenId hot = labels[t];
    if (u(rng) < spec.substitution_rate) hot = any(rng);
    ex.features(t, static_cast<std::size_t>(hot)) = 1.0;
    if (spec.noise_sigma > 0.0) {
      for (double& x : ex.features.row(t)) x += spec.noise_sigma * noise(rng);
    }
  }
  return ex;
}

std::string utterance_key(const Example& ex) {
  std::string key(reinterpret_cast<const char*>(ex.y.tokens.data()),
                  ex.y.tokens.size() * sizeof(TokenId));
  key += '|';
  const auto vals = ex.features.values();
  key.append(reinterpret_cast<const char*>(vals.data()),
             vals.size() * sizeof(double));
  return key;
}

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.alphabet <= 0 || spec.min_len < 1 || spec.max_len < spec.min_len ||
      spec.min_frames_per_token < 1 ||
      spec.max_frames_per_token < spec.min_frames_per_token ||
      !(spec.noise_sigma >= 0.0) || !(spec.substitution_rate >= 0.0) ||
      spec.substitution_rate > 1.0 || !(spec.lm_mass >= 0.0) ||
      spec.lm_mass > 1.0) {
    throw Error(ErrorCode::kInvalidConfig, "invalid synthetic data spec");
  }
}

const std::vector<Example>& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw Error(ErrorCode::kInvalidConfig, "unknown split " + name);
}

Corpus generate_corpus(const SynthSpec& spec) {
  validate(spec);
  const Vocab vocab = spec.vocab();
  const BigramChain chain = make_chain(spec);
  Corpus corpus;
  corpus.spec = spec;
  std::set<std::string> seen;
  std::vector<Example>* targets[] = {&corpus.train, &corpus.dev, &corpus.test};
  const std::size_t sizes[] = {spec.train_size, spec.dev_size, spec.test_size};
  for (std::size_t s = 0; s < 3; ++s) {
    Rng rng = make_rng(spec.seed, s + 1);
    std::set<std::string> here;
    while (targets[s]->size() < sizes[s]) {
      Example ex = make_utterance(spec, chain, vocab, rng);
      const std::string key = utterance_key(ex);
      // Duplicates within a split are fine; across splits they are redrawn.
      if (seen.count(key)) continue;
      here.insert(key);
      ex.id = utterance_id(kSplits[s], targets[s]->size());
      targets[s]->push_back(std::move(ex));
    }
    seen.merge(here);
  }
  return corpus;
}

void write_features(const Matrix& features, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  const auto rows = static_cast<std::uint32_t>(features.rows());
  const auto cols = static_cast<std::uint32_t>(features.cols());
  out.write("MCF1", 4);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  const auto vals = features.values();
  out.write(reinterpret_cast<const char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Matrix read_features(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  char magic[4];
  std::uint32_t rows = 0, cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::memcmp(magic, "MCF1", 4) != 0) {
    throw Error(ErrorCode::kIoError, "bad feature header in " + path.string());
  }
  Matrix m(rows, cols);
  auto vals = m.values();
  in.read(reinterpret_cast<char*>(vals.data()),
          static_cast<std::streamsize>(vals.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::kIoError, "truncated " + path.string());
  return m;
}

namespace {

json spec_to_json(const SynthSpec& s) {
  return {{"alphabet", s.alphabet},
          {"min_len", s.min_len},
          {"max_len", s.max_len},
          {"min_frames_per_token", s.min_frames_per_token},
          {"max_frames_per_token", s.max_frames_per_token},
          {"noise_sigma", s.noise_sigma},
          {"substitution_rate", s.substitution_rate},
          {"train", s.train_size},
          {"dev", s.dev_size},
          {"test", s.test_size},
          {"lm_branching", s.lm_branching},
          {"lm_mass", s.lm_mass},
          {"seed", s.seed}};
}

SynthSpec spec_from_json(const json& j, SynthSpec s = {}) {
  s.alphabet = j.value("alphabet", s.alphabet);
  s.min_len = j.value("min_len", s.min_len);
  s.max_len = j.value("max_len", s.max_len);
  s.min_frames_per_token = j.value("min_frames_per_token", s.min_frames_per_token);
  s.max_frames_per_token = j.value("max_frames_per_token", s.max_frames_per_token);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.substitution_rate = j.value("substitution_rate", s.substitution_rate);
  s.train_size = j.value("train", s.train_size);
  s.dev_size = j.value("dev", s.dev_size);
  s.test_size = j.value("test", s.test_size);
  s.lm_branching = j.value("lm_branching", s.lm_branching);
  s.lm_mass = j.value("lm_mass", s.lm_mass);
  s.seed = j.value("seed", s.seed);
  return s;
}

}  // namespace

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "dataset.json", spec_to_json(corpus.spec).dump(2) + "\n");
  const Vocab vocab = corpus.spec.vocab();
  for (const char* split : kSplits) {
    const fs::path sdir = dir / split;
    ensure_dir(sdir / "feats");
    std::string text;
    for (const Example& ex : corpus.split(split)) {
      text += to_text(ex.y.tokens, vocab) + '\n';
      write_features(ex.features, sdir / "feats" / (ex.id + ".bin"));
    }
    write_text_file(sdir / "text", text);
  }
}

Corpus read_corpus(const fs::path& dir) {
  std::ifstream meta(dir / "dataset.json");
  if (!meta) {
    throw Error(ErrorCode::kIoError, "no dataset.json under " + dir.string());
  }
  Corpus corpus;
  try {
    corpus.spec = spec_from_json(json::parse(meta));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("bad dataset.json: ") + e.what());
  }
  const Vocab vocab = corpus.spec.vocab();
  std::vector<Example>* targets[] = {&corpus.train, &corpus.dev, &corpus.test};
  for (std::size_t s = 0; s < 3; ++s) {
    const fs::path sdir = dir / kSplits[s];
    std::ifstream text(sdir / "text");
    if (!text) throw Error(ErrorCode::kIoError, "missing " + (sdir / "text").string());
    std::string line;
    while (std::getline(text, line)) {
      Example ex;
      ex.id = utterance_id(kSplits[s], targets[s]->size());
      ex.y = parse_tokens(line, vocab, SeqRole::kGroundTruth);
      ex.features = read_features(sdir / "feats" / (ex.id + ".bin"));
      if (ex.features.cols() != corpus.spec.feature_dim()) {
        throw Error(ErrorCode::kIoError, "feature width mismatch for " + ex.id);
      }
      targets[s]->push_back(std::move(ex));
    }
  }
  return corpus;
}

std::string tag_name(ExperimentTag tag) {
  switch (tag) {
    case ExperimentTag::kMaskCe: return "mask_ce";
    case ExperimentTag::kMaskAxe: return "mask_axe";
    case ExperimentTag::kMaskRecAxe: return "mask_rec_axe";
  }
  return "unknown";
}

ExperimentTag parse_tag(const std::string& name) {
  if (name == "mask_ce") return ExperimentTag::kMaskCe;
  if (name == "mask_axe") return ExperimentTag::kMaskAxe;
  if (name == "mask_rec_axe") return ExperimentTag::kMaskRecAxe;
  throw Error(ErrorCode::kInvalidConfig, "unknown experiment tag " + name);
}

LossConfig loss_config_for(ExperimentTag tag, LossConfig base) {
  base.use_axe = tag != ExperimentTag::kMaskCe;
  base.rectify = tag == ExperimentTag::kMaskRecAxe;
  return base;
}

DecodeConfig RunConfig::decode_config(std::size_t k) const {
  DecodeConfig d;
  d.iterations = k;
  d.p_thres = mask.p_thres;
  d.strip_eps = strip_eps;
  return d;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("synth")) cfg.synth = spec_from_json(j["synth"], cfg.synth);
    if (j.contains("loss")) {
      const json& l = j["loss"];
      cfg.loss.ctc_weight = l.value("ctc_weight", cfg.loss.ctc_weight);
      cfg.loss.axe.skip_target_penalty =
          l.value("skip_target_penalty", cfg.loss.axe.skip_target_penalty);
      cfg.loss.learning_rate = l.value("learning_rate", cfg.loss.learning_rate);
      cfg.loss.batch_size = l.value("batch_size", cfg.loss.batch_size);
      cfg.loss.steps = l.value("steps", cfg.loss.steps);
      cfg.loss.decoder_grad_to_encoder =
          l.value("decoder_grad_to_encoder", cfg.loss.decoder_grad_to_encoder);
    }
    if (j.contains("mask")) {
      const json& m = j["mask"];
      cfg.mask.l_mask = m.value("l_mask", cfg.mask.l_mask);
      cfg.mask.l_rec = m.value("l_rec", cfg.mask.l_rec);
      cfg.mask.p_thres = m.value("p_thres", cfg.mask.p_thres);
    }
    if (j.contains("decode")) {
      const json& d = j["decode"];
      cfg.iterations = d.value("iterations", cfg.iterations);
      cfg.strip_eps = d.value("strip_eps", cfg.strip_eps);
    }
    if (j.contains("model")) {
      const json& m = j["model"];
      cfg.embed_dim = m.value("embed_dim", cfg.embed_dim);
      cfg.init_scale = m.value("init_scale", cfg.init_scale);
    }
    if (j.contains("tags")) {
      cfg.tags.clear();
      for (const auto& t : j["tags"]) cfg.tags.push_back(parse_tag(t.get<std::string>()));
    }
    cfg.eval_splits = j.value("eval_splits", cfg.eval_splits);
    if (j.contains("data_dir")) cfg.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  cfg.mask.rng_seed = cfg.seed;
  validate(cfg.synth);
  validate(cfg.loss);
  validate(cfg.mask);
  for (std::size_t k : cfg.iterations) validate(cfg.decode_config(k));
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json tags = json::array();
  for (ExperimentTag t : cfg.tags) tags.push_back(tag_name(t));
  return {
      {"seed", cfg.seed},
      {"synth", spec_to_json(cfg.synth)},
      {"loss",
       {{"ctc_weight", cfg.loss.ctc_weight},
        {"skip_target_penalty", cfg.loss.axe.skip_target_penalty},
        {"learning_rate", cfg.loss.learning_rate},
        {"batch_size", cfg.loss.batch_size},
        {"steps", cfg.loss.steps},
        {"decoder_grad_to_encoder", cfg.loss.decoder_grad_to_encoder}}},
      {"mask",
       {{"l_mask", cfg.mask.l_mask},
        {"l_rec", cfg.mask.l_rec},
        {"p_thres", cfg.mask.p_thres}}},
      {"decode", {{"iterations", cfg.iterations}, {"strip_eps", cfg.strip_eps}}},
      {"model", {{"embed_dim", cfg.embed_dim}, {"init_scale", cfg.init_scale}}},
      {"tags", tags},
      {"eval_splits", cfg.eval_splits},
  };
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  return run_config_from_json(j);
}

ToyModel train_model(const RunConfig& cfg, ExperimentTag tag,
                     const Corpus& corpus, TrainRecord* record) {
  const Vocab vocab = corpus.spec.vocab();
  ToyModel model = ToyModel::init(vocab, corpus.spec.feature_dim(),
                                  cfg.embed_dim, cfg.seed, cfg.init_scale);
  MaskConfig mask = cfg.mask;
  mask.rng_seed = cfg.seed;
  TrainRecord rec = train(model, corpus.train, loss_config_for(tag, cfg.loss),
                          mask, cfg.seed);
  if (record) *record = std::move(rec);
  return model;
}

DecodeResult decode_split(const ToyModel& model,
                          const std::vector<Example>& data,
                          const DecodeConfig& cfg, std::size_t threads) {
  DecodeResult out;
  out.traces.resize(data.size());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(data.size(), threads, [&](std::size_t i) {
    out.traces[i] = iterative_decode(model, data[i].features, cfg);
  });
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start).count();
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.edits += levenshtein(out.traces[i].final_tokens.tokens, data[i].y.tokens);
    out.ref_tokens += data[i].y.size();
  }
  return out;
}

namespace {

WerRow make_row(const std::string& tag, const std::string& split,
                std::size_t k, const DecodeResult& res) {
  WerRow row;
  row.tag = tag;
  row.split = split;
  row.iterations = k;
  row.utterances = res.traces.size();
  row.ref_tokens = res.ref_tokens;
  row.edits = res.edits;
  row.wer_percent = res.wer_percent();
  double rounds = 0.0;
  for (const auto& t : res.traces) rounds += static_cast<double>(t.iterations.size());
  row.mean_refine_rounds =
      res.traces.empty() ? 0.0 : rounds / static_cast<double>(res.traces.size());
  return row;
}

std::string loss_curve_csv(const TrainRecord& rec) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < rec.step_loss.size(); ++i) {
    out += std::to_string(i) + ',' + format_double(rec.step_loss[i], "%.10g") + '\n';
  }
  return out;
}

double tail_mean(const std::vector<double>& xs, std::size_t window) {
  if (xs.empty()) return 0.0;
  const std::size_t n = std::min(window, xs.size());
  return std::accumulate(xs.end() - static_cast<std::ptrdiff_t>(n), xs.end(), 0.0) /
         static_cast<double>(n);
}

}  // namespace

std::vector<WerRow> evaluate_model(const ToyModel& model, const Corpus& corpus,
                                   const RunConfig& cfg,
                                   const std::string& tag) {
  std::vector<WerRow> rows;
  for (const std::string& split : cfg.eval_splits) {
    for (std::size_t k : cfg.iterations) {
      const DecodeResult res =
          decode_split(model, corpus.split(split), cfg.decode_config(k), cfg.threads);
      rows.push_back(make_row(tag, split, k, res));
    }
  }
  return rows;
}

void write_report(const std::vector<WerRow>& rows, const RunConfig& cfg,
                  const fs::path& dir, const json& extra) {
  ensure_dir(dir);
  std::string csv =
      "tag,split,iterations,utterances,ref_tokens,edits,wer_percent,"
      "mean_refine_rounds\n";
  json jrows = json::array();
  for (const WerRow& r : rows) {
    csv += r.tag + ',' + r.split + ',' + std::to_string(r.iterations) + ',' +
           std::to_string(r.utterances) + ',' + std::to_string(r.ref_tokens) +
           ',' + std::to_string(r.edits) + ',' + format_double(r.wer_percent, "%.4f") +
           ',' + format_double(r.mean_refine_rounds, "%.4f") + '\n';
    jrows.push_back({{"tag", r.tag},
                     {"split", r.split},
                     {"iterations", r.iterations},
                     {"utterances", r.utterances},
                     {"ref_tokens", r.ref_tokens},
                     {"edits", r.edits},
                     {"wer_percent", r.wer_percent},
                     {"mean_refine_rounds", r.mean_refine_rounds}});
  }
  write_text_file(dir / "report.csv", csv);
  json summary = {{"config", to_json(cfg)}, {"rows", jrows}};
  if (extra.is_object()) summary.update(extra);
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

ExperimentReport run_experiment(const RunConfig& cfg) {
  const Corpus corpus = read_corpus(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  ExperimentReport report;
  json timing = json::object();
  json training = json::object();

  auto flush = [&] {
    json extra = {{"training", training}};
    if (!report.error.empty()) extra["error"] = report.error;
    write_report(report.rows, cfg, cfg.out_dir, extra);
    write_text_file(cfg.out_dir / "timing.json", timing.dump(2) + "\n");
  };

  for (ExperimentTag tag : cfg.tags) {
    const std::string name = tag_name(tag);
    TagRun run{tag, {}, {}, {}};
    try {
      run.model = train_model(cfg, tag, corpus, &run.record);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTrainingDiverged) throw;
      report.error = name + ": " + e.what();
      flush();
      throw;
    }
    save_checkpoint(run.model, cfg.out_dir / ("model_" + name + ".ckpt"));
    write_text_file(cfg.out_dir / ("loss_" + name + ".csv"), loss_curve_csv(run.record));
    training[name] = {{"steps", run.record.step_loss.size()},
                      {"skipped", run.record.skipped},
                      {"initial_loss", run.record.step_loss.empty()
                                           ? 0.0
                                           : run.record.step_loss.front()},
                      {"final_loss_mean100", tail_mean(run.record.step_loss, 100)}};
    for (const std::string& split : cfg.eval_splits) {
      for (std::size_t k : cfg.iterations) {
        DecodeResult res = decode_split(run.model, corpus.split(split),
                                        cfg.decode_config(k), cfg.threads);
        report.rows.push_back(make_row(name, split, k, res));
        const double per_utt =
            res.traces.empty() ? 0.0 : res.seconds / static_cast<double>(res.traces.size());
        timing[name][split]["k" + std::to_string(k)] = {
            {"seconds_total", res.seconds}, {"seconds_per_utterance", per_utt}};
        run.decodes.emplace(std::make_pair(split, k), std::move(res));
      }
    }
    report.runs.push_back(std::move(run));
  }
  flush();
  return report;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  const double mx = std::accumulate(x.begin(), x.begin() + n, 0.0) / n;
  const double my = std::accumulate(y.begin(), y.begin() + n, 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

ScatterResult scatter_export(const ToyModel& model,
                             const std::vector<Example>& data,
                             ScatterLoss kind, const AxeConfig& axe,
                             const MaskConfig& mask, const DecodeConfig& decode,
                             std::uint64_t seed, std::size_t threads,
                             std::size_t mask_draws) {
  if (mask_draws == 0) {
    throw Error(ErrorCode::kInvalidConfig, "scatter needs at least one mask draw");
  }
  ScatterResult out;
  out.mask_draws = mask_draws;
  out.points.resize(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const Example& ex = data[i];
    Rng rng = make_rng(seed, i);
    const LogitLattice enc = encode(model, ex.features);
    ScatterPoint& pt = out.points[i];
    pt.id = ex.id;
    double total = 0.0;
    for (std::size_t d = 0; d < mask_draws; ++d) {
      const MaskedSample masked = sample_train_mask(ex.y, model.vocab, mask, rng);
      const LogitLattice dec = decode_positions(model, masked.y_mask, enc);
      total += kind == ScatterLoss::kAxe ? axe_loss(dec, ex.y, model.vocab, axe).loss
                                         : ce_loss(dec, ex.y);
    }
    pt.loss = total / static_cast<double>(mask_draws);
    const DecodeTrace trace = iterative_decode(model, ex.features, decode);
    pt.distance = levenshtein(trace.final_tokens.tokens, ex.y.tokens);
  });
  std::vector<double> losses, dists;
  for (const auto& p : out.points) {
    losses.push_back(p.loss);
    dists.push_back(static_cast<double>(p.distance));
  }
  out.pearson = pearson(losses, dists);
  return out;
}

void write_scatter_csv(const ScatterResult& result, ScatterLoss kind,
                       const fs::path& path) {
  std::string csv = "# loss_kind=";
  csv += kind == ScatterLoss::kAxe ? "axe" : "ce";
  csv += "; loss is the raw per-utterance decoder loss, not length-normalized, "
         "averaged over " + std::to_string(result.mask_draws) + " training mask draws\n";
  csv += "id,loss,levenshtein\n";
  for (const ScatterPoint& p : result.points) {
    csv += p.id + ',' + format_double(p.loss, "%.10g") + ',' +
           std::to_string(p.distance) + '\n';
  }
  csv += "# pearson," + format_double(result.pearson, "%.10g") + '\n';
  write_text_file(path, csv);
}

}  // namespace maskctc
