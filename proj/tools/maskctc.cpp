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

// maskctc: synthetic data generation, training, decoding, evaluation and
// loss-vs-distance scatter export for the toy Mask CTC pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "maskctc/error.hpp"
#include "maskctc/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maskctc;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string data_dir;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON config file");
  cmd->add_option("--seed", args.seed, "Overrides the config seed");
  cmd->add_option("--out-dir", args.out_dir, "Output directory")->required();
}

RunConfig resolve(const CommonArgs& args) {
  RunConfig cfg = args.config.empty() ? run_config_from_json(json::object())
                                      : load_run_config(args.config);
  if (args.seed) cfg.seed = cfg.mask.rng_seed = *args.seed;
  if (!args.data_dir.empty()) cfg.data_dir = args.data_dir;
  if (args.threads) cfg.threads = args.threads;
  cfg.out_dir = args.out_dir;
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Mask CTC with aligned cross entropy and dynamic rectification"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  add_common(gen, gen_args);

  CommonArgs train_args;
  std::string train_tag;
  auto* train_cmd = app.add_subcommand("train", "Train one experiment tag");
  add_common(train_cmd, train_args);
  train_cmd->add_option("--data-dir", train_args.data_dir, "Corpus directory");
  train_cmd->add_option("--tag", train_tag, "mask_ce | mask_axe | mask_rec_axe");

  CommonArgs decode_args;
  std::string decode_model, decode_split_name = "test";
  std::size_t decode_k = 0;
  auto* decode_cmd = app.add_subcommand("decode", "Decode a split with a checkpoint");
  add_common(decode_cmd, decode_args);
  decode_cmd->add_option("--data-dir", decode_args.data_dir, "Corpus directory");
  decode_cmd->add_option("--model", decode_model, "Checkpoint file")->required();
  decode_cmd->add_option("--split", decode_split_name, "train | dev | test");
  decode_cmd->add_option("--iterations", decode_k, "K (default: first configured)");
  decode_cmd->add_option("--threads", decode_args.threads, "Decoding threads");

  CommonArgs eval_args;
  std::string eval_model, eval_tag = "model";
  auto* eval_cmd = app.add_subcommand(
      "eval", "Train every configured tag and report WER per (tag, K); with "
              "--model, only evaluate that checkpoint");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--data-dir", eval_args.data_dir, "Corpus directory");
  eval_cmd->add_option("--model", eval_model, "Checkpoint to evaluate");
  eval_cmd->add_option("--tag", eval_tag, "Row label when --model is given");
  eval_cmd->add_option("--threads", eval_args.threads, "Decoding threads");

  CommonArgs scatter_args;
  std::string scatter_model, scatter_split = "test", scatter_loss = "both";
  std::size_t scatter_draws = 16;
  auto* scatter_cmd =
      app.add_subcommand("scatter", "Export decoder loss vs Levenshtein distance");
  add_common(scatter_cmd, scatter_args);
  scatter_cmd->add_option("--data-dir", scatter_args.data_dir, "Corpus directory");
  scatter_cmd->add_option("--model", scatter_model, "Checkpoint file")->required();
  scatter_cmd->add_option("--split", scatter_split, "train | dev | test");
  scatter_cmd->add_option("--loss", scatter_loss, "ce | axe | both")
      ->check(CLI::IsMember({"ce", "axe", "both"}));
  scatter_cmd->add_option("--threads", scatter_args.threads, "Worker threads");
  scatter_cmd->add_option("--mask-draws", scatter_draws,
                          "Training mask draws averaged per utterance loss")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    RunConfig cfg = resolve(gen_args);
    if (gen_args.seed) cfg.synth.seed = *gen_args.seed;
    write_corpus(generate_corpus(cfg.synth), cfg.out_dir);
    return 0;
  }
  if (train_cmd->parsed()) {
    const RunConfig cfg = resolve(train_args);
    const ExperimentTag tag = train_tag.empty() ? cfg.tags.at(0) : parse_tag(train_tag);
    const Corpus corpus = read_corpus(cfg.data_dir);
    TrainRecord record;
    const ToyModel model = train_model(cfg, tag, corpus, &record);
    fs::create_directories(cfg.out_dir);
    save_checkpoint(model, cfg.out_dir / ("model_" + tag_name(tag) + ".ckpt"));
    std::string curve = "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < record.step_loss.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, record.step_loss[i]);
      curve += buf;
    }
    write_file(cfg.out_dir / ("loss_" + tag_name(tag) + ".csv"), curve);
    return 0;
  }
  if (decode_cmd->parsed()) {
    const RunConfig cfg = resolve(decode_args);
    const ToyModel model = load_checkpoint(decode_model);
    const Corpus corpus = read_corpus(cfg.data_dir);
    const std::size_t k = decode_k ? decode_k : cfg.iterations.at(0);
    const auto& data = corpus.split(decode_split_name);
    const DecodeResult res = decode_split(model, data, cfg.decode_config(k), cfg.threads);
    fs::create_directories(cfg.out_dir);
    std::string hyps, traces;
    for (std::size_t i = 0; i < data.size(); ++i) {
      hyps += data[i].id + ' ' + to_text(res.traces[i].final_tokens.tokens, model.vocab) + '\n';
      traces += trace_to_jsonl(res.traces[i], model.vocab, data[i].id);
    }
    write_file(cfg.out_dir / "hyp.txt", hyps);
    write_file(cfg.out_dir / "trace.jsonl", traces);
    return 0;
  }
  if (eval_cmd->parsed()) {
    const RunConfig cfg = resolve(eval_args);
    if (eval_model.empty()) {
      run_experiment(cfg);
    } else {
      const ToyModel model = load_checkpoint(eval_model);
      const Corpus corpus = read_corpus(cfg.data_dir);
      write_report(evaluate_model(model, corpus, cfg, eval_tag), cfg, cfg.out_dir);
    }
    return 0;
  }
  if (scatter_cmd->parsed()) {
    const RunConfig cfg = resolve(scatter_args);
    const ToyModel model = load_checkpoint(scatter_model);
    const Corpus corpus = read_corpus(cfg.data_dir);
    fs::create_directories(cfg.out_dir);
    json summary = json::object();
    for (ScatterLoss kind : {ScatterLoss::kCe, ScatterLoss::kAxe}) {
      const std::string name = kind == ScatterLoss::kCe ? "ce" : "axe";
      if (scatter_loss != "both" && scatter_loss != name) continue;
      const ScatterResult res = scatter_export(
          model, corpus.split(scatter_split), kind, cfg.loss.axe, cfg.mask,
          cfg.decode_config(cfg.iterations.back()), cfg.seed, cfg.threads, scatter_draws);
      write_scatter_csv(res, kind, cfg.out_dir / ("scatter_" + name + ".csv"));
      summary[name] = {{"utterances", res.points.size()},
                       {"mask_draws", res.mask_draws},
                       {"pearson", res.pearson}};
    }
    write_file(cfg.out_dir / "scatter_summary.json", summary.dump(2) + "\n");
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    const json rec = {{"error", std::string(error_code_name(e.code()))},
                      {"message", e.what()}};
    std::cerr << rec.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    const json rec = {{"error", "Internal"}, {"message", e.what()}};
    std::cerr << rec.dump() << '\n';
    return 1;
  }
}
