// Command-line front end: gen-data, embed-analyze, train, evaluate, amend.
//
// Exit codes: 0 ok, 1 other failure, 2 input/config error, 3 checkpoint error.

#include <iostream>

#include <CLI11.hpp>

#include "ldamend/errors.hpp"
#include "ldamend/experiment.hpp"

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ldamend::CheckpointError*>(&e)) return 3;
  if (dynamic_cast<const ldamend::ConfigError*>(&e) || dynamic_cast<const ldamend::ParseError*>(&e) ||
      dynamic_cast<const ldamend::MissingWordError*>(&e) || dynamic_cast<const ldamend::RangeError*>(&e) ||
      dynamic_cast<const ldamend::DimensionError*>(&e))
    return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-distribution amendment with semantic class correlations"};
  app.require_subcommand(1);

  ldamend::CommandOptions opts;
  std::string config, out, checkpoint, data;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment config (JSON)");
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--out", out, "output directory");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset (CSV + manifest)");
  add_common(gen);
  auto* analyze = app.add_subcommand("embed-analyze", "cosine similarity matrix of the emotion vocabulary");
  add_common(analyze);
  auto* train = app.add_subcommand("train", "train the autoencoder and the amended-label classifier");
  add_common(train);
  train->add_option("--data", data, "training CSV (default: synthetic from config)");
  auto* evaluate = app.add_subcommand("evaluate", "accuracy of a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evaluate->add_option("--data", data, "dataset CSV")->required();
  evaluate->add_option("--out", out, "also write evaluation.json here");
  auto* amend = app.add_subcommand("amend", "per-sample label distributions and confidences");
  amend->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  amend->add_option("--data", data, "dataset CSV")->required();
  amend->add_option("--out", out, "write amended.jsonl here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto set = [](auto& field, const std::string& value) {
    if (!value.empty()) field = value;
  };
  set(opts.config_path, config);
  set(opts.out_dir, out);
  set(opts.checkpoint, checkpoint);
  set(opts.data, data);
  for (auto* sub : {gen, analyze, train})
    if (sub->parsed() && sub->count("--seed") > 0) opts.seed = seed;

  try {
    if (gen->parsed()) ldamend::cmd_gen_data(opts, std::cerr);
    if (analyze->parsed()) ldamend::cmd_embed_analyze(opts, std::cerr);
    if (train->parsed()) ldamend::cmd_train(opts, std::cerr);
    if (evaluate->parsed()) ldamend::cmd_evaluate(opts, std::cout, std::cerr);
    if (amend->parsed()) ldamend::cmd_amend(opts, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
