#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldamend/amendment.hpp"
#include "ldamend/datagen.hpp"
#include "ldamend/semantic.hpp"

namespace ldamend {

struct ExperimentConfig {
  std::string vocabulary_path = default_fixture_path().string();
  std::vector<std::string> words = default_emotion_words();

  std::optional<std::string> train_path;
  std::optional<std::string> test_path;
  SyntheticSpec synthetic;
  double test_fraction = 1.0 / 3.0;

  SemanticConfig semantic;
  EngineConfig engine;
  double noise_ratio = 0.0;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  // Pushes the master seed into every random stream.
  void apply_seed(std::uint64_t master);
  void validate() const;
};

nlohmann::json to_json(const EngineConfig& c);
EngineConfig engine_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct PreparedData {
  Dataset train;
  Dataset test;
};

// Synthetic generation, stratified split, then label noise on the training
// half only. Explicit dataset paths bypass generation.
PreparedData prepare_data(const ExperimentConfig& config, const EmotionVocabulary& vocab);
EmotionVocabulary load_vocabulary(const ExperimentConfig& config);

nlohmann::json metrics_row(const EpochMetrics& m);
nlohmann::json report_row(const Dataset& data, std::size_t i, int predicted, double alpha, const LabelDistribution& l);

// Writes a file via temp + rename.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

// Command bodies; the CLI maps exceptions onto exit codes.
struct CommandOptions {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> data;
};

ExperimentConfig resolve_config(const CommandOptions& opts);

void cmd_gen_data(const CommandOptions& opts, std::ostream& log);
void cmd_embed_analyze(const CommandOptions& opts, std::ostream& log);
void cmd_train(const CommandOptions& opts, std::ostream& log);
nlohmann::json cmd_evaluate(const CommandOptions& opts, std::ostream& out, std::ostream& log);
void cmd_amend(const CommandOptions& opts, std::ostream& out, std::ostream& log);

}  // namespace ldamend
