#include "ldamend/experiment.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "ldamend/checkpoint.hpp"
#include "ldamend/errors.hpp"

namespace ldamend {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

json optimizer_json(const OptimizerSettings& o) {
  return {{"kind", std::string(to_string(o.kind))},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"eps", o.eps}};
}

OptimizerSettings optimizer_from_json(const json& j, OptimizerSettings o) {
  check_keys(j, {"kind", "learning_rate", "beta1", "beta2", "eps"}, "optimizer");
  o.kind = optimizer_from_string(get<std::string>(j, "kind", std::string(to_string(o.kind))));
  o.learning_rate = get(j, "learning_rate", o.learning_rate);
  o.beta1 = get(j, "beta1", o.beta1);
  o.beta2 = get(j, "beta2", o.beta2);
  o.eps = get(j, "eps", o.eps);
  return o;
}

}  // namespace

json to_json(const EngineConfig& c) {
  return {{"beta", c.beta},
          {"epsilon_conf", c.epsilon_conf},
          {"epsilon_dist", c.epsilon_dist},
          {"warmup_epochs", c.warmup_epochs},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"prototype_mode", std::string(to_string(c.prototype_mode))},
          {"alpha_normalization", std::string(to_string(c.alpha_normalization))},
          {"ground_cost", std::string(to_string(c.ground_cost))},
          {"optimizer", optimizer_json(c.optimizer)},
          {"hidden", c.hidden},
          {"feature_dim", c.feature_dim},
          {"feature_activation", std::string(to_string(c.feature_activation))}};
}

EngineConfig engine_config_from_json(const json& j) {
  check_keys(j,
             {"beta", "epsilon_conf", "epsilon_dist", "warmup_epochs", "epochs", "batch_size", "seed", "prototype_mode",
              "alpha_normalization", "ground_cost", "optimizer", "hidden", "feature_dim", "feature_activation"},
             "engine");
  EngineConfig c;
  c.beta = get(j, "beta", c.beta);
  c.epsilon_conf = get(j, "epsilon_conf", c.epsilon_conf);
  c.epsilon_dist = get(j, "epsilon_dist", c.epsilon_dist);
  c.warmup_epochs = get(j, "warmup_epochs", c.warmup_epochs);
  c.epochs = get(j, "epochs", c.epochs);
  c.batch_size = get(j, "batch_size", c.batch_size);
  c.seed = get(j, "seed", c.seed);
  c.prototype_mode = prototype_mode_from_string(get<std::string>(j, "prototype_mode", "weighted_mean"));
  c.alpha_normalization = alpha_normalization_from_string(get<std::string>(j, "alpha_normalization", "class_mean_one"));
  c.ground_cost = ground_cost_from_string(get<std::string>(j, "ground_cost", std::string(to_string(c.ground_cost))));
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"), c.optimizer);
  c.hidden = get(j, "hidden", c.hidden);
  c.feature_dim = get(j, "feature_dim", c.feature_dim);
  c.feature_activation =
      activation_from_string(get<std::string>(j, "feature_activation", std::string(to_string(c.feature_activation))));
  c.validate();
  return c;
}

void ExperimentConfig::apply_seed(std::uint64_t master) {
  seed = master;
  synthetic.seed = derive_seed(master, 10);
  semantic.seed = derive_seed(master, 13);
  engine.seed = derive_seed(master, 14);
}

void ExperimentConfig::validate() const {
  synthetic.validate();
  semantic.validate();
  engine.validate();
  if (!(noise_ratio >= 0 && noise_ratio <= 1)) throw ConfigError("noise_ratio must lie in [0, 1]");
  if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (words.size() < 2) throw ConfigError("vocabulary needs at least two words");
}

json to_json(const ExperimentConfig& c) {
  json data = {{"train_path", c.train_path ? json(*c.train_path) : json(nullptr)},
               {"test_path", c.test_path ? json(*c.test_path) : json(nullptr)},
               {"test_fraction", c.test_fraction},
               {"synthetic",
                {{"num_classes", c.synthetic.num_classes},
                 {"dim", c.synthetic.dim},
                 {"samples_per_class", c.synthetic.samples_per_class},
                 {"cluster_spread", c.synthetic.cluster_spread},
                 {"compound_fraction", c.synthetic.compound_fraction}}}};
  json semantic = {{"gamma", c.semantic.gamma},
                   {"epochs", c.semantic.epochs},
                   {"batch_size", c.semantic.batch_size},
                   {"hidden", c.semantic.hidden},
                   {"optimizer", optimizer_json(c.semantic.optimizer)}};
  json engine = to_json(c.engine);
  engine.erase("seed");
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"noise_ratio", c.noise_ratio},
          {"vocabulary", {{"path", c.vocabulary_path}, {"words", c.words}}},
          {"data", data},
          {"semantic", semantic},
          {"engine", engine}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  check_keys(j, {"seed", "output_dir", "noise_ratio", "vocabulary", "data", "semantic", "engine"}, "config");
  ExperimentConfig c;
  c.output_dir = get(j, "output_dir", c.output_dir);
  c.noise_ratio = get(j, "noise_ratio", c.noise_ratio);
  if (j.contains("vocabulary")) {
    const auto& v = j.at("vocabulary");
    check_keys(v, {"path", "words"}, "vocabulary");
    c.vocabulary_path = get(v, "path", c.vocabulary_path);
    c.words = get(v, "words", c.words);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, {"train_path", "test_path", "test_fraction", "synthetic"}, "data");
    if (d.contains("train_path") && !d.at("train_path").is_null()) c.train_path = get<std::string>(d, "train_path", "");
    if (d.contains("test_path") && !d.at("test_path").is_null()) c.test_path = get<std::string>(d, "test_path", "");
    c.test_fraction = get(d, "test_fraction", c.test_fraction);
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      check_keys(s, {"num_classes", "dim", "samples_per_class", "cluster_spread", "compound_fraction"}, "synthetic");
      c.synthetic.num_classes = get(s, "num_classes", c.synthetic.num_classes);
      c.synthetic.dim = get(s, "dim", c.synthetic.dim);
      c.synthetic.samples_per_class = get(s, "samples_per_class", c.synthetic.samples_per_class);
      c.synthetic.cluster_spread = get(s, "cluster_spread", c.synthetic.cluster_spread);
      c.synthetic.compound_fraction = get(s, "compound_fraction", c.synthetic.compound_fraction);
    }
  }
  if (j.contains("semantic")) {
    const auto& s = j.at("semantic");
    check_keys(s, {"gamma", "epochs", "batch_size", "hidden", "optimizer"}, "semantic");
    c.semantic.gamma = get(s, "gamma", c.semantic.gamma);
    c.semantic.epochs = get(s, "epochs", c.semantic.epochs);
    c.semantic.batch_size = get(s, "batch_size", c.semantic.batch_size);
    c.semantic.hidden = get(s, "hidden", c.semantic.hidden);
    if (s.contains("optimizer")) c.semantic.optimizer = optimizer_from_json(s.at("optimizer"), c.semantic.optimizer);
  }
  if (j.contains("engine")) c.engine = engine_config_from_json(j.at("engine"));
  c.apply_seed(get<std::uint64_t>(j, "seed", c.seed));
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  try {
    return experiment_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

EmotionVocabulary load_vocabulary(const ExperimentConfig& config) {
  if (!std::filesystem::exists(config.vocabulary_path))
    throw ConfigError("vocabulary file not found: " + config.vocabulary_path);
  return load_word2vec_text(config.vocabulary_path, config.words);
}

PreparedData prepare_data(const ExperimentConfig& config, const EmotionVocabulary& vocab) {
  const int c = static_cast<int>(vocab.size());
  PreparedData out;
  if (config.train_path) {
    out.train = load_csv(*config.train_path, c);
    if (config.test_path) out.test = load_csv(*config.test_path, c);
    return out;
  }
  SyntheticSpec spec = config.synthetic;
  const Dataset all = generate_synthetic(spec, vocab);
  auto [train, test] = split(all, config.test_fraction, derive_seed(config.seed, 11));
  out.train = inject_noise(train, config.noise_ratio, c, derive_seed(config.seed, 12));
  out.test = std::move(test);
  return out;
}

json metrics_row(const EpochMetrics& m) {
  json row = {{"epoch", m.epoch}, {"loss", m.loss}, {"train_accuracy", m.train_accuracy}, {"amended", m.amended}};
  if (m.test_accuracy) row["test_accuracy"] = *m.test_accuracy;
  if (m.alpha_clean) row["alpha_clean"] = *m.alpha_clean;
  if (m.alpha_flipped) row["alpha_flipped"] = *m.alpha_flipped;
  if (!m.skipped_classes.empty()) row["skipped_classes"] = m.skipped_classes;
  return row;
}

json report_row(const Dataset& data, std::size_t i, int predicted, double alpha, const LabelDistribution& l) {
  json row = {{"id", data.samples[i].id}, {"label", data.samples[i].label}, {"predicted", predicted}};
  if (data.true_labels) row["true_label"] = (*data.true_labels)[i];
  if (data.flip_mask) row["flipped"] = static_cast<bool>((*data.flip_mask)[i]);
  row["alpha"] = alpha;
  row["distribution"] = std::vector<double>(l.data(), l.data() + l.size());
  return row;
}

void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw Error("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

// --- commands ----------------------------------------------------------------

ExperimentConfig resolve_config(const CommandOptions& opts) {
  ExperimentConfig config = opts.config_path ? load_experiment_config(*opts.config_path) : ExperimentConfig{};
  if (!opts.config_path) config.apply_seed(config.seed);
  if (opts.seed) config.apply_seed(*opts.seed);
  if (opts.out_dir) config.output_dir = opts.out_dir->string();
  if (opts.data) config.train_path = opts.data->string();
  config.validate();
  return config;
}

namespace {

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& r : rows) out << r.dump() << '\n';
  });
}

Dataset require_data(const CommandOptions& opts, int num_classes) {
  if (!opts.data) throw ConfigError("--data is required");
  return load_csv(*opts.data, num_classes);
}

TrainedPipeline require_checkpoint(const CommandOptions& opts) {
  if (!opts.checkpoint) throw ConfigError("--checkpoint is required");
  return load_checkpoint(*opts.checkpoint);
}

}  // namespace

void cmd_gen_data(const CommandOptions& opts, std::ostream& log) {
  ExperimentConfig config = resolve_config(opts);
  config.train_path.reset();
  config.test_path.reset();
  const EmotionVocabulary vocab = load_vocabulary(config);
  const PreparedData data = prepare_data(config, vocab);
  const std::filesystem::path dir = config.output_dir;
  write_file_atomic(dir / "train.csv", [&](std::ostream& out) { write_csv(data.train, out); });
  write_file_atomic(dir / "test.csv", [&](std::ostream& out) { write_csv(data.test, out); });
  json manifest = to_json(config);
  // keep the manifest independent of where it was written
  manifest.erase("output_dir");
  manifest["counts"] = {{"train", data.train.size()}, {"test", data.test.size()}};
  std::size_t flipped = 0;
  if (data.train.flip_mask)
    for (bool f : *data.train.flip_mask) flipped += f ? 1 : 0;
  manifest["counts"]["flipped"] = flipped;
  write_file_atomic(dir / "manifest.json", [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
  log << "wrote " << data.train.size() << " training and " << data.test.size() << " test samples to " << dir.string()
      << '\n';
}

void cmd_embed_analyze(const CommandOptions& opts, std::ostream& log) {
  const ExperimentConfig config = resolve_config(opts);
  const EmotionVocabulary vocab = load_vocabulary(config);
  const SimilarityMatrix sim = similarity_matrix(vocab);
  const std::filesystem::path path = std::filesystem::path(config.output_dir) / "similarity.csv";
  write_file_atomic(path, [&](std::ostream& out) {
    out << "word";
    for (const auto& w : sim.words) out << ',' << w;
    out << '\n';
    for (Index j = 0; j < sim.values.rows(); ++j) {
      out << sim.words[static_cast<std::size_t>(j)];
      for (Index k = 0; k < sim.values.cols(); ++k) out << ',' << format_double(sim.values(j, k));
      out << '\n';
    }
  });
  log << "wrote " << sim.words.size() << "x" << sim.words.size() << " similarity matrix to " << path.string() << '\n';
}

void cmd_train(const CommandOptions& opts, std::ostream& log) {
  const ExperimentConfig config = resolve_config(opts);
  const EmotionVocabulary vocab = load_vocabulary(config);
  const PreparedData data = prepare_data(config, vocab);
  log << "training autoencoder on " << data.train.size() << " samples\n";
  const AutoEncoderTraining sem = train_autoencoder(data.train, vocab, config.semantic);
  log << "training task model (" << config.engine.epochs << " epochs, warmup " << config.engine.warmup_epochs
      << ", beta " << config.engine.beta << ")\n";
  const TrainResult result = train(data.train, data.test.empty() ? nullptr : &data.test, vocab, sem.model, config.engine);

  std::vector<json> metrics, report, ae_rows;
  for (const auto& m : result.metrics) metrics.push_back(metrics_row(m));
  for (std::size_t e = 0; e < sem.loss_history.size(); ++e)
    ae_rows.push_back({{"epoch", e}, {"loss", sem.loss_history[e]}, {"alignment", sem.alignment_history[e + 1]}});
  const MatrixXd z = result.pipeline.model.logits(data.train.feature_matrix());
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    Index arg = 0;
    z.col(static_cast<Index>(i)).maxCoeff(&arg);
    report.push_back(report_row(data.train, i, static_cast<int>(arg) + 1, result.confidences.alpha[static_cast<Index>(i)],
                                result.distributions[i]));
  }
  const std::filesystem::path dir = config.output_dir;
  write_jsonl(dir / "metrics.jsonl", metrics);
  write_jsonl(dir / "report.jsonl", report);
  write_jsonl(dir / "autoencoder.jsonl", ae_rows);
  save_checkpoint(result.pipeline, dir / "checkpoint.bin");
  const auto& last = result.metrics.empty() ? EpochMetrics{} : result.metrics.back();
  log << "final train accuracy " << last.train_accuracy;
  if (last.test_accuracy) log << ", test accuracy " << *last.test_accuracy;
  log << "\nwrote " << (dir / "checkpoint.bin").string() << '\n';
}

json cmd_evaluate(const CommandOptions& opts, std::ostream& out, std::ostream& log) {
  const TrainedPipeline pipe = require_checkpoint(opts);
  const Dataset data = require_data(opts, static_cast<int>(pipe.vocab.size()));
  if (data.dim() != pipe.model.in_dim())
    throw DimensionError("dataset has " + std::to_string(data.dim()) + " features, checkpoint expects " +
                         std::to_string(pipe.model.in_dim()));
  const json result = {{"accuracy", evaluate(pipe.model, data)}, {"n", data.size()}};
  out << result.dump() << '\n';
  if (opts.out_dir)
    write_file_atomic(*opts.out_dir / "evaluation.json", [&](std::ostream& o) { o << result.dump() << '\n'; });
  log << "evaluated " << data.size() << " samples\n";
  return result;
}

void cmd_amend(const CommandOptions& opts, std::ostream& out, std::ostream& log) {
  const TrainedPipeline pipe = require_checkpoint(opts);
  const Dataset data = require_data(opts, static_cast<int>(pipe.vocab.size()));
  if (data.dim() != pipe.model.in_dim())
    throw DimensionError("dataset has " + std::to_string(data.dim()) + " features, checkpoint expects " +
                         std::to_string(pipe.model.in_dim()));
  std::vector<json> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Prediction p = predict_with_distribution(pipe, data.samples[i].x, data.samples[i].label);
    rows.push_back({{"id", data.samples[i].id},
                    {"label", data.samples[i].label},
                    {"predicted", p.label},
                    {"alpha", p.alpha},
                    {"distribution", std::vector<double>(p.distribution.data(), p.distribution.data() + p.distribution.size())}});
  }
  if (opts.out_dir) {
    write_jsonl(*opts.out_dir / "amended.jsonl", rows);
  } else {
    for (const auto& r : rows) out << r.dump() << '\n';
  }
  log << "amended " << rows.size() << " samples\n";
}

}  // namespace ldamend
