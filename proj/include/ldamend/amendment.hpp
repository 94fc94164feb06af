#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ldamend/dataset.hpp"
#include "ldamend/embeddings.hpp"
#include "ldamend/nn.hpp"
#include "ldamend/semantic.hpp"
#include "ldamend/transport.hpp"

namespace ldamend {

// weighted_mean: p_k = sum(alpha_i f_i) / sum(alpha_i)
// count_scaled:  p_k = sum(alpha_i f_i) / n_k
enum class PrototypeMode { weighted_mean, count_scaled };
enum class AlphaNormalization { raw, class_mean_one };

std::string_view to_string(PrototypeMode m);
std::string_view to_string(AlphaNormalization n);
PrototypeMode prototype_mode_from_string(std::string_view s);
AlphaNormalization alpha_normalization_from_string(std::string_view s);

using LabelDistribution = VectorXd;

struct TaskModel {
  Mlp<double> backbone;  // d_in -> d_f
  Mlp<double> head;      // single identity layer, d_f -> c

  static TaskModel create(Index d_in, std::span<const Index> hidden, Index feature_dim, Index num_classes,
                          Activation feature_activation, Rng& rng);

  Index in_dim() const { return backbone.in_dim(); }
  Index feature_dim() const { return backbone.out_dim(); }
  Index num_classes() const { return head.out_dim(); }
  void validate() const;

  VectorXd parameters() const;
  void set_parameters(const VectorXd& p);
  Index parameter_count() const { return backbone.parameter_count() + head.parameter_count(); }

  MatrixXd logits(const MatrixXd& x) const;  // c x batch
};

struct Prototypes {
  MatrixXd centers;         // c x d_f
  std::vector<bool> valid;  // false for classes without members
  PrototypeMode mode = PrototypeMode::weighted_mean;

  Index num_classes() const { return centers.rows(); }
  bool complete() const;
  std::vector<Index> valid_classes() const;
  // Throws EmptyClassError naming the first class without members.
  void require_complete() const;
  Prototypes restricted(const std::vector<Index>& keep) const;
};

struct ConfidenceVector {
  VectorXd alpha;
  AlphaNormalization normalization = AlphaNormalization::class_mean_one;
};

struct EngineConfig {
  double beta = 0.7;
  double epsilon_conf = 1e-3;
  double epsilon_dist = 1e-8;
  int warmup_epochs = 10;
  int epochs = 40;
  int batch_size = 32;
  std::uint64_t seed = 11;
  PrototypeMode prototype_mode = PrototypeMode::weighted_mean;
  AlphaNormalization alpha_normalization = AlphaNormalization::class_mean_one;
  GroundCostKind ground_cost = GroundCostKind::semantic;
  OptimizerSettings optimizer{OptimizerKind::adam, 3e-3};
  std::vector<Index> hidden{};
  Index feature_dim = 512;
  Activation feature_activation = Activation::relu;

  void validate() const;
};

MatrixXd extract_features(const TaskModel& model, const Dataset& data);  // n x d_f

Prototypes compute_prototypes(const MatrixXd& features, std::span<const int> labels, const VectorXd& alpha,
                              PrototypeMode mode, int num_classes);

// S_t[k] = cos(p_k, f); every prototype must be valid.
CRGraph task_crgraph(const Prototypes& prototypes, const VectorXd& feature);

// Divides each alpha by the mean alpha of its class (class_mean_one) or
// passes it through (raw).
ConfidenceVector normalize_confidences(const VectorXd& raw, std::span<const int> labels, AlphaNormalization mode);

ConfidenceVector compute_confidences(const std::vector<CRGraph>& semantic_graphs, const std::vector<CRGraph>& task_graphs,
                                     std::span<const int> labels, const EngineConfig& config, const GroundCost& cost);

// l_k proportional to 1 / (||f - p_k||^2 + epsilon_dist).
LabelDistribution amend_distribution(const VectorXd& feature, const Prototypes& prototypes, double epsilon_dist);

// beta CE(onehot(y), z) + (1 - beta) CE(l, z); grad = softmax(z) - (beta onehot + (1 - beta) l).
LossAndGrad<double> total_loss(const VectorXd& logits, int label, const LabelDistribution& l, double beta);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0;
  double train_accuracy = 0;
  std::optional<double> test_accuracy;
  bool amended = false;
  std::optional<double> alpha_clean;
  std::optional<double> alpha_flipped;
  std::vector<int> skipped_classes;  // 1-based
};

// Everything needed to score new samples; this is what a checkpoint stores.
struct TrainedPipeline {
  EmotionVocabulary vocab;
  AutoEncoder autoencoder;
  TaskModel model;
  Prototypes prototypes;
  VectorXd alpha_scale;  // per-class mean raw alpha from the last amendment pass
  EngineConfig config;
};

struct TrainResult {
  TrainedPipeline pipeline;
  std::vector<EpochMetrics> metrics;
  ConfidenceVector confidences;                   // final, per training sample
  std::vector<LabelDistribution> distributions;   // final, per training sample
};

TrainResult train(const Dataset& train_set, const Dataset* test_set, const EmotionVocabulary& vocab,
                  const AutoEncoder& autoencoder, const EngineConfig& config);

double evaluate(const TaskModel& model, const Dataset& data);

struct Prediction {
  int label = 0;  // 1-based argmax
  LabelDistribution distribution;
  double alpha = 0;
};

// The class-normalization group is the given label when known, the
// predicted class otherwise.
Prediction predict_with_distribution(const TrainedPipeline& pipeline, const VectorXd& x,
                                     std::optional<int> given_label = std::nullopt);

}  // namespace ldamend
