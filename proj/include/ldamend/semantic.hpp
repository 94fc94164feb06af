#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ldamend/dataset.hpp"
#include "ldamend/embeddings.hpp"
#include "ldamend/nn.hpp"

namespace ldamend {

// Class-relation graph: one cosine similarity per class.
using CRGraph = VectorXd;

struct AutoEncoder {
  Mlp<double> encoder;  // d_in -> d_sem
  Mlp<double> decoder;  // d_sem -> d_in

  static AutoEncoder create(Index d_in, Index d_sem, Index hidden, Rng& rng);

  void validate(Index d_sem) const;
  VectorXd encode(const VectorXd& x) const;
  MatrixXd encode(const MatrixXd& x) const;
};

struct SemanticConfig {
  double gamma = 1.0;
  int epochs = 200;
  int batch_size = 32;
  Index hidden = 256;
  std::uint64_t seed = 7;
  OptimizerSettings optimizer{OptimizerKind::adam, 3e-3};

  void validate() const;
};

struct SemanticLoss {
  double loss = 0;
  double reconstruction = 0;
  double alignment = 0;  // mean of 1 - cos(V(y), g(x))
  VectorXd encoder_grad;
  VectorXd decoder_grad;
};

// Mean over the batch columns of  mean_j (x_j - x̂_j)^2 + gamma (1 - cos(V(y), g(x))).
// The alignment term only reaches the encoder.
SemanticLoss semantic_loss(const MatrixXd& x, std::span<const int> labels, const EmotionVocabulary& vocab,
                           const AutoEncoder& ae, double gamma);
SemanticLoss semantic_loss(const VectorXd& x, int label, const EmotionVocabulary& vocab, const AutoEncoder& ae,
                           double gamma);

struct AutoEncoderTraining {
  AutoEncoder model;
  std::vector<double> loss_history;       // mean loss per epoch, in training order
  std::vector<double> alignment_history;  // mean cos(V(y), g(x)); entry 0 is before training
};

AutoEncoderTraining train_autoencoder(const Dataset& data, const EmotionVocabulary& vocab, const SemanticConfig& config);

double mean_alignment(const AutoEncoder& ae, const Dataset& data, const EmotionVocabulary& vocab);

// S_s[k] = cos(v_k, g)
CRGraph semantic_crgraph(const EmotionVocabulary& vocab, const VectorXd& g);

}  // namespace ldamend
