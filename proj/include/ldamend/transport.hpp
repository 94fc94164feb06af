#pragma once

#include <string_view>

#include "ldamend/embeddings.hpp"
#include "ldamend/semantic.hpp"
#include "ldamend/types.hpp"

namespace ldamend {

enum class GroundCostKind { discrete, index_linear, semantic };

std::string_view to_string(GroundCostKind k);
GroundCostKind ground_cost_from_string(std::string_view s);

// Ground metric between categories. The matrix is always materialized; the
// kind records where it came from.
class GroundCost {
 public:
  static GroundCost discrete(Index c);
  static GroundCost index_linear(Index c);
  // C[j][k] = 1 - cos(v_j, v_k), diagonal forced to zero.
  static GroundCost semantic(const EmotionVocabulary& vocab);
  static GroundCost from_kind(GroundCostKind kind, const EmotionVocabulary& vocab);

  GroundCostKind kind() const { return kind_; }
  const MatrixXd& matrix() const { return matrix_; }
  Index size() const { return matrix_.rows(); }

  // Restriction to a subset of categories (used when a class drops out).
  GroundCost restricted(const std::vector<Index>& keep) const;

 private:
  GroundCost(GroundCostKind kind, MatrixXd m);
  GroundCostKind kind_;
  MatrixXd matrix_;
};

struct TransportResult {
  double distance = 0;
  MatrixXd plan;  // rows sum to p, columns to q
};

// Affine shift by +1 then L1 normalization; uniform when the shifted mass
// vanishes.
VectorXd normalize_similarities(const CRGraph& s);

// Exact discrete optimal transport between two simplex vectors.
TransportResult wasserstein(const VectorXd& p, const VectorXd& q, const GroundCost& cost);

// 1 / (W(normalize(s_s), normalize(s_t)) + epsilon)
double confidence(const CRGraph& semantic_graph, const CRGraph& task_graph, double epsilon, const GroundCost& cost);

}  // namespace ldamend
