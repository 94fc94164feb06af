#include "ldamend/transport.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "ldamend/errors.hpp"
#include "ldamend/nn/loss.hpp"

namespace ldamend {

std::string_view to_string(GroundCostKind k) {
  switch (k) {
    case GroundCostKind::discrete: return "discrete";
    case GroundCostKind::index_linear: return "index_linear";
    case GroundCostKind::semantic: return "semantic";
  }
  return "?";
}

GroundCostKind ground_cost_from_string(std::string_view s) {
  if (s == "discrete") return GroundCostKind::discrete;
  if (s == "index_linear") return GroundCostKind::index_linear;
  if (s == "semantic") return GroundCostKind::semantic;
  throw ConfigError("unknown ground cost: " + std::string(s));
}

GroundCost::GroundCost(GroundCostKind kind, MatrixXd m) : kind_(kind), matrix_(std::move(m)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1) throw DimensionError("ground cost must be square");
  for (Index j = 0; j < matrix_.rows(); ++j) {
    if (matrix_(j, j) != 0.0) throw RangeError("ground cost diagonal must be zero");
    for (Index k = 0; k < matrix_.cols(); ++k) {
      if (!(matrix_(j, k) >= 0.0)) throw RangeError("ground cost entries must be nonnegative");
      if (matrix_(j, k) != matrix_(k, j)) throw RangeError("ground cost must be symmetric");
    }
  }
}

GroundCost GroundCost::discrete(Index c) {
  MatrixXd m = MatrixXd::Ones(c, c);
  m.diagonal().setZero();
  return GroundCost(GroundCostKind::discrete, std::move(m));
}

GroundCost GroundCost::index_linear(Index c) {
  MatrixXd m(c, c);
  for (Index j = 0; j < c; ++j)
    for (Index k = 0; k < c; ++k) m(j, k) = std::abs(static_cast<double>(j - k));
  return GroundCost(GroundCostKind::index_linear, std::move(m));
}

GroundCost GroundCost::semantic(const EmotionVocabulary& vocab) {
  const MatrixXd sim = similarity_matrix(vocab).values;
  MatrixXd m = (1.0 - sim.array()).max(0.0).matrix();
  m.diagonal().setZero();
  return GroundCost(GroundCostKind::semantic, std::move(m));
}

GroundCost GroundCost::from_kind(GroundCostKind kind, const EmotionVocabulary& vocab) {
  switch (kind) {
    case GroundCostKind::discrete: return discrete(vocab.size());
    case GroundCostKind::index_linear: return index_linear(vocab.size());
    case GroundCostKind::semantic: return semantic(vocab);
  }
  throw ConfigError("unknown ground cost");
}

GroundCost GroundCost::restricted(const std::vector<Index>& keep) const {
  MatrixXd m(static_cast<Index>(keep.size()), static_cast<Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = 0; b < keep.size(); ++b) m(a, b) = matrix_(keep[a], keep[b]);
  return GroundCost(kind_, std::move(m));
}

VectorXd normalize_similarities(const CRGraph& s) {
  if (s.size() == 0) throw DimensionError("empty similarity vector");
  const VectorXd shifted = (s.array() + 1.0).max(0.0).matrix();
  const double total = shifted.sum();
  if (!(total >= 1e-12)) return VectorXd::Constant(s.size(), 1.0 / static_cast<double>(s.size()));
  return shifted / total;
}

namespace {

constexpr double kMassTol = 1e-15;

// Successive shortest augmenting paths on the bipartite transport network.
// Residual arcs: source->row (remaining supply), row->col (uncapacitated,
// cost C), col->row (existing flow, cost -C), col->sink (remaining demand).
// Bellman-Ford handles the negative reverse arcs; the network has 2c+2 nodes.
MatrixXd solve_transport(const VectorXd& p, const VectorXd& q, const MatrixXd& cost) {
  const Index c = p.size();
  const double inf = std::numeric_limits<double>::infinity();
  VectorXd supply = p, demand = q;
  MatrixXd plan = MatrixXd::Zero(c, c);

  // Node layout: rows 0..c-1, cols c..2c-1, sink 2c. The source is implicit:
  // every row with remaining supply starts at distance 0.
  const Index sink = 2 * c;
  std::vector<double> dist(static_cast<std::size_t>(2 * c + 1));
  std::vector<Index> pred(static_cast<std::size_t>(2 * c + 1));

  const long max_augment = 16 * (c * c + 4 * c);
  for (long iter = 0; iter < max_augment; ++iter) {
    if (supply.sum() <= kMassTol || demand.sum() <= kMassTol) break;
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(pred.begin(), pred.end(), -1);
    for (Index j = 0; j < c; ++j)
      if (supply[j] > kMassTol) dist[static_cast<std::size_t>(j)] = 0.0;

    for (Index pass = 0; pass <= 2 * c + 1; ++pass) {
      bool changed = false;
      for (Index j = 0; j < c; ++j) {
        const double dj = dist[static_cast<std::size_t>(j)];
        if (dj == inf) continue;
        for (Index k = 0; k < c; ++k) {
          auto& dk = dist[static_cast<std::size_t>(c + k)];
          if (dj + cost(j, k) < dk - 1e-14) {
            dk = dj + cost(j, k);
            pred[static_cast<std::size_t>(c + k)] = j;
            changed = true;
          }
        }
      }
      for (Index k = 0; k < c; ++k) {
        const double dk = dist[static_cast<std::size_t>(c + k)];
        if (dk == inf) continue;
        for (Index j = 0; j < c; ++j) {
          if (plan(j, k) <= kMassTol) continue;
          auto& dj = dist[static_cast<std::size_t>(j)];
          if (dk - cost(j, k) < dj - 1e-14) {
            dj = dk - cost(j, k);
            pred[static_cast<std::size_t>(j)] = c + k;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }

    Index best = -1;
    for (Index k = 0; k < c; ++k) {
      if (demand[k] <= kMassTol || dist[static_cast<std::size_t>(c + k)] == inf) continue;
      if (best < 0 || dist[static_cast<std::size_t>(c + k)] < dist[static_cast<std::size_t>(c + best)] - 1e-14)
        best = k;
    }
    if (best < 0) break;
    pred[static_cast<std::size_t>(sink)] = c + best;

    // Walk back to find the bottleneck, then augment.
    double push = demand[best];
    Index node = c + best;
    for (Index steps = 0;; ++steps) {
      if (steps > 2 * c + 2) throw NumericError("transport solver found a cyclic augmenting path");
      const Index prev = pred[static_cast<std::size_t>(node)];
      if (node >= c) {
        if (prev < 0) throw NumericError("transport solver lost its augmenting path");
        node = prev;
      } else {
        if (prev < 0) {
          push = std::min(push, supply[node]);
          break;
        }
        push = std::min(push, plan(node, prev - c));
        node = prev;
      }
    }
    node = c + best;
    while (true) {
      const Index prev = pred[static_cast<std::size_t>(node)];
      if (node >= c) {
        plan(prev, node - c) += push;
        node = prev;
      } else {
        if (prev < 0) {
          supply[node] -= push;
          break;
        }
        plan(node, prev - c) -= push;
        node = prev;
      }
    }
    demand[best] -= push;
  }
  return plan.cwiseMax(0.0);
}

}  // namespace

TransportResult wasserstein(const VectorXd& p, const VectorXd& q, const GroundCost& cost) {
  if (p.size() != q.size()) throw DimensionError("transport marginals differ in length");
  if (p.size() != cost.size()) throw DimensionError("ground cost size does not match the marginals");
  if (!on_simplex(p) || !on_simplex(q)) throw RangeError("transport marginals must lie on the simplex");
  TransportResult out;
  out.plan = solve_transport(p, q, cost.matrix());
  out.distance = (out.plan.array() * cost.matrix().array()).sum();
  return out;
}

double confidence(const CRGraph& semantic_graph, const CRGraph& task_graph, double epsilon, const GroundCost& cost) {
  if (!(epsilon > 0)) throw ConfigError("confidence epsilon must be positive");
  const double w =
      wasserstein(normalize_similarities(semantic_graph), normalize_similarities(task_graph), cost).distance;
  return 1.0 / (w + epsilon);
}

}  // namespace ldamend
