#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "ldamend/errors.hpp"
#include "ldamend/types.hpp"

namespace ldamend {

enum class OptimizerKind { sgd, adam };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer: " + std::string(s));
}

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar = double>
class Optimizer {
 public:
  Optimizer(OptimizerSettings settings, Index parameter_count) : settings_(settings) {
    if (!(settings_.learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (settings_.kind == OptimizerKind::adam) {
      m_ = Vec<Scalar>::Zero(parameter_count);
      v_ = Vec<Scalar>::Zero(parameter_count);
    }
    size_ = parameter_count;
  }

  const OptimizerSettings& settings() const { return settings_; }
  long steps() const { return t_; }

  void step(Vec<Scalar>& params, const Vec<Scalar>& grads) {
    if (params.size() != size_ || grads.size() != size_)
      throw DimensionError("optimizer step with mismatched parameter/gradient shapes");
    const Scalar lr = Scalar(settings_.learning_rate);
    ++t_;
    if (settings_.kind == OptimizerKind::sgd) {
      params -= lr * grads;
      return;
    }
    const Scalar b1 = Scalar(settings_.beta1), b2 = Scalar(settings_.beta2);
    m_ = b1 * m_ + (Scalar(1) - b1) * grads;
    v_ = b2 * v_ + (Scalar(1) - b2) * grads.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + Scalar(settings_.eps));
  }

 private:
  OptimizerSettings settings_;
  Index size_ = 0;
  Vec<Scalar> m_, v_;
  long t_ = 0;
};

}  // namespace ldamend
