#pragma once

#include <algorithm>
#include <cmath>

#include "ldamend/errors.hpp"
#include "ldamend/types.hpp"

namespace ldamend {

template <typename DerivedA, typename DerivedB>
auto cosine_similarity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw DimensionError("cosine similarity of vectors with different lengths");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > Scalar(0)) || !(nb > Scalar(0))) throw NumericError("cosine similarity of a zero-norm vector");
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

// d cos(a, b) / d a
template <typename DerivedA, typename DerivedB>
auto cosine_similarity_grad(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw DimensionError("cosine similarity of vectors with different lengths");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > Scalar(0)) || !(nb > Scalar(0))) throw NumericError("cosine similarity of a zero-norm vector");
  const Scalar c = a.dot(b) / (na * nb);
  Vec<Scalar> g = b / (na * nb) - c * a / (na * na);
  return g;
}

template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Vec<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  return Vec<Scalar>(e / e.sum());
}

template <typename Derived>
auto log_softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = z.maxCoeff();
  const Scalar lse = m + std::log((z.array() - m).exp().sum());
  return Vec<Scalar>(z.array() - lse);
}

template <typename Derived>
bool on_simplex(const Eigen::MatrixBase<Derived>& q, double tol = 1e-9) {
  using Scalar = typename Derived::Scalar;
  return q.size() > 0 && q.allFinite() && (q.array() >= Scalar(0)).all() &&
         std::abs(q.sum() - Scalar(1)) <= Scalar(tol);
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss;
  Vec<Scalar> grad;
};

// Cross entropy of logits z against a simplex target q; grad is dL/dz.
template <typename DerivedQ, typename DerivedZ>
auto cross_entropy(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedZ>& z) {
  using Scalar = typename DerivedZ::Scalar;
  if (q.size() != z.size()) throw DimensionError("cross entropy target and logits differ in length");
  if (!on_simplex(q)) throw RangeError("cross entropy target is not a probability vector");
  const Vec<Scalar> logp = log_softmax(z);
  Scalar loss = 0;
  for (Index k = 0; k < q.size(); ++k)
    if (q[k] > Scalar(0)) loss -= q[k] * logp[k];
  return LossAndGrad<Scalar>{loss, Vec<Scalar>(softmax(z) - q)};
}

}  // namespace ldamend
