#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "ldamend/errors.hpp"
#include "ldamend/types.hpp"

namespace ldamend {

// Central-difference gradient estimate of a scalar loss.
template <typename LossFn, typename Derived>
auto finite_difference_grad(LossFn&& loss_fn, const Eigen::MatrixBase<Derived>& params,
                            typename Derived::Scalar h = typename Derived::Scalar(1e-5)) {
  using Scalar = typename Derived::Scalar;
  if (!(h > Scalar(0))) throw RangeError("finite difference step must be positive");
  Vec<Scalar> p = params;
  Vec<Scalar> grad(p.size());
  for (Index i = 0; i < p.size(); ++i) {
    const Scalar orig = p[i];
    p[i] = orig + h;
    const Scalar up = loss_fn(std::as_const(p));
    p[i] = orig - h;
    const Scalar down = loss_fn(std::as_const(p));
    p[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("loss is not finite during finite differences");
    grad[i] = (up - down) / (Scalar(2) * h);
  }
  return grad;
}

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
template <typename DerivedA, typename DerivedB>
double relative_error(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

}  // namespace ldamend
