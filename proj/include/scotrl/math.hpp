#pragma once

#include <Eigen/Dense>

#include <cmath>

// Small numeric kernels shared by the weighting and policy code. Free
// functions over Eigen expressions so callers can pass blocks/maps without
// materializing.

namespace scotrl {

inline constexpr double kKlFloor = 1e-12;

// Shannon entropy -sum p ln p with the 0 ln 0 = 0 convention.
template <class D>
double entropy(const Eigen::MatrixBase<D>& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    if (pi > 0.0) h -= pi * std::log(pi);
  }
  return h;
}

// KL(p || q) = sum p ln(p/q); q is floored at kKlFloor, 0 ln(0/q) = 0.
template <class Dp, class Dq>
double kl_divergence(const Eigen::MatrixBase<Dp>& p, const Eigen::MatrixBase<Dq>& q) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    if (pi > 0.0) {
      const double qi = q(i) > kKlFloor ? q(i) : kKlFloor;
      d += pi * std::log(pi / qi);
    }
  }
  return d;
}

// Numerically stable softmax; invariant under adding a constant to z.
template <class D>
Eigen::VectorXd softmax(const Eigen::MatrixBase<D>& z) {
  Eigen::VectorXd p = z;
  const double m = p.maxCoeff();
  p = (p.array() - m).exp();
  p /= p.sum();
  return p;
}

}  // namespace scotrl
