// Discrete Skorokhod reflection at zero and path functionals built on it.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Dense>

#include "spider/junction.hpp"

namespace spider {

template <class Scalar>
struct Reflection {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;    // reflected path, >= 0
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ell;  // minimal pusher, nondecreasing
};

/// ell_k = max(0, max_{j<=k} -y_j) and x_k = y_k + ell_k.
template <class Derived>
Reflection<typename Derived::Scalar> reflect(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = y.size();
  if (n == 0) return {};
  if (y(0) < Scalar(0)) throw PreconditionError("reflect: driving path must start at y_0 >= 0");
  Reflection<Scalar> out;
  out.x.resize(n);
  out.ell.resize(n);
  Scalar push(0);
  for (Eigen::Index k = 0; k < n; ++k) {
    push = std::max(push, -y(k));
    out.ell(k) = push;
    out.x(k) = y(k) + push;  // exactly 0 where the pusher is active
  }
  return out;
}

/// Largest |f(u) - f(s)| over grid pairs with |u - s| <= theta.
template <class DerivedT, class DerivedF>
typename DerivedF::Scalar modulus(const Eigen::MatrixBase<DerivedT>& times,
                                  const Eigen::MatrixBase<DerivedF>& f, double theta) {
  using Scalar = typename DerivedF::Scalar;
  if (!(theta > 0.0)) throw PreconditionError("modulus: theta must be > 0");
  const Eigen::Index n = f.size();
  std::deque<Eigen::Index> hi, lo;  // indices with decreasing / increasing values
  Scalar best(0);
  Eigen::Index left = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    while (times(r) - times(left) > theta) ++left;
    while (!hi.empty() && f(hi.back()) <= f(r)) hi.pop_back();
    while (!lo.empty() && f(lo.back()) >= f(r)) lo.pop_back();
    hi.push_back(r);
    lo.push_back(r);
    while (hi.front() < left) hi.pop_front();
    while (lo.front() < left) lo.pop_front();
    best = std::max(best, f(hi.front()) - f(lo.front()));
  }
  return best;
}

/// Left-endpoint Riemann sum of 1{x(u) < eps} du.
template <class DerivedT, class DerivedX>
double occupation_below(const Eigen::MatrixBase<DerivedT>& times, const Eigen::MatrixBase<DerivedX>& x,
                        double eps) {
  if (!(eps > 0.0)) throw PreconditionError("occupation_below: eps must be > 0");
  double total = 0.0;
  for (Eigen::Index k = 0; k + 1 < x.size(); ++k)
    if (x(k) < eps) total += times(k + 1) - times(k);
  return total;
}

/// Local-time mass placed on steps whose endpoints both stay above delta.
inline double flat_off_zero_defect(const SpiderPath& path, double delta) {
  if (!(delta > kZeroTol)) throw PreconditionError("flat_off_zero_defect: delta must exceed zero_tol");
  double defect = 0.0;
  for (Eigen::Index k = 0; k + 1 < path.size(); ++k)
    if (std::min(path.x(k), path.x(k + 1)) > delta) defect += path.l(k + 1) - path.l(k);
  return defect;
}

}  // namespace spider
