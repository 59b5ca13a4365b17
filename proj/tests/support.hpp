#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's solvers: fits go through the normal equations in long double.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "robaudit/core_ols.hpp"

namespace testsupport {

using robaudit::Index;
using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Gaussian design (optionally with intercept) and a linear response plus noise.
inline robaudit::Dataset random_dataset(std::uint64_t seed, Index n, Index covariates, bool intercept = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(n, covariates);
  Eigen::VectorXd y(n);
  Eigen::VectorXd beta(covariates);
  for (Index j = 0; j < covariates; ++j) beta[j] = z(rng);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < covariates; ++j) x(i, j) = z(rng);
    y[i] = x.row(i).dot(beta) + z(rng);
  }
  std::vector<std::string> names;
  for (Index j = 0; j < covariates; ++j) names.push_back("x" + std::to_string(j + 1));
  return robaudit::Dataset::make(x, y, names, intercept);
}

/// Weighted least squares through (X'WX) theta = X'Wy, solved in long double.
inline VecL wls_ld(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const MatL xl = x.cast<long double>();
  const VecL wl = w.cast<long double>();
  const MatL g = xl.transpose() * wl.asDiagonal() * xl;
  const VecL rhs = xl.transpose() * (wl.asDiagonal() * y.cast<long double>());
  return g.fullPivLu().solve(rhs);
}

inline Eigen::VectorXd wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  return wls_ld(x, y, w).cast<double>();
}

inline Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return wls(x, y, Eigen::VectorXd::Ones(x.rows()));
}

/// theta after removing `drop`, via explicit weights.
inline Eigen::VectorXd ols_without(const robaudit::Dataset& d, const std::vector<Index>& drop) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(d.rows());
  for (Index i : drop) w[i] = 0.0;
  return wls(d.design(), d.response(), w);
}

/// theta_p(without `drop`) - theta_p(full), subtracted before rounding to
/// double so small changes keep their relative accuracy.
inline double drop_change(const robaudit::Dataset& d, const std::vector<Index>& drop, Index p) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(d.rows());
  const VecL full = wls_ld(d.design(), d.response(), w);
  for (Index i : drop) w[i] = 0.0;
  const VecL without = wls_ld(d.design(), d.response(), w);
  return static_cast<double>(without[p] - full[p]);
}

/// Full hat matrix X (X'X)^{-1} X' in long double.
inline Eigen::MatrixXd hat_matrix(const Eigen::MatrixXd& x) {
  const MatL xl = x.cast<long double>();
  const MatL g = xl.transpose() * xl;
  return (xl * g.fullPivLu().solve(xl.transpose())).cast<double>();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testsupport
