#pragma once

// Weighted OLS fits with {0,1} weights, refits after deletions, and the
// rank-one (Sherman-Morrison) single-row downdate. Everything downstream
// (scores, greedy search, the exhaustive oracle, diagnostics) consumes the
// OlsFit produced here.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "robaudit/error.hpp"
#include "robaudit/parallel.hpp"

namespace robaudit {

using Index = Eigen::Index;

/// Gram matrices whose condition estimate exceeds this are treated as singular.
inline constexpr double kMaxGramCondition = 1e12;

/// Rows with 1 - h_nn below this are downdated by a full refit, not Sherman-Morrison.
inline constexpr double kHighLeverageGap = 1e-6;

/// Hard floor on 1 - h_nn for the rank-one identity.
inline constexpr double kLeverageOneGap = 1e-12;

inline const std::string kInterceptName = "(intercept)";

class Dataset {
 public:
  Dataset() = default;

  /// Builds and validates a dataset. With `append_intercept` an all-ones
  /// column named "(intercept)" is added as the last column.
  static Dataset make(Eigen::MatrixXd covariates, Eigen::VectorXd response,
                      std::vector<std::string> names, bool append_intercept) {
    Dataset d;
    const Index n = covariates.rows();
    if (append_intercept) {
      Eigen::MatrixXd with(n, covariates.cols() + 1);
      with.leftCols(covariates.cols()) = covariates;
      with.col(covariates.cols()).setOnes();
      covariates = std::move(with);
      names.push_back(kInterceptName);
    }
    d.x_ = std::move(covariates);
    d.y_ = std::move(response);
    d.names_ = std::move(names);
    d.has_intercept_ = append_intercept;
    d.validate();
    return d;
  }

  Index rows() const { return x_.rows(); }
  Index cols() const { return x_.cols(); }
  const Eigen::MatrixXd& design() const { return x_; }
  const Eigen::VectorXd& response() const { return y_; }
  const std::vector<std::string>& column_names() const { return names_; }
  bool has_intercept() const { return has_intercept_; }

  /// Column position for a name, or nullopt.
  std::optional<Index> column_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<Index>(it - names_.begin());
  }

  void validate() const {
    if (y_.size() != x_.rows())
      throw Error(ErrorCode::InvalidDataset, "response length does not match design rows");
    if (x_.cols() < 1) throw Error(ErrorCode::InvalidDataset, "design needs at least one column");
    if (x_.rows() <= x_.cols())
      throw Error(ErrorCode::InvalidDataset, "need more rows than columns (N > P)");
    if (static_cast<Index>(names_.size()) != x_.cols())
      throw Error(ErrorCode::InvalidDataset, "one column name per design column required");
    if (!x_.allFinite() || !y_.allFinite())
      throw Error(ErrorCode::NonFinite, "dataset contains NaN or Inf");
    std::unordered_set<std::string> seen;
    for (const auto& name : names_)
      if (!seen.insert(name).second)
        throw Error(ErrorCode::InvalidDataset, "duplicate column name '" + name + "'");
    if (has_intercept_ && !(x_.col(x_.cols() - 1).array() == 1.0).all())
      throw Error(ErrorCode::InvalidDataset, "intercept column is not identically 1");
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::vector<std::string> names_;
  bool has_intercept_ = false;
};

/// Largest number of rows droppable under fraction alpha: floor(alpha * N).
/// The small offset keeps alpha = m/N from rounding down to m - 1.
inline Index drop_budget(double alpha, Index n) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::InvalidArgument, "alpha must be a finite non-negative fraction");
  return static_cast<Index>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

/// Ordered set of distinct dropped rows plus the cardinality budget it was built under.
struct DropSet {
  std::vector<Index> indices;
  Index budget = 0;

  Index size() const { return static_cast<Index>(indices.size()); }
  bool empty() const { return indices.empty(); }

  void validate(Index n) const {
    if (size() > budget) throw Error(ErrorCode::InvalidArgument, "drop set exceeds its budget");
    std::unordered_set<Index> seen;
    for (Index i : indices) {
      if (i < 0 || i >= n) throw Error(ErrorCode::InvalidArgument, "drop index out of range");
      if (!seen.insert(i).second) throw Error(ErrorCode::InvalidArgument, "duplicate drop index");
    }
  }
};

/// {0,1} weights; 0 marks a dropped row.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(Index n) : active_(static_cast<std::size_t>(n), 1) {}

  static WeightVector ones(Index n) { return WeightVector(n); }

  static WeightVector without(Index n, const DropSet& drop) {
    drop.validate(n);
    WeightVector w(n);
    for (Index i : drop.indices) w.active_[static_cast<std::size_t>(i)] = 0;
    return w;
  }

  Index size() const { return static_cast<Index>(active_.size()); }
  bool active(Index i) const { return active_[static_cast<std::size_t>(i)] != 0; }
  double operator[](Index i) const { return active(i) ? 1.0 : 0.0; }
  void drop(Index i) { active_[static_cast<std::size_t>(i)] = 0; }

  Index zeros() const {
    return static_cast<Index>(std::count(active_.begin(), active_.end(), char{0}));
  }
  Index active_count() const { return size() - zeros(); }
  bool within_budget(double alpha) const { return zeros() <= drop_budget(alpha, size()); }

  std::vector<Index> dropped() const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (!active(i)) out.push_back(i);
    return out;
  }

  bool operator==(const WeightVector&) const = default;

 private:
  std::vector<char> active_;
};

/// Immutable result of a weighted OLS fit. Residuals and leverages are
/// reported for every row; for dropped rows they are the out-of-sample
/// residual y_n - theta'x_n and x_n'(X'X)^{-1}x_n.
struct OlsFit {
  Eigen::VectorXd theta;
  Eigen::MatrixXd gram_inverse;
  Eigen::VectorXd residuals;
  Eigen::VectorXd leverages;
  double condition_estimate = 0.0;
  Index n_active = 0;
  WeightVector weights;
};

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, const WeightVector& w, Index n_active) {
  Eigen::MatrixXd out(n_active, x.cols());
  Index k = 0;
  for (Index i = 0; i < x.rows(); ++i)
    if (w.active(i)) out.row(k++) = x.row(i);
  return out;
}

inline Eigen::VectorXd gather_rows(const Eigen::VectorXd& y, const WeightVector& w, Index n_active) {
  Eigen::VectorXd out(n_active);
  Index k = 0;
  for (Index i = 0; i < y.size(); ++i)
    if (w.active(i)) out[k++] = y[i];
  return out;
}

}  // namespace detail

/// Minimizer of sum_n w_n (y_n - theta'x_n)^2.
///
/// Factorizes the active design by Householder QR (X_a = QR) rather than
/// forming X'X: the condition number that matters for the residuals is
/// cond(X_a), not cond(X_a)^2. Throws RankDeficient when the active rows
/// cannot identify theta or cond(X_a'X_a) exceeds kMaxGramCondition.
/// How much of an OlsFit to fill. Coefficients skips the O(NP^2) per-row
/// pass: leverages and residuals are left empty.
enum class FitDetail { Full, Coefficients };

inline OlsFit fit(const Dataset& data, const WeightVector& weights, const ComputeOptions& opts = {},
                  FitDetail level = FitDetail::Full) {
  const Index n = data.rows();
  const Index p = data.cols();
  if (weights.size() != n) throw Error(ErrorCode::InvalidArgument, "weight vector length mismatch");
  if (!data.design().allFinite() || !data.response().allFinite())
    throw Error(ErrorCode::NonFinite, "dataset contains NaN or Inf");

  const Index n_active = weights.active_count();
  if (n_active < p)
    throw Error(ErrorCode::RankDeficient, "fewer active rows than coefficients");

  const bool all_active = n_active == n;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(all_active ? data.design()
                                                      : detail::gather_rows(data.design(), weights, n_active));
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();

  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
  const double smax = sv.maxCoeff();
  const double smin = sv.minCoeff();
  if (!(smin > 0.0)) throw Error(ErrorCode::RankDeficient, "active design is singular");
  const double condition = (smax / smin) * (smax / smin);
  if (!(condition <= kMaxGramCondition))
    throw Error(ErrorCode::RankDeficient,
                "condition estimate of active Gram matrix exceeds 1e12 (" + std::to_string(condition) + ")");

  OlsFit out;
  out.theta = qr.solve(all_active ? data.response() : detail::gather_rows(data.response(), weights, n_active));
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  out.gram_inverse = r_inv * r_inv.transpose();
  out.condition_estimate = condition;
  out.n_active = n_active;
  out.weights = weights;
  if (level == FitDetail::Coefficients) return out;
  out.residuals.resize(n);
  out.leverages.resize(n);

  const auto& x = data.design();
  const auto& y = data.response();
  parallel_for_ranges(static_cast<std::size_t>(n), opts.threads, [&](std::size_t b, std::size_t e) {
    const Index begin = static_cast<Index>(b);
    const Index len = static_cast<Index>(e - b);
    const Eigen::MatrixXd u = x.middleRows(begin, len) * r_inv;
    out.leverages.segment(begin, len) = u.rowwise().squaredNorm();
    out.residuals.segment(begin, len) = y.segment(begin, len) - x.middleRows(begin, len) * out.theta;
  });
  return out;
}

/// Outcome of a refit that may legitimately lose identifiability. When
/// `fit` is empty the refit is ill-defined and `theta` holds the
/// minimum-norm least-squares solution on the surviving rows.
struct Refit {
  std::optional<OlsFit> fit;
  Eigen::VectorXd theta;
  std::string reason;

  bool ill_defined() const { return !fit.has_value(); }
};

namespace detail {

inline Eigen::VectorXd minimum_norm_solution(const Dataset& data, const WeightVector& weights) {
  const Index n_active = weights.active_count();
  if (n_active == 0) return Eigen::VectorXd::Zero(data.cols());
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  // Pivots below sqrt(1e-12) of the largest are rank-deficient, matching the Gram gate.
  cod.setThreshold(std::sqrt(1.0 / kMaxGramCondition));
  cod.compute(gather_rows(data.design(), weights, n_active));
  return cod.solve(gather_rows(data.response(), weights, n_active));
}

}  // namespace detail

inline Refit refit(const Dataset& data, const WeightVector& weights, const ComputeOptions& opts = {},
                   FitDetail level = FitDetail::Full) {
  Refit out;
  try {
    out.fit = fit(data, weights, opts, level);
    out.theta = out.fit->theta;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RankDeficient) throw;
    out.reason = e.what();
    out.theta = detail::minimum_norm_solution(data, weights);
  }
  return out;
}

/// Fit with the rows in `drop` removed. Rank loss is reported, not thrown.
inline Refit refit_without(const Dataset& data, const DropSet& drop, const ComputeOptions& opts = {},
                           FitDetail level = FitDetail::Full) {
  return refit(data, WeightVector::without(data.rows(), drop), opts, level);
}

/// theta fit on the active rows of `base` minus row n, in O(P^2):
/// theta_{-n} = theta - (X'X)^{-1} x_n r_n / (1 - h_nn).
inline Eigen::VectorXd downdate_single(const OlsFit& base, const Dataset& data, Index n) {
  if (n < 0 || n >= data.rows()) throw Error(ErrorCode::InvalidArgument, "row index out of range");
  if (!base.weights.active(n)) throw Error(ErrorCode::InvalidArgument, "row is not active in this fit");
  const double gap = 1.0 - base.leverages[n];
  if (!(gap >= kLeverageOneGap))
    throw Error(ErrorCode::LeverageOne, "row " + std::to_string(n) + " has leverage ~1; refit instead");
  const Eigen::VectorXd u = base.gram_inverse * data.design().row(n).transpose();
  return base.theta - u * (base.residuals[n] / gap);
}

}  // namespace robaudit
