#pragma once

// Per-row drop-effect scores and the two additive audits.
//
// Scores are stored in "effect of dropping" orientation: scores[n] is the
// predicted change in theta_p when row n alone is removed. That is the
// negation of the weight derivative d theta_p / d w_n at w = 1, so picking
// the most negative scores drives theta_p down.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "robaudit/core_ols.hpp"
#include "robaudit/report.hpp"

namespace robaudit {

enum class ScoreKind { Influence, OneExact };

/// Marks rows with no score: dropped rows, and one-exact rows whose
/// removal alone makes the fit rank-deficient.
inline constexpr double kNoScore = std::numeric_limits<double>::quiet_NaN();

inline bool has_score(double s) { return !std::isnan(s); }

struct ScoreVector {
  Eigen::VectorXd scores;
  ScoreKind kind = ScoreKind::Influence;
  Index coef = 0;
  std::vector<Index> ill_defined_rows;  // one-exact only
};

namespace detail {

inline void check_coef(const Dataset& data, Index p) {
  if (p < 0 || p >= data.cols()) throw Error(ErrorCode::InvalidArgument, "coefficient index out of range");
}

/// e_p'(X'X)^{-1} x_n for every row.
inline Eigen::VectorXd leverage_like(const OlsFit& f, const Dataset& data, Index p) {
  const Eigen::VectorXd g = f.gram_inverse.col(p);
  return data.design() * g;
}

}  // namespace detail

/// scores[n] = -e_p'(X'X)^{-1} x_n r_n. One solve for (X'X)^{-1}e_p (already
/// materialized in the fit), then one dot product per row.
inline ScoreVector influence_scores(const OlsFit& f, const Dataset& data, Index p) {
  detail::check_coef(data, p);
  ScoreVector out;
  out.kind = ScoreKind::Influence;
  out.coef = p;
  out.scores = -(detail::leverage_like(f, data, p).array() * f.residuals.array()).matrix();
  for (Index n = 0; n < data.rows(); ++n)
    if (!f.weights.active(n)) out.scores[n] = kNoScore;
  return out;
}

/// Exact change in theta_p from dropping each active row alone.
///
/// Uses the rank-one identity score = influence / (1 - h_nn) for ordinary
/// rows. Rows with 1 - h_nn < kHighLeverageGap lose too much precision
/// there and are refit from scratch; if that refit is rank-deficient the
/// row gets kNoScore and is listed in ill_defined_rows.
inline ScoreVector one_exact_scores(const OlsFit& f, const Dataset& data, Index p,
                                    const ComputeOptions& opts = {}) {
  detail::check_coef(data, p);
  ScoreVector out;
  out.kind = ScoreKind::OneExact;
  out.coef = p;
  const Eigen::VectorXd lev_like = detail::leverage_like(f, data, p);
  out.scores.resize(data.rows());
  for (Index n = 0; n < data.rows(); ++n) {
    if (!f.weights.active(n)) {
      out.scores[n] = kNoScore;
      continue;
    }
    const double gap = 1.0 - f.leverages[n];
    if (gap >= kHighLeverageGap) {
      out.scores[n] = -lev_like[n] * f.residuals[n] / gap;
      continue;
    }
    WeightVector w = f.weights;
    w.drop(n);
    const Refit r = refit(data, w, opts);
    if (r.ill_defined()) {
      out.scores[n] = kNoScore;
      out.ill_defined_rows.push_back(n);
    } else {
      out.scores[n] = r.theta[p] - f.theta[p];
    }
  }
  return out;
}

/// Rows whose score strictly helps `d`, most helpful first, ties by row index.
inline std::vector<Index> rank_helpful(const Eigen::VectorXd& scores, Direction d) {
  std::vector<Index> rows;
  for (Index n = 0; n < scores.size(); ++n)
    if (has_score(scores[n]) && helps(scores[n], d)) rows.push_back(n);
  const double sign = d == Direction::ToNegative ? 1.0 : -1.0;
  std::stable_sort(rows.begin(), rows.end(), [&](Index a, Index b) {
    return sign * scores[a] < sign * scores[b];
  });
  return rows;
}

struct AdditiveAudit {
  Method method = Method::AMIP;
  Index coef = 0;
  Direction direction = Direction::ToNegative;
  double full_estimate = 0.0;
  DropSet drop;
  double predicted_estimate = 0.0;
  Estimate refit_estimate;
  bool sign_changed_predicted = false;
  bool sign_changed_refit = false;
  std::vector<Index> excluded_rows;  // rows without a usable score
};

namespace detail {

inline Index checked_budget(double alpha, Index n) {
  const Index k = drop_budget(alpha, n);
  if (k < 1) throw Error(ErrorCode::BudgetZero, "floor(alpha * N) = 0; nothing may be dropped");
  return k;
}

inline void check_direction(double theta_p, Direction d) {
  if (reaches_target(theta_p, d))
    throw Error(ErrorCode::WrongDirection,
                "coefficient already has the target sign (" + std::to_string(theta_p) + ")");
}

}  // namespace detail

/// Additive audit against an existing full-data fit with an explicit budget k.
inline AdditiveAudit additive_audit(const Dataset& data, const OlsFit& full, Index p, Index k, Method method,
                                    Direction d, const ComputeOptions& opts = {}) {
  if (method != Method::AMIP && method != Method::AdditiveOneExact)
    throw Error(ErrorCode::InvalidArgument, "additive_audit takes AMIP or AdditiveOneExact");
  if (k < 1) throw Error(ErrorCode::BudgetZero, "drop budget is zero");
  detail::check_coef(data, p);
  detail::check_direction(full.theta[p], d);

  const ScoreVector sv =
      method == Method::AMIP ? influence_scores(full, data, p) : one_exact_scores(full, data, p, opts);

  AdditiveAudit out;
  out.method = method;
  out.coef = p;
  out.direction = d;
  out.full_estimate = full.theta[p];
  out.excluded_rows = sv.ill_defined_rows;
  out.drop.budget = k;

  std::vector<Index> ranked = rank_helpful(sv.scores, d);
  if (static_cast<Index>(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));
  out.drop.indices = ranked;

  double sum = 0.0;
  for (Index n : ranked) sum += sv.scores[n];
  out.predicted_estimate = full.theta[p] + sum;
  out.sign_changed_predicted = !ranked.empty() && reaches_target(out.predicted_estimate, d);

  const Refit r = refit_without(data, out.drop, opts, FitDetail::Coefficients);
  out.refit_estimate = Estimate{r.theta[p], r.ill_defined()};
  out.sign_changed_refit = !ranked.empty() && reaches_target(r.theta[p], d);
  return out;
}

/// Fits the full data, budgets floor(alpha N) rows, and runs the additive audit.
inline AdditiveAudit additive_audit(const Dataset& data, Index p, double alpha, Method method, Direction d,
                                    const ComputeOptions& opts = {}) {
  const Index k = detail::checked_budget(alpha, data.rows());
  const OlsFit full = fit(data, WeightVector::ones(data.rows()), opts);
  return additive_audit(data, full, p, k, method, d, opts);
}

inline AuditReport to_report(const AdditiveAudit& a) {
  AuditReport r;
  r.method = a.method;
  r.coef = a.coef;
  r.direction = a.direction;
  r.full_estimate = a.full_estimate;
  r.predicted_estimate = a.predicted_estimate;
  r.refit = a.refit_estimate;
  r.dropped_indices = a.drop.indices;
  r.budget = a.drop.budget;
  r.sign_changed = a.sign_changed_refit;
  if (a.drop.empty()) r.note = "no row moves the coefficient toward the target sign";
  return r;
}

}  // namespace robaudit
