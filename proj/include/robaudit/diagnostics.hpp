#pragma once

// Explanatory quantities: per-row leverage/residual/score exports, the
// Cauchy-Schwarz bound on hat-matrix off-diagonals, the one-outlier limit
// quantities s and t, and closed-form errors of the additive methods.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "json.hpp"
#include "robaudit/approximators.hpp"
#include "robaudit/core_ols.hpp"
#include "robaudit/scenarios.hpp"

namespace robaudit {

struct MaskingRow {
  Index index = 0;
  double leverage = 0.0;
  double residual = 0.0;
  double influence = 0.0;
  double one_exact = 0.0;  // NaN when dropping the row alone loses rank
};

struct HatPair {
  Index n = 0;
  Index m = 0;
  double h_nm = 0.0;
  double bound = 0.0;  // sqrt(h_nn h_mm)
};

struct MaskingReport {
  Index coef = 0;
  std::vector<MaskingRow> rows;
  std::vector<HatPair> pairs;  // lexicographic (n < m)
};

struct MaskingOptions {
  std::optional<std::vector<std::pair<Index, Index>>> pairs;  // explicit pairs win
  bool all_pairs = false;
  Index top = 20;  // otherwise: all pairs among the top rows by |one_exact|
};

/// Row table for every row plus a hat-pair table.
inline MaskingReport masking_report(const OlsFit& f, const Dataset& data, Index p, const MaskingOptions& mo = {},
                                    const ComputeOptions& opts = {}) {
  const ScoreVector infl = influence_scores(f, data, p);
  const ScoreVector one = one_exact_scores(f, data, p, opts);
  MaskingReport out;
  out.coef = p;
  const Index n = data.rows();
  out.rows.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    out.rows.push_back({i, f.leverages[i], f.residuals[i], infl.scores[i], one.scores[i]});

  std::vector<std::pair<Index, Index>> pairs;
  if (mo.pairs) {
    for (auto [a, b] : *mo.pairs) {
      if (a < 0 || b < 0 || a >= n || b >= n) throw Error(ErrorCode::InvalidArgument, "pair index out of range");
      pairs.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(pairs.begin(), pairs.end());
  } else {
    std::vector<Index> chosen(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) chosen[static_cast<std::size_t>(i)] = i;
    if (!mo.all_pairs && mo.top < n) {
      // Rows without a one-exact score lose rank on removal: rank them first.
      auto magnitude = [&](Index i) {
        const double s = one.scores[i];
        return has_score(s) ? std::abs(s) : std::numeric_limits<double>::infinity();
      };
      std::stable_sort(chosen.begin(), chosen.end(), [&](Index a, Index b) { return magnitude(a) > magnitude(b); });
      chosen.resize(static_cast<std::size_t>(std::max<Index>(mo.top, 0)));
      std::sort(chosen.begin(), chosen.end());
    }
    for (std::size_t a = 0; a < chosen.size(); ++a)
      for (std::size_t b = a + 1; b < chosen.size(); ++b) pairs.emplace_back(chosen[a], chosen[b]);
  }

  out.pairs.resize(pairs.size());
  const auto& x = data.design();
  parallel_for_ranges(pairs.size(), opts.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const auto [i, j] = pairs[k];
      const double h = x.row(i).dot(f.gram_inverse * x.row(j).transpose());
      out.pairs[k] = {i, j, h, std::sqrt(f.leverages[i] * f.leverages[j])};
    }
  });
  return out;
}

inline nlohmann::json to_json(const MaskingReport& r) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json j;
  j["coef"] = r.coef;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"index", row.index},
                         {"leverage", row.leverage},
                         {"residual", row.residual},
                         {"influence", num(row.influence)},
                         {"one_exact", num(row.one_exact)}});
  j["pairs"] = nlohmann::json::array();
  for (const auto& pr : r.pairs)
    j["pairs"].push_back({{"n", pr.n}, {"m", pr.m}, {"h_nm", pr.h_nm}, {"bound", pr.bound}});
  return j;
}

/// s, t and the limit of the probe row's influence as a single outlier
/// (lambda v, lambda c) moves off to infinity. Background quantities carry
/// the "minus one" subscript: the data without the outlier.
struct Prop1Limits {
  double s = 0.0;
  double t = 0.0;
  double limit_value = 0.0;
  Eigen::MatrixXd A_minus_1;
  Eigen::VectorXd b_minus_1;

  // Ingredients for the finite-lambda closed forms.
  double vAv = 0.0;   // v'A^{-1}v
  double pAv = 0.0;   // e_p'A^{-1}v
  double pAx = 0.0;   // e_p'A^{-1}x_2
  double vAx = 0.0;   // v'A^{-1}x_2
  double bAv = 0.0;   // b'A^{-1}v
  double bAx = 0.0;   // b'A^{-1}x_2
  double y2 = 0.0;
  double c = 0.0;
};

/// Background design and response exclude the outlier. Computed in long
/// double so small rational inputs come back exact to ~1e-15.
inline Prop1Limits prop1_limits(const Eigen::MatrixXd& background_x, const Eigen::VectorXd& background_y,
                                const Eigen::VectorXd& v, double c, Index probe_row, Index p) {
  const Index dim = background_x.cols();
  if (background_y.size() != background_x.rows() || v.size() != dim)
    throw Error(ErrorCode::InvalidArgument, "background and v dimensions disagree");
  if (probe_row < 0 || probe_row >= background_x.rows())
    throw Error(ErrorCode::InvalidArgument, "probe row out of range");
  if (p < 0 || p >= dim) throw Error(ErrorCode::InvalidArgument, "coefficient index out of range");
  if (std::abs(v.norm() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "v must have unit norm");
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "c must be positive");

  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const MatL xl = background_x.cast<long double>();
  const VecL yl = background_y.cast<long double>();
  const MatL a = xl.transpose() * xl;
  const VecL b = xl.transpose() * yl;

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.cast<double>());
  const auto sv = svd.singularValues();
  if (!(sv.minCoeff() > 0.0) || sv.maxCoeff() / sv.minCoeff() > kMaxGramCondition)
    throw Error(ErrorCode::RankDeficientBackground, "background design does not have full column rank");

  const Eigen::FullPivLU<MatL> lu(a);
  const VecL vl = v.cast<long double>();
  const VecL x2 = xl.row(probe_row).transpose();
  const VecL av = lu.solve(vl);
  const VecL ax = lu.solve(x2);

  const long double vAv = vl.dot(av), pAv = av[p], pAx = ax[p], vAx = vl.dot(ax), bAv = b.dot(av),
                    bAx = b.dot(ax), y2 = yl[probe_row], cl = c;
  const long double s = vAv * pAx - pAv * vAx;
  const long double t = y2 * vAv - cl * vAx - bAx * vAv + bAv * vAx;

  Prop1Limits out;
  out.s = static_cast<double>(s);
  out.t = static_cast<double>(t);
  out.limit_value = static_cast<double>(s * t / (vAv * vAv));
  out.A_minus_1 = a.cast<double>();
  out.b_minus_1 = b.cast<double>();
  out.vAv = static_cast<double>(vAv);
  out.pAv = static_cast<double>(pAv);
  out.pAx = static_cast<double>(pAx);
  out.vAx = static_cast<double>(vAx);
  out.bAv = static_cast<double>(bAv);
  out.bAx = static_cast<double>(bAx);
  out.y2 = static_cast<double>(y2);
  out.c = c;
  return out;
}

// The two closed forms below give the weight derivative d theta_p / d w_n
// at w = 1 (the opposite orientation to influence_scores, which reports
// the effect of dropping).

/// Outlier's weight derivative at finite lambda; decays like 1/lambda^2.
inline double outlier_influence_closed_form(const Prop1Limits& l, double lambda) {
  const double inv2 = 1.0 / (lambda * lambda);
  return inv2 * l.pAv * (l.c - l.bAv) / (inv2 * inv2 + 2.0 * inv2 * l.vAv + l.vAv * l.vAv);
}

/// Probe row's weight derivative at finite lambda; tends to limit_value.
inline double probe_influence_closed_form(const Prop1Limits& l, double lambda) {
  const double l2 = lambda * lambda;
  const double l4 = l2 * l2;
  const double resid = l.y2 - l.bAx;
  const double num = l4 * l.s * l.t + l2 * l.s * resid + l2 * l.t * l.pAx + l.pAx * resid;
  const double den = l4 * l.vAv * l.vAv + 2.0 * l2 * l.vAv + 1.0;
  return num / den;
}

/// Background with the outlier (lambda v, lambda c) prepended as row 0.
inline Dataset with_outlier(const Eigen::MatrixXd& background_x, const Eigen::VectorXd& background_y,
                            const Eigen::VectorXd& v, double c, double lambda) {
  const Index n = background_x.rows();
  Eigen::MatrixXd x(n + 1, background_x.cols());
  Eigen::VectorXd y(n + 1);
  x.row(0) = lambda * v.transpose();
  y[0] = lambda * c;
  x.bottomRows(n) = background_x;
  y.tail(n) = background_y;
  std::vector<std::string> names;
  for (Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  return Dataset::make(std::move(x), std::move(y), std::move(names), false);
}

struct StSimulation {
  Index dim = 0;
  Index draws = 0;
  double min_abs_s = std::numeric_limits<double>::infinity();
  double min_abs_t = std::numeric_limits<double>::infinity();
  Index zero_s = 0;  // draws with |s| <= threshold
  Index zero_t = 0;
};

/// Random one-outlier configurations: N rows with x ~ N(0, I_P) and
/// y = sum(x) + noise, outlier at row 0, a uniformly chosen probe row among
/// the rest, a uniform coefficient, an isotropic unit v, and c = 1.
inline StSimulation st_simulation(Index dim, Index draws, std::uint64_t seed, Index n = 1000,
                                  double threshold = 1e-12) {
  StSimulation out;
  out.dim = dim;
  out.draws = draws;
  NormalStream gauss(seed, 11);
  std::mt19937_64 pick(splitmix64(seed ^ splitmix64(12)));
  for (Index d = 0; d < draws; ++d) {
    Eigen::MatrixXd x(n - 1, dim);
    Eigen::VectorXd y(n - 1);
    for (Index i = 0; i < n - 1; ++i) {
      for (Index j = 0; j < dim; ++j) x(i, j) = gauss.next();
      y[i] = x.row(i).sum() + gauss.next();
    }
    Eigen::VectorXd v(dim);
    for (Index j = 0; j < dim; ++j) v[j] = gauss.next();
    v.normalize();
    const Index probe = static_cast<Index>(pick() % static_cast<std::uint64_t>(n - 1));
    const Index p = static_cast<Index>(pick() % static_cast<std::uint64_t>(dim));
    const Prop1Limits l = prop1_limits(x, y, v, 1.0, probe, p);
    out.min_abs_s = std::min(out.min_abs_s, std::abs(l.s));
    out.min_abs_t = std::min(out.min_abs_t, std::abs(l.t));
    if (std::abs(l.s) <= threshold) ++out.zero_s;
    if (std::abs(l.t) <= threshold) ++out.zero_t;
  }
  return out;
}

/// Closed-form (predicted - refit) for both additive methods on a given
/// drop set, alongside the same differences computed directly.
struct AdditiveErrors {
  double amip_error = 0.0;
  double one_exact_error = 0.0;
  double amip_direct = 0.0;       // (theta_p + sum influence) - refit
  double one_exact_direct = 0.0;  // (theta_p + sum one-exact) - refit
};

inline AdditiveErrors additive_error_decomposition(const Dataset& data, Index p, const DropSet& drop,
                                                   const ComputeOptions& opts = {}) {
  detail::check_coef(data, p);
  drop.validate(data.rows());
  const OlsFit full = fit(data, WeightVector::ones(data.rows()), opts);
  const Refit r = refit_without(data, drop, opts);
  if (r.ill_defined()) throw Error(ErrorCode::RankDeficient, "refit without the drop set is rank-deficient");
  const Eigen::MatrixXd& gs_inv = r.fit->gram_inverse;
  const Eigen::MatrixXd& g_inv = full.gram_inverse;

  AdditiveErrors out;
  Eigen::VectorXd amip = Eigen::VectorXd::Zero(data.cols());
  double sum_infl = 0.0, sum_one = 0.0;
  const ScoreVector infl = influence_scores(full, data, p);
  const ScoreVector one = one_exact_scores(full, data, p, opts);
  for (Index n : drop.indices) {
    const Eigen::VectorXd xr = data.design().row(n).transpose() * full.residuals[n];
    amip += xr;
    // G_{-n}^{-1} x_n = G^{-1} x_n / (1 - h_nn)
    const Eigen::VectorXd g_minus_n_x = g_inv * xr / (1.0 - full.leverages[n]);
    out.one_exact_error += gs_inv.row(p).dot(xr) - g_minus_n_x[p];
    sum_infl += infl.scores[n];
    sum_one += one.scores[n];
  }
  out.amip_error = (gs_inv.row(p) - g_inv.row(p)).dot(amip);
  const double theta = full.theta[p];
  out.amip_direct = (theta + sum_infl) - r.theta[p];
  out.one_exact_direct = (theta + sum_one) - r.theta[p];
  return out;
}

}  // namespace robaudit
