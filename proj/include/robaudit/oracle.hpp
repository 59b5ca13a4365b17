#pragma once

// Exact Maximum Influence Perturbation by exhaustive enumeration of every
// drop set of size <= k_max. Desk-scale ground truth for the approximations.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "robaudit/approximators.hpp"
#include "robaudit/core_ols.hpp"
#include "robaudit/parallel.hpp"
#include "robaudit/report.hpp"

namespace robaudit {

struct OracleLimits {
  double max_subsets = 5e7;
  double time_budget_seconds = std::numeric_limits<double>::infinity();
  /// Every this many subsets the downdate chain is checked against a full refit.
  Index verify_every = 100000;
};

struct OracleResult {
  DropSet best_drop;
  double best_estimate = 0.0;
  double full_estimate = 0.0;
  /// Largest change toward the target sign: theta_p(1) - theta_p(w) for ToNegative.
  double max_perturbation = 0.0;
  Direction direction = Direction::ToNegative;
  Index k_max = 0;
  double subsets_evaluated = 0.0;
  double ill_defined_subsets = 0.0;
  bool exhaustive = true;
  /// First subset (enumeration order) whose refit is rank-deficient but whose
  /// minimum-norm coefficient reaches the target sign.
  std::optional<DropSet> ill_defined_flip;
  double ill_defined_flip_estimate = 0.0;
  Index verifications = 0;
  double max_chain_error = 0.0;

  /// A subset of size <= k_max reaching the target sign exists.
  bool flip_found() const { return reaches_target(best_estimate, direction) || ill_defined_flip.has_value(); }
};

/// sum_{j=0..k} C(n, j) as a double (saturates harmlessly past 2^53).
inline double count_subsets(Index n, Index k) {
  double total = 0.0;
  double term = 1.0;
  for (Index j = 0; j <= k && j <= n; ++j) {
    total += term;
    term = term * static_cast<double>(n - j) / static_cast<double>(j + 1);
  }
  return total;
}

namespace detail {

/// Colexicographic comparison of equal-size ascending index sets.
inline bool colex_less(const std::vector<Index>& a, const std::vector<Index>& b) {
  for (std::size_t i = a.size(); i-- > 0;)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

struct OracleBest {
  double objective = -std::numeric_limits<double>::infinity();
  double estimate = 0.0;
  std::vector<Index> set;  // ascending
  bool valid = false;
};

/// Strictly better objective, or equal objective with a smaller set.
/// Same-size ties keep the incumbent, which enumeration order makes colex-first.
inline bool improves(double objective, std::size_t size, const OracleBest& best) {
  if (!best.valid) return true;
  if (objective > best.objective) return true;
  return objective == best.objective && size < best.set.size();
}

class OracleSearch {
 public:
  OracleSearch(const Dataset& data, const OlsFit& full, Index p, Index k_max, Direction d,
               const OracleLimits& limits, std::chrono::steady_clock::time_point start, const ComputeOptions& opts)
      : data_(data), full_(full), p_(p), k_max_(k_max), dir_(d), limits_(limits), start_(start), opts_(opts) {
    const Index dim = data.cols();
    for (Index j = 0; j <= k_max; ++j) {
      ginv_.emplace_back(full.gram_inverse);
      theta_.emplace_back(full.theta);
    }
    u_.resize(dim);
    set_.reserve(static_cast<std::size_t>(k_max));
  }

  /// Enumerates every subset whose largest element lies in [lo, hi).
  void run(Index lo, Index hi) {
    for (Index e = lo; e < hi && !timed_out_; ++e) visit(0, e);
  }

  OracleBest best;
  double evaluated = 0.0;
  double ill_defined = 0.0;
  std::optional<std::vector<Index>> ill_defined_flip;
  double ill_defined_flip_estimate = 0.0;
  Index verifications = 0;
  double max_chain_error = 0.0;
  bool timed_out_ = false;
  long long visits = 0;

 private:
  double objective(double estimate) const {
    const double change = estimate - full_.theta[p_];
    return dir_ == Direction::ToNegative ? -change : change;
  }

  std::vector<Index> ascending_set() const { return {set_.rbegin(), set_.rend()}; }

  WeightVector current_weights() const {
    WeightVector w = WeightVector::ones(data_.rows());
    for (Index i : set_) w.drop(i);
    return w;
  }

  void record(double estimate) {
    const double obj = objective(estimate);
    if (improves(obj, set_.size(), best)) {
      best.objective = obj;
      best.estimate = estimate;
      best.set = ascending_set();
      best.valid = true;
    }
  }

  /// Drops `e` on top of the state at `depth`, writing the state at depth + 1.
  /// Elements are added in decreasing order, so subsets of one size are
  /// visited in colex order.
  void visit(Index depth, Index e) {
    ++visits;
    if ((visits & 1023) == 0 && std::isfinite(limits_.time_budget_seconds)) {
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      if (elapsed > limits_.time_budget_seconds) {
        timed_out_ = true;
        return;
      }
    }
    set_.push_back(e);
    const std::size_t child = static_cast<std::size_t>(depth + 1);
    evaluated += 1.0;

    const auto x = data_.design().row(e);
    u_.noalias() = ginv_[child - 1] * x.transpose();
    const double gap = 1.0 - x.dot(u_);
    bool well_defined = true;
    if (gap < kHighLeverageGap) {
      well_defined = reanchor(child);
    } else {
      const double resid = data_.response()[e] - x.dot(theta_[child - 1]);
      theta_[child] = theta_[child - 1] - u_ * (resid / gap);
      ginv_[child] = ginv_[child - 1];
      ginv_[child].noalias() += (u_ / gap) * u_.transpose();
      if (limits_.verify_every > 0 && visits % limits_.verify_every == 0) verify(child);
    }

    if (well_defined) {
      record(theta_[child][p_]);
      if (depth + 1 < k_max_)
        for (Index next = 0; next < e && !timed_out_; ++next) visit(depth + 1, next);
    } else {
      // Dropping more rows cannot restore rank: the whole subtree is ill-defined.
      const double below = count_subsets(e, k_max_ - depth - 1) - 1.0;
      evaluated += below;
      ill_defined += 1.0 + below;
    }
    set_.pop_back();
  }

  /// Replaces the chained state by a fresh fit. Returns false if ill-defined.
  bool reanchor(std::size_t child) {
    const Refit r = refit(data_, current_weights(), opts_);
    if (r.ill_defined()) {
      if (!ill_defined_flip && reaches_target(r.theta[p_], dir_)) {
        ill_defined_flip = ascending_set();
        ill_defined_flip_estimate = r.theta[p_];
      }
      return false;
    }
    theta_[child] = r.fit->theta;
    ginv_[child] = r.fit->gram_inverse;
    return true;
  }

  void verify(std::size_t child) {
    ++verifications;
    const Refit r = refit(data_, current_weights(), opts_);
    if (r.ill_defined()) return;
    const double scale = std::max(1.0, std::abs(r.theta[p_]));
    const double err = std::abs(r.theta[p_] - theta_[child][p_]) / scale;
    max_chain_error = std::max(max_chain_error, err);
    if (err > 1e-8) {
      theta_[child] = r.fit->theta;
      ginv_[child] = r.fit->gram_inverse;
    }
  }

  const Dataset& data_;
  const OlsFit& full_;
  Index p_;
  Index k_max_;
  Direction dir_;
  OracleLimits limits_;
  std::chrono::steady_clock::time_point start_;
  ComputeOptions opts_;
  std::vector<Eigen::MatrixXd> ginv_;
  std::vector<Eigen::VectorXd> theta_;
  Eigen::VectorXd u_;
  std::vector<Index> set_;  // descending: set_.back() is the smallest element
};

}  // namespace detail

/// Exhaustive search over all drop sets of size <= k_max, maximizing the
/// change in theta_p toward the target sign. Each subset is evaluated by a
/// Sherman-Morrison downdate of its parent (O(P^2)); rank-destroying subsets
/// are excluded from the argmax and counted. Throws OracleInfeasible up front
/// when the subset count exceeds limits.max_subsets.
inline OracleResult brute_force_mip(const Dataset& data, Index p, Index k_max, Direction d,
                                    const OracleLimits& limits = {}, const ComputeOptions& opts = {}) {
  detail::check_coef(data, p);
  if (k_max < 0) throw Error(ErrorCode::InvalidArgument, "k_max must be non-negative");
  const Index n = data.rows();
  const double total = count_subsets(n, k_max);
  if (total > limits.max_subsets)
    throw Error(ErrorCode::OracleInfeasible, "oracle infeasible at this size (" + std::to_string(total) +
                                                 " subsets) - thin the data");

  const auto start = std::chrono::steady_clock::now();
  const OlsFit full = fit(data, WeightVector::ones(n), opts);

  OracleResult out;
  out.direction = d;
  out.k_max = k_max;
  out.full_estimate = full.theta[p];

  detail::OracleBest best;
  best.objective = 0.0;  // the empty set
  best.estimate = full.theta[p];
  best.valid = true;
  out.subsets_evaluated = 1.0;

  const unsigned workers = k_max == 0 ? 1u : std::max(1u, opts.threads);
  // Balanced split of largest-element ranges: subsets with largest element e number ~C(e, k-1).
  std::vector<Index> cuts{0};
  if (workers > 1) {
    for (unsigned w = 1; w < workers; ++w)
      cuts.push_back(static_cast<Index>(static_cast<double>(n) * std::pow(static_cast<double>(w) / workers,
                                                                        1.0 / static_cast<double>(k_max))));
  }
  cuts.push_back(k_max == 0 ? 0 : n);

  std::vector<detail::OracleSearch> searches;
  searches.reserve(cuts.size() - 1);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    searches.emplace_back(data, full, p, k_max, d, limits, start, ComputeOptions{1});
  parallel_for_ranges(searches.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) searches[i].run(cuts[i], cuts[i + 1]);
  });

  for (auto& s : searches) {
    if (s.best.valid && detail::improves(s.best.objective, s.best.set.size(), best)) best = s.best;
    out.subsets_evaluated += s.evaluated;
    out.ill_defined_subsets += s.ill_defined;
    if (!out.ill_defined_flip && s.ill_defined_flip) {
      out.ill_defined_flip = DropSet{*s.ill_defined_flip, k_max};
      out.ill_defined_flip_estimate = s.ill_defined_flip_estimate;
    }
    out.verifications += s.verifications;
    out.max_chain_error = std::max(out.max_chain_error, s.max_chain_error);
    if (s.timed_out_) out.exhaustive = false;
  }

  out.best_drop = DropSet{best.set, k_max};
  out.best_estimate = best.estimate;
  out.max_perturbation = best.objective;
  return out;
}

/// Row indices known (by construction) to flip the sign when dropped.
struct KnownSet {
  std::vector<Index> indices;
};

using GroundTruth = std::variant<OracleResult, KnownSet>;

/// Labels an audit report against ground truth about whether a
/// sign-flipping subset of size <= floor(alpha N) exists.
inline Classification failure_classify(const Dataset& data, Index p, double alpha, const AuditReport& report,
                                       const GroundTruth& truth, const ComputeOptions& opts = {}) {
  const Index k = drop_budget(alpha, data.rows());
  bool exists = false;
  if (const auto* oracle = std::get_if<OracleResult>(&truth)) {
    if (oracle->direction != report.direction)
      throw Error(ErrorCode::GroundTruthUnavailable, "oracle was run in the other direction");
    if (oracle->k_max > k)
      throw Error(ErrorCode::GroundTruthUnavailable, "oracle searched beyond the audit budget");
    exists = oracle->flip_found();
    if (!exists && (oracle->k_max < k || !oracle->exhaustive))
      throw Error(ErrorCode::GroundTruthUnavailable,
                  "oracle search was not exhaustive up to the budget; cannot rule out a flip");
  } else {
    const auto& known = std::get<KnownSet>(truth);
    if (static_cast<Index>(known.indices.size()) > k)
      throw Error(ErrorCode::GroundTruthUnavailable, "known set is larger than the drop budget");
    const Refit r = refit_without(data, DropSet{known.indices, k}, opts);
    exists = reaches_target(r.theta[p], report.direction);
    if (!exists)
      throw Error(ErrorCode::GroundTruthUnavailable, "known set does not flip the sign; no ground truth");
  }

  Classification c;
  if (!exists) {
    c.kind = FailureKind::Robust;
    return c;
  }
  const bool predicted_missed =
      report.predicted_estimate && !reaches_target(*report.predicted_estimate, report.direction);
  const bool refit_flips = !report.dropped_indices.empty() && reaches_target(report.refit.value, report.direction);
  if (!refit_flips) {
    c.kind = FailureKind::FailureWithRerun;
    c.predicted_missed = predicted_missed;
  } else if (predicted_missed) {
    c.kind = FailureKind::FailureWithoutRerun;
    c.predicted_missed = true;
  } else {
    c.kind = FailureKind::NoFailure;
  }
  return c;
}

inline AuditReport to_report(const OracleResult& o, Index p) {
  AuditReport r;
  r.method = Method::Oracle;
  r.coef = p;
  r.direction = o.direction;
  r.full_estimate = o.full_estimate;
  r.budget = o.k_max;
  if (!reaches_target(o.best_estimate, o.direction) && o.ill_defined_flip) {
    r.dropped_indices = o.ill_defined_flip->indices;
    r.refit = Estimate{o.ill_defined_flip_estimate, true};
    r.note = "only a rank-deficient drop set reaches the target sign";
  } else {
    r.dropped_indices = o.best_drop.indices;
    r.refit = Estimate{o.best_estimate, false};
  }
  r.sign_changed = o.flip_found();
  if (!o.exhaustive) r.note = "time budget exceeded; best found so far";
  return r;
}

}  // namespace robaudit
