#pragma once

// Greedy One-Exact and Greedy AMIP: drop the single most helpful row,
// refit from scratch, rescore the survivors, repeat up to the budget.
// The loop stops as soon as a refit reaches the target sign.

#include <chrono>
#include <optional>
#include <vector>

#include "robaudit/approximators.hpp"
#include "robaudit/core_ols.hpp"
#include "robaudit/report.hpp"

namespace robaudit {

struct GreedyStep {
  Index iteration = 0;
  Index dropped_index = 0;
  double score_used = 0.0;
  double refit_theta_p = 0.0;
  bool refit_ill_defined = false;
  std::vector<Index> skipped;  // candidates whose removal was rank-deficient without reaching the target
};

struct GreedyTrace {
  Method method = Method::GreedyOneExact;
  std::vector<GreedyStep> steps;
  bool stopped_early = false;       // a refit reached the target sign
  bool ran_out_of_candidates = false;
  DropSet final_drop;
};

struct GreedyResult {
  AuditReport report;
  GreedyTrace trace;
};

namespace detail {

struct Candidate {
  Index row;
  double score;
};

/// Rows the greedy step may remove, most helpful first (ties: lowest index).
/// For one-exact, rows whose solo removal destroys identifiability are
/// scored by their minimum-norm refit; they can only ever end the search.
inline std::vector<Candidate> greedy_candidates(const Dataset& data, const OlsFit& current, Index p, Method method,
                                                Direction d, const ComputeOptions& opts) {
  const ScoreVector sv = method == Method::GreedyAMIP ? influence_scores(current, data, p)
                                                      : one_exact_scores(current, data, p, opts);
  Eigen::VectorXd scores = sv.scores;
  for (Index n : sv.ill_defined_rows) {
    WeightVector w = current.weights;
    w.drop(n);
    scores[n] = refit(data, w, opts).theta[p] - current.theta[p];
  }
  std::vector<Candidate> out;
  for (Index n : rank_helpful(scores, d)) out.push_back({n, scores[n]});
  return out;
}

}  // namespace detail

/// Greedy audit with an explicit budget k (k = floor(alpha N) in the alpha overload).
inline GreedyResult greedy_audit(const Dataset& data, Index p, Index k, Method method, Direction d,
                                 const ComputeOptions& opts = {}) {
  if (method != Method::GreedyAMIP && method != Method::GreedyOneExact)
    throw Error(ErrorCode::InvalidArgument, "greedy_audit takes GreedyAMIP or GreedyOneExact");
  if (k < 1) throw Error(ErrorCode::BudgetZero, "drop budget is zero");
  detail::check_coef(data, p);

  const auto start = std::chrono::steady_clock::now();
  OlsFit current = fit(data, WeightVector::ones(data.rows()), opts);
  const double full_theta = current.theta[p];
  detail::check_direction(full_theta, d);

  GreedyTrace trace;
  trace.method = method;
  trace.final_drop.budget = k;
  double theta_p = full_theta;
  bool last_ill_defined = false;

  for (Index it = 0; it < k; ++it) {
    const auto candidates = detail::greedy_candidates(data, current, p, method, d, opts);
    std::optional<GreedyStep> accepted;
    std::optional<OlsFit> next;
    std::vector<Index> skipped;
    for (const auto& c : candidates) {
      WeightVector w = current.weights;
      w.drop(c.row);
      Refit r = refit(data, w, opts);
      if (r.ill_defined() && !reaches_target(r.theta[p], d)) {
        skipped.push_back(c.row);
        continue;
      }
      accepted = GreedyStep{it, c.row, c.score, r.theta[p], r.ill_defined(), {}};
      if (!r.ill_defined()) next = std::move(*r.fit);
      break;
    }
    if (!accepted) {
      trace.ran_out_of_candidates = true;
      break;
    }
    accepted->skipped = std::move(skipped);
    trace.final_drop.indices.push_back(accepted->dropped_index);
    theta_p = accepted->refit_theta_p;
    last_ill_defined = accepted->refit_ill_defined;
    trace.steps.push_back(std::move(*accepted));
    if (reaches_target(theta_p, d)) {
      trace.stopped_early = true;
      break;
    }
    current = std::move(*next);
  }

  GreedyResult out;
  out.trace = trace;
  AuditReport& rep = out.report;
  rep.method = method;
  rep.coef = p;
  rep.direction = d;
  rep.full_estimate = full_theta;
  rep.refit = Estimate{theta_p, last_ill_defined};
  rep.dropped_indices = trace.final_drop.indices;
  rep.budget = k;
  rep.sign_changed = trace.stopped_early;
  if (trace.ran_out_of_candidates && !trace.stopped_early)
    rep.note = "no remaining row moves the coefficient toward the target sign";
  if (last_ill_defined) rep.note = "final refit is rank-deficient; minimum-norm coefficient reported";
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline GreedyResult greedy_audit(const Dataset& data, Index p, double alpha, Method method, Direction d,
                                 const ComputeOptions& opts = {}) {
  return greedy_audit(data, p, detail::checked_budget(alpha, data.rows()), method, d, opts);
}

}  // namespace robaudit
