#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robaudit/core_ols.hpp"

namespace robaudit {

/// Which sign the audit tries to reach for the chosen coefficient.
enum class Direction { ToNegative, ToPositive };

inline std::string_view to_string(Direction d) {
  return d == Direction::ToNegative ? "to-negative" : "to-positive";
}

/// Target sign reached? Zero counts as a conclusion change in either direction.
inline bool reaches_target(double value, Direction d) {
  return d == Direction::ToNegative ? value <= 0.0 : value >= 0.0;
}

/// Strictly moves the coefficient toward the target sign.
inline bool helps(double change, Direction d) {
  return d == Direction::ToNegative ? change < 0.0 : change > 0.0;
}

/// The audit direction implied by the full-data sign: aim for the opposite sign.
inline Direction opposite_of(double theta_p) {
  return theta_p > 0.0 ? Direction::ToNegative : Direction::ToPositive;
}

enum class Method { AMIP, AdditiveOneExact, GreedyAMIP, GreedyOneExact, Oracle };

inline std::string_view display_name(Method m) {
  switch (m) {
    case Method::AMIP: return "AMIP";
    case Method::AdditiveOneExact: return "Additive One-Exact";
    case Method::GreedyAMIP: return "Greedy AMIP";
    case Method::GreedyOneExact: return "Greedy One-Exact";
    case Method::Oracle: return "Oracle";
  }
  return "?";
}

/// Short CLI spelling.
inline std::string_view key(Method m) {
  switch (m) {
    case Method::AMIP: return "amip";
    case Method::AdditiveOneExact: return "add1e";
    case Method::GreedyAMIP: return "greedy-amip";
    case Method::GreedyOneExact: return "greedy-1e";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

inline std::optional<Method> method_from_key(std::string_view k) {
  for (Method m : {Method::AMIP, Method::AdditiveOneExact, Method::GreedyAMIP, Method::GreedyOneExact,
                   Method::Oracle})
    if (key(m) == k) return m;
  return std::nullopt;
}

/// A coefficient value after a refit. When the refit lost identifiability
/// `value` is the minimum-norm solution's coefficient.
struct Estimate {
  double value = 0.0;
  bool ill_defined = false;
};

enum class FailureKind { NoFailure, FailureWithoutRerun, FailureWithRerun, Robust };

inline std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::NoFailure: return "no-failure";
    case FailureKind::FailureWithoutRerun: return "failure-without-rerun";
    case FailureKind::FailureWithRerun: return "failure-with-rerun";
    case FailureKind::Robust: return "robust";
  }
  return "?";
}

/// `kind` is the most severe failure; `predicted_missed` is also set for a
/// FailureWithRerun whose prediction kept the original sign, which is
/// how an approximation fails both ways at once.
struct Classification {
  FailureKind kind = FailureKind::Robust;
  bool predicted_missed = false;
};

/// One row of a result table: what a method proposed and what refitting showed.
struct AuditReport {
  Method method = Method::AMIP;
  Index coef = 0;
  Direction direction = Direction::ToNegative;
  double full_estimate = 0.0;
  std::optional<double> predicted_estimate;  // additive methods only
  Estimate refit;
  std::vector<Index> dropped_indices;
  Index budget = 0;
  bool sign_changed = false;
  std::optional<Classification> classification;
  double runtime_seconds = 0.0;
  std::string note;

  Index dropped_count() const { return static_cast<Index>(dropped_indices.size()); }
};

}  // namespace robaudit
