#pragma once

// Audit reports as a human table, JSON, or CSV. Machine formats carry full
// precision; the human table rounds estimates to 3 decimals.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "robaudit/io.hpp"
#include "robaudit/report.hpp"

namespace robaudit {

/// What every report in one audit run shares.
struct AuditContext {
  std::string coef_name;
  Index n = 0;
  double alpha = 0.0;
  Index budget = 0;
  Direction direction = Direction::ToNegative;
  double full_estimate = 0.0;
};

namespace detail {

inline std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string classification_text(const AuditReport& r) {
  if (!r.classification) return "";
  std::string s(to_string(r.classification->kind));
  if (r.classification->kind == FailureKind::FailureWithRerun && r.classification->predicted_missed)
    s += "+without-rerun";
  return s;
}

inline std::string indices_text(const std::vector<Index>& idx, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(idx[i]);
  }
  return s;
}

}  // namespace detail

inline void write_text(std::ostream& os, const AuditContext& c, const std::vector<AuditReport>& reports) {
  os << "coefficient " << c.coef_name << ": full-data estimate " << detail::fixed3(c.full_estimate) << " (N="
     << c.n << ", alpha=" << c.alpha << ", drop budget " << c.budget << ", " << to_string(c.direction) << ")\n";
  const std::vector<std::size_t> w = {20, 20, 22, 15, 13, 35, 10};
  const std::vector<std::string> head = {"Method",       "Predicted Estimate", "Refit Estimate", "Points Dropped",
                                         "Sign Changed", "Classification",     "Seconds"};
  std::string line;
  for (std::size_t i = 0; i < head.size(); ++i) line += detail::pad(head[i], w[i]);
  os << line << '\n';
  for (const auto& r : reports) {
    std::string refit = detail::fixed3(r.refit.value);
    if (r.refit.ill_defined) refit = "ill-defined (" + refit + ")";
    const std::vector<std::string> cells = {
        std::string(display_name(r.method)),
        r.predicted_estimate ? detail::fixed3(*r.predicted_estimate) : "---",
        refit,
        std::to_string(r.dropped_count()),
        r.sign_changed ? "yes" : "no",
        detail::classification_text(r),
        detail::fixed3(r.runtime_seconds)};
    line.clear();
    for (std::size_t i = 0; i < cells.size(); ++i) line += detail::pad(cells[i], w[i]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << '\n';
  }
  for (const auto& r : reports) {
    os << display_name(r.method) << " dropped: [" << detail::indices_text(r.dropped_indices, ", ") << "]";
    if (!r.note.empty()) os << "  (" << r.note << ")";
    os << '\n';
  }
}

inline nlohmann::json to_json(const AuditContext& c, const std::vector<AuditReport>& reports) {
  nlohmann::json j;
  j["coef"] = c.coef_name;
  j["N"] = c.n;
  j["alpha"] = c.alpha;
  j["budget"] = c.budget;
  j["direction"] = std::string(to_string(c.direction));
  j["full_estimate"] = c.full_estimate;
  j["methods"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json m;
    m["method"] = std::string(key(r.method));
    m["predicted_estimate"] = r.predicted_estimate ? nlohmann::json(*r.predicted_estimate) : nlohmann::json(nullptr);
    m["refit_estimate"] = r.refit.value;
    m["refit_ill_defined"] = r.refit.ill_defined;
    m["dropped_indices"] = r.dropped_indices;
    m["dropped_count"] = r.dropped_count();
    m["sign_changed"] = r.sign_changed;
    if (r.classification) {
      m["classification"] = std::string(to_string(r.classification->kind));
      m["predicted_missed"] = r.classification->predicted_missed;
    } else {
      m["classification"] = nullptr;
    }
    m["runtime_seconds"] = r.runtime_seconds;
    if (!r.note.empty()) m["note"] = r.note;
    j["methods"].push_back(std::move(m));
  }
  return j;
}

inline void write_csv(std::ostream& os, const std::vector<AuditReport>& reports) {
  os << "method,predicted_estimate,refit_estimate,refit_ill_defined,dropped_count,sign_changed,classification,"
        "runtime_seconds,dropped_indices\n";
  for (const auto& r : reports) {
    os << key(r.method) << ',' << (r.predicted_estimate ? format_double(*r.predicted_estimate) : "") << ','
       << format_double(r.refit.value) << ',' << (r.refit.ill_defined ? 1 : 0) << ',' << r.dropped_count() << ','
       << (r.sign_changed ? 1 : 0) << ',' << detail::classification_text(r) << ','
       << format_double(r.runtime_seconds) << ',' << detail::indices_text(r.dropped_indices, " ") << '\n';
  }
}

}  // namespace robaudit
