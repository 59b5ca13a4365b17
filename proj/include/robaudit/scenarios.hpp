#pragma once

// Seeded synthetic datasets with a known influential set.
//
// Random numbers come from "robaudit-normal-v1": std::mt19937_64 (whose
// output sequence is fixed by the standard) feeding a hand-written
// Box-Muller transform, so draws are identical across standard libraries.
// Each population draws its x and noise from its own stream, seeded by
// splitmix64(seed ^ splitmix64(stream_id)), so thinning one population does not shift
// the draws of another.

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "robaudit/core_ols.hpp"

namespace robaudit {

inline constexpr std::string_view kRngName = "robaudit-normal-v1";

/// Seed used when none is given. Under it the Simpson's and poor-conditioning
/// constructions show the approximation failures they are built to exhibit.
inline constexpr std::uint64_t kDefaultSeed = 22;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Standard normal stream. Box-Muller pairs; the second variate is cached.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

  double next() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    // 53-bit uniform in (0, 1]; the +1 keeps log away from zero.
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    cached_ = true;
    return radius * std::cos(angle);
  }

  /// Draw from N(mean, variance). The second argument is a variance.
  double normal(double mean, double variance) { return mean + std::sqrt(variance) * next(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool cached_ = false;
};

enum class ScenarioId {
  OneOutlier,
  Simpsons,
  PoorConditioning,
  Mr22Adversarial,
  GreedyAmipFail,
  BothGreedyFail,
  Prop1Example,
  Prop2Pair,
  RuntimeBench,
};

inline std::string_view to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::OneOutlier: return "one_outlier";
    case ScenarioId::Simpsons: return "simpsons";
    case ScenarioId::PoorConditioning: return "poor_conditioning";
    case ScenarioId::Mr22Adversarial: return "mr22_adversarial";
    case ScenarioId::GreedyAmipFail: return "greedy_amip_fail";
    case ScenarioId::BothGreedyFail: return "both_greedy_fail";
    case ScenarioId::Prop1Example: return "prop1_example";
    case ScenarioId::Prop2Pair: return "prop2_pair";
    case ScenarioId::RuntimeBench: return "runtime_bench";
  }
  return "?";
}

inline const std::vector<ScenarioId>& all_scenarios() {
  static const std::vector<ScenarioId> ids = {
      ScenarioId::OneOutlier,     ScenarioId::Simpsons,       ScenarioId::PoorConditioning,
      ScenarioId::Mr22Adversarial, ScenarioId::GreedyAmipFail, ScenarioId::BothGreedyFail,
      ScenarioId::Prop1Example,   ScenarioId::Prop2Pair,      ScenarioId::RuntimeBench};
  return ids;
}

/// Accepts underscores or hyphens ("prop1-example").
inline ScenarioId scenario_from_string(std::string name) {
  for (char& ch : name)
    if (ch == '-') ch = '_';
  for (ScenarioId id : all_scenarios())
    if (to_string(id) == name) return id;
  throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + name + "'");
}

/// Full-data and known-set-dropped signs of the coefficient of interest.
struct ExpectedSigns {
  int full_sign = 1;
  int dropped_sign = -1;
};

struct Scenario {
  ScenarioId id = ScenarioId::OneOutlier;
  std::map<std::string, double> params;  // overrides; missing names take defaults
  std::uint64_t seed = kDefaultSeed;
  std::optional<std::vector<Index>> known_set;  // filled by generate
  std::optional<ExpectedSigns> expected;
};

struct GeneratedScenario {
  Dataset data;
  Scenario scenario;               // echo with known_set / expected filled in
  std::map<std::string, double> resolved_params;
  Index coef = 0;                  // coefficient whose sign the construction targets
  std::uint64_t effective_seed = 0;
  int seed_bumps = 0;
  bool construction_holds = true;  // false when no bumped seed gave the advertised flip
};

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j;
  j["id"] = std::string(to_string(s.id));
  j["params"] = s.params;
  j["seed"] = s.seed;
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.id = scenario_from_string(j.at("id").get<std::string>());
    if (j.contains("params")) s.params = j.at("params").get<std::map<std::string, double>>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadParams, std::string("malformed scenario document: ") + e.what());
  }
}

namespace detail {

inline std::map<std::string, double> scenario_defaults(ScenarioId id) {
  switch (id) {
    case ScenarioId::OneOutlier: return {{"n_bulk", 1000}, {"n_outlier", 1}, {"M", 1e6}};
    case ScenarioId::Simpsons:
    case ScenarioId::PoorConditioning:
    case ScenarioId::Mr22Adversarial:
    case ScenarioId::GreedyAmipFail:
    case ScenarioId::BothGreedyFail: return {{"n_bulk", 1000}, {"n_outlier", 10}};
    case ScenarioId::Prop1Example: return {{"lambda", 1}};
    case ScenarioId::Prop2Pair: return {{"lambda", 1e4}, {"c", 1}, {"n_background", 8}};
    case ScenarioId::RuntimeBench: return {{"N", 1000}, {"P", 5}};
  }
  return {};
}

inline std::map<std::string, double> resolve_params(const Scenario& s) {
  auto out = scenario_defaults(s.id);
  for (const auto& [name, value] : s.params) {
    if (!out.count(name))
      throw Error(ErrorCode::BadParams,
                  "parameter '" + name + "' does not apply to " + std::string(to_string(s.id)));
    if (!std::isfinite(value)) throw Error(ErrorCode::BadParams, "parameter '" + name + "' is not finite");
    out[name] = value;
  }
  return out;
}

inline Index count_param(const std::map<std::string, double>& p, const std::string& name, Index min_value) {
  const double v = p.at(name);
  if (v != std::floor(v) || v < static_cast<double>(min_value) || v > 1e8)
    throw Error(ErrorCode::BadParams,
                "parameter '" + name + "' must be an integer >= " + std::to_string(min_value));
  return static_cast<Index>(v);
}

enum Stream : std::uint64_t { kBulkX = 1, kBulkNoise = 2, kOutlierX = 3, kOutlierNoise = 4, kDesign = 5 };

struct Raw {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> names;
  bool intercept = true;
  std::vector<Index> known;
  std::optional<ExpectedSigns> expected;
  Index coef = 0;
};

/// Bulk rows first, then the known-set rows.
inline Raw two_population(Index n_bulk, Index n_out, std::uint64_t seed, auto bulk, auto outlier) {
  Raw r;
  const Index n = n_bulk + n_out;
  r.x.resize(n, 1);
  r.y.resize(n);
  NormalStream bx(seed, kBulkX), be(seed, kBulkNoise), ox(seed, kOutlierX), oe(seed, kOutlierNoise);
  for (Index i = 0; i < n_bulk; ++i) bulk(bx, be, r.x(i, 0), r.y[i]);
  for (Index i = n_bulk; i < n; ++i) {
    outlier(ox, oe, r.x(i, 0), r.y[i]);
    r.known.push_back(i);
  }
  r.names = {"x"};
  return r;
}

inline Raw build(ScenarioId id, const std::map<std::string, double>& p, std::uint64_t seed) {
  using NS = NormalStream;
  switch (id) {
    case ScenarioId::OneOutlier: {
      const double m = p.at("M");
      Raw r = two_population(
          count_param(p, "n_bulk", 2), count_param(p, "n_outlier", 1), seed,
          [](NS& x, NS& e, double& xi, double& yi) {
            xi = x.normal(0, 1);
            yi = -xi + e.next();
          },
          [m](NS&, NS&, double& xi, double& yi) { xi = yi = m; });
      r.expected = ExpectedSigns{1, -1};
      return r;
    }
    case ScenarioId::Simpsons: {
      Raw r = two_population(
          count_param(p, "n_bulk", 2), count_param(p, "n_outlier", 1), seed,
          [](NS& x, NS& e, double& xi, double& yi) {
            xi = x.normal(0, 0.25);
            yi = -xi + e.next();
          },
          [](NS& x, NS& e, double& xi, double& yi) {
            xi = x.normal(25, 0.25);
            yi = -xi + 40 + e.next();
          });
      r.expected = ExpectedSigns{1, -1};
      return r;
    }
    case ScenarioId::PoorConditioning: {
      Raw r = two_population(
          count_param(p, "n_bulk", 2), count_param(p, "n_outlier", 1), seed,
          [](NS& x, NS& e, double& xi, double& yi) {
            xi = x.normal(0, 0.001);
            yi = e.next();
          },
          [](NS& x, NS& e, double& xi, double& yi) {
            xi = x.normal(-1, 0.01);
            yi = -xi - 10 + e.next();
          });
      r.expected = ExpectedSigns{1, -1};
      return r;
    }
    case ScenarioId::Mr22Adversarial:
    case ScenarioId::GreedyAmipFail:
    case ScenarioId::BothGreedyFail: {
      const double var = id == ScenarioId::BothGreedyFail ? 1e-7 : 0.01;
      const bool mr22 = id == ScenarioId::Mr22Adversarial;
      return two_population(
          count_param(p, "n_bulk", 2), count_param(p, "n_outlier", 1), seed,
          [](NS&, NS& e, double& xi, double& yi) {
            xi = 0.0;
            yi = e.next();
          },
          [var, mr22](NS& x, NS&, double& xi, double& yi) {
            xi = x.normal(-1, var);
            yi = mr22 ? xi : -5 * xi - 10;
          });
    }
    case ScenarioId::Prop1Example: {
      const double lam = p.at("lambda");
      Raw r;
      r.x.resize(3, 2);
      r.x << lam, 0, 3, 4, 5, 6;
      r.y.resize(3);
      r.y << lam, 2, 3;
      r.names = {"x1", "x2"};
      r.intercept = false;
      r.known = {0};
      r.coef = 1;
      return r;
    }
    case ScenarioId::Prop2Pair: {
      const double lam = p.at("lambda");
      const double c = p.at("c");
      const Index nb = count_param(p, "n_background", 1);
      Raw r;
      r.x.resize(nb + 2, 1);
      r.y.resize(nb + 2);
      r.x(0, 0) = lam;
      r.y[0] = lam;
      r.x(1, 0) = lam;
      r.y[1] = lam + c;
      NS bx(seed, kBulkX), be(seed, kBulkNoise);
      for (Index i = 2; i < nb + 2; ++i) {
        r.x(i, 0) = bx.next();
        r.y[i] = -r.x(i, 0) + be.next();
      }
      r.names = {"x"};
      r.intercept = false;
      r.known = {0, 1};
      return r;
    }
    case ScenarioId::RuntimeBench: {
      const Index n = count_param(p, "N", 2);
      const Index dim = count_param(p, "P", 1);
      Raw r;
      r.x.resize(n, dim);
      r.y.resize(n);
      NS dx(seed, kDesign), e(seed, kBulkNoise);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < dim; ++j) r.x(i, j) = dx.next();
        r.y[i] = r.x.row(i).sum() + e.next();
      }
      for (Index j = 0; j < dim; ++j) r.names.push_back("x" + std::to_string(j + 1));
      r.intercept = false;
      return r;
    }
  }
  throw Error(ErrorCode::UnknownScenario, "unknown scenario id");
}

/// Full fit and known-set refit land on the advertised signs.
inline bool construction_valid(const Dataset& data, const Raw& r) {
  try {
    const OlsFit f = fit(data, WeightVector::ones(data.rows()));
    const Refit dropped = refit_without(data, DropSet{r.known, static_cast<Index>(r.known.size())});
    return !dropped.ill_defined() && f.theta[r.coef] > 0.0 && dropped.theta[r.coef] < 0.0;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace detail

inline constexpr int kMaxSeedBumps = 5;

/// Deterministic in (id, params, seed). Constructions with an advertised
/// sign flip are checked; a failing seed is bumped by one, at most five
/// times. If every bump fails (parameters under which the flip cannot
/// happen, say) the requested seed is used and construction_holds is false.
inline GeneratedScenario generate(const Scenario& s) {
  const auto params = detail::resolve_params(s);
  auto finish = [&](detail::Raw raw, std::uint64_t seed, int bumps, bool holds) {
    GeneratedScenario out;
    out.data = Dataset::make(raw.x, raw.y, raw.names, raw.intercept);
    out.scenario = s;
    out.scenario.known_set = raw.known;
    out.scenario.expected = raw.expected;
    out.resolved_params = params;
    out.coef = raw.coef;
    out.effective_seed = seed;
    out.seed_bumps = bumps;
    out.construction_holds = holds;
    return out;
  };
  for (int bump = 0; bump <= kMaxSeedBumps; ++bump) {
    const std::uint64_t seed = s.seed + static_cast<std::uint64_t>(bump);
    detail::Raw raw = detail::build(s.id, params, seed);
    if (!raw.expected) return finish(std::move(raw), seed, 0, true);
    const Dataset data = Dataset::make(raw.x, raw.y, raw.names, raw.intercept);
    if (detail::construction_valid(data, raw)) return finish(std::move(raw), seed, bump, true);
  }
  return finish(detail::build(s.id, params, s.seed), s.seed, 0, false);
}

inline GeneratedScenario generate(ScenarioId id, std::uint64_t seed, std::map<std::string, double> params = {}) {
  return generate(Scenario{id, std::move(params), seed, std::nullopt, std::nullopt});
}

}  // namespace robaudit
