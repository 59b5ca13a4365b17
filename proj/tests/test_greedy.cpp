#include <catch_amalgamated.hpp>

#include <set>

#include "robaudit/greedy.hpp"
#include "robaudit/scenarios.hpp"
#include "support.hpp"

using namespace robaudit;

namespace {

/// Greedy by brute force: at each step try every surviving row with a full
/// long-double refit (one-exact) or the explicit influence formula (AMIP).
std::vector<Index> naive_greedy(const Dataset& d, Index p, Index k, bool one_exact) {
  std::vector<Index> dropped;
  for (Index it = 0; it < k; ++it) {
    const Eigen::VectorXd theta = testsupport::ols_without(d, dropped);
    if (theta[p] <= 0.0) break;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(d.rows());
    for (Index i : dropped) w[i] = 0.0;
    Eigen::MatrixXd g_inv;
    if (!one_exact) {
      const testsupport::MatL xl = d.design().cast<long double>();
      const testsupport::MatL g = xl.transpose() * w.cast<long double>().asDiagonal() * xl;
      g_inv = g.inverse().cast<double>();
    }
    Index best = -1;
    double best_score = 0.0;
    for (Index n = 0; n < d.rows(); ++n) {
      if (w[n] == 0.0) continue;
      double score;
      if (one_exact) {
        auto with = dropped;
        with.push_back(n);
        score = testsupport::ols_without(d, with)[p] - theta[p];
      } else {
        const double r = d.response()[n] - d.design().row(n).dot(theta);
        score = -(g_inv.row(p).dot(d.design().row(n))) * r;
      }
      if (score < best_score) {
        best_score = score;
        best = n;
      }
    }
    if (best < 0) break;
    dropped.push_back(best);
  }
  return dropped;
}

}  // namespace

TEST_CASE("greedy matches a brute-force greedy on random data", "[greedy]") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Dataset d = testsupport::random_dataset(100 + seed, 30, 2);
    const OlsFit f = fit(d, WeightVector::ones(d.rows()));
    if (f.theta[0] <= 0.0) continue;
    for (bool one_exact : {true, false}) {
      const Method m = one_exact ? Method::GreedyOneExact : Method::GreedyAMIP;
      const GreedyResult g = greedy_audit(d, 0, Index{4}, m, Direction::ToNegative);
      CHECK(g.report.dropped_indices == naive_greedy(d, 0, 4, one_exact));
    }
  }
}

TEST_CASE("greedy report is reproducible by a refit", "[greedy]") {
  const Dataset d = testsupport::random_dataset(77, 80, 3);
  const OlsFit f = fit(d, WeightVector::ones(d.rows()));
  const Direction dir = opposite_of(f.theta[1]);
  for (Method m : {Method::GreedyAMIP, Method::GreedyOneExact}) {
    const GreedyResult g = greedy_audit(d, 1, 0.1, m, dir);
    const AuditReport& r = g.report;
    CHECK(r.dropped_count() <= 8);
    CHECK_FALSE(r.predicted_estimate.has_value());
    const Refit ref = refit_without(d, DropSet{r.dropped_indices, 8});
    CHECK(testsupport::rel_err(r.refit.value, ref.theta[1]) < 1e-9);
    CHECK(r.sign_changed == reaches_target(r.refit.value, dir));
    CHECK(std::set<Index>(r.dropped_indices.begin(), r.dropped_indices.end()).size() == r.dropped_indices.size());
    CHECK(g.trace.steps.size() == r.dropped_indices.size());
    if (m == Method::GreedyOneExact) {
      // every one-exact step is an exact improvement
      double prev = r.full_estimate;
      for (const auto& step : g.trace.steps) {
        CHECK(helps(step.refit_theta_p - prev, dir));
        prev = step.refit_theta_p;
      }
    }
  }
}

TEST_CASE("greedy stops as soon as the sign flips", "[greedy]") {
  const GeneratedScenario g = generate(ScenarioId::OneOutlier, kDefaultSeed);
  const GreedyResult r = greedy_audit(g.data, 0, Index{5}, Method::GreedyOneExact, Direction::ToNegative);
  CHECK(r.trace.stopped_early);
  CHECK(r.report.dropped_indices == *g.scenario.known_set);
  CHECK(r.report.refit.value < 0.0);
}

TEST_CASE("both greedy methods recover the Simpson's black dots", "[greedy]") {
  const GeneratedScenario g = generate(ScenarioId::Simpsons, kDefaultSeed);
  for (Method m : {Method::GreedyAMIP, Method::GreedyOneExact}) {
    const GreedyResult r = greedy_audit(g.data, 0, 0.01, m, Direction::ToNegative);
    auto got = r.report.dropped_indices;
    std::sort(got.begin(), got.end());
    CHECK(got == *g.scenario.known_set);
    CHECK(r.report.sign_changed);
  }
}

TEST_CASE("Greedy AMIP cannot see the last black dot; Greedy One-Exact can", "[greedy]") {
  const GeneratedScenario g = generate(ScenarioId::GreedyAmipFail, kDefaultSeed);
  const auto& known = *g.scenario.known_set;
  auto is_black = [&](Index i) { return std::find(known.begin(), known.end(), i) != known.end(); };

  const GreedyResult amip = greedy_audit(g.data, 0, 0.01, Method::GreedyAMIP, Direction::ToNegative);
  CHECK_FALSE(amip.report.sign_changed);
  REQUIRE(amip.trace.steps.size() == 10);
  for (std::size_t i = 0; i < 9; ++i) CHECK(is_black(amip.trace.steps[i].dropped_index));
  CHECK_FALSE(is_black(amip.trace.steps[9].dropped_index));

  const GreedyResult one = greedy_audit(g.data, 0, 0.01, Method::GreedyOneExact, Direction::ToNegative);
  CHECK(one.report.sign_changed);
  CHECK(one.report.refit.ill_defined);
  CHECK(one.report.refit.value == 0.0);
  CHECK(one.trace.steps.back().refit_ill_defined);
  for (const auto& s : one.trace.steps) CHECK(is_black(s.dropped_index));
}

TEST_CASE("greedy argument checks", "[greedy]") {
  const Dataset d = testsupport::random_dataset(4, 30, 1);
  CHECK_THROWS_AS(greedy_audit(d, 0, Index{0}, Method::GreedyAMIP, Direction::ToNegative), Error);
  CHECK_THROWS_AS(greedy_audit(d, 0, Index{2}, Method::AMIP, Direction::ToNegative), Error);
  CHECK_THROWS_AS(greedy_audit(d, 0, 0.01, Method::GreedyOneExact, Direction::ToNegative), Error);
}
