#include <catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "robaudit/diagnostics.hpp"
#include "robaudit/benchmark.hpp"
#include "support.hpp"

using namespace robaudit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Example1 {
  Eigen::MatrixXd x = Eigen::MatrixXd(2, 2);
  Eigen::VectorXd y = Eigen::VectorXd(2);
  Eigen::VectorXd v = Eigen::VectorXd(2);
  Example1() {
    x << 3, 4, 5, 6;
    y << 2, 3;
    v << 1, 0;
  }
};

}  // namespace

TEST_CASE("hat pairs respect the Cauchy-Schwarz bound", "[diagnostics]") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = testsupport::random_dataset(seed, 25, 1 + static_cast<Index>(seed % 4));
    const OlsFit f = fit(d, WeightVector::ones(d.rows()));
    MaskingOptions mo;
    mo.all_pairs = true;
    const MaskingReport r = masking_report(f, d, 0, mo);
    CHECK(r.pairs.size() == 25u * 24u / 2u);
    const Eigen::MatrixXd h = testsupport::hat_matrix(d.design());
    for (const HatPair& p : r.pairs) {
      CHECK(p.n < p.m);
      CHECK_THAT(p.h_nm, WithinAbs(h(p.n, p.m), 1e-12));
      CHECK(std::abs(p.h_nm) <= p.bound + 1e-10);
    }
  }
}

TEST_CASE("parallel rows attain the bound", "[diagnostics]") {
  Eigen::MatrixXd x(5, 1);
  x << 1, 2, 2, -1, 3;
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  const Dataset d = Dataset::make(x, y, {"x"}, false);
  const OlsFit f = fit(d, WeightVector::ones(5));
  MaskingOptions mo;
  mo.pairs = std::vector<std::pair<Index, Index>>{{2, 1}, {0, 3}};
  const MaskingReport r = masking_report(f, d, 0, mo);
  REQUIRE(r.pairs.size() == 2);
  CHECK(r.pairs[0].n == 0);
  CHECK(r.pairs[0].m == 3);
  CHECK_THAT(std::abs(r.pairs[0].h_nm), WithinRel(r.pairs[0].bound, 1e-12));
  CHECK_THAT(r.pairs[1].h_nm, WithinRel(r.pairs[1].bound, 1e-12));
  mo.pairs = std::vector<std::pair<Index, Index>>{{0, 9}};
  CHECK_THROWS_AS(masking_report(f, d, 0, mo), Error);
}

TEST_CASE("masking rows carry leverage, residual and both scores", "[diagnostics]") {
  const Dataset d = testsupport::random_dataset(21, 40, 2);
  const OlsFit f = fit(d, WeightVector::ones(40));
  const MaskingReport r = masking_report(f, d, 1);
  REQUIRE(r.rows.size() == 40);
  CHECK(r.pairs.size() == 20u * 19u / 2u);
  const ScoreVector infl = influence_scores(f, d, 1);
  for (const MaskingRow& row : r.rows) {
    CHECK(row.leverage == f.leverages[row.index]);
    CHECK(row.residual == f.residuals[row.index]);
    CHECK(row.influence == infl.scores[row.index]);
    const double exact = testsupport::ols_without(d, {row.index})[1] - f.theta[1];
    CHECK_THAT(row.one_exact, WithinAbs(exact, 1e-10));
  }
  const nlohmann::json j = to_json(r);
  CHECK(j["rows"].size() == 40);
  CHECK(j["pairs"].size() == r.pairs.size());
}

TEST_CASE("known rows out-lever the bulk in the failure scenarios", "[diagnostics]") {
  for (ScenarioId id : {ScenarioId::OneOutlier, ScenarioId::Simpsons, ScenarioId::PoorConditioning,
                        ScenarioId::Mr22Adversarial, ScenarioId::GreedyAmipFail, ScenarioId::BothGreedyFail}) {
    const GeneratedScenario g = generate(id, kDefaultSeed);
    const OlsFit f = fit(g.data, WeightVector::ones(g.data.rows()));
    const auto& known = *g.scenario.known_set;
    const Index n_bulk = known.front();
    const double bulk_max = f.leverages.head(n_bulk).maxCoeff();
    for (Index k : known) CHECK(f.leverages[k] > bulk_max);
  }
}

TEST_CASE("Example 1 limit quantities are exact", "[diagnostics]") {
  const Example1 e;
  const Prop1Limits l = prop1_limits(e.x, e.y, e.v, 1.0, 0, 1);
  CHECK_THAT(l.s, WithinAbs(1.0, 1e-12));
  CHECK_THAT(l.t, WithinAbs(3.0, 1e-12));
  CHECK_THAT(l.vAv * l.vAv, WithinAbs(169.0, 1e-10));
  CHECK_THAT(l.limit_value, WithinAbs(3.0 / 169.0, 1e-12));
  Eigen::Matrix2d a;
  a << 34, 42, 42, 52;
  CHECK(l.A_minus_1 == a);
}

TEST_CASE("closed forms match the library's scores", "[diagnostics]") {
  const Example1 e;
  const Prop1Limits l = prop1_limits(e.x, e.y, e.v, 1.0, 0, 1);
  for (double lambda : {3.0, 10.0, 100.0, 1e3}) {
    const Dataset d = with_outlier(e.x, e.y, e.v, 1.0, lambda);
    const OlsFit f = fit(d, WeightVector::ones(3));
    const ScoreVector s = influence_scores(f, d, 1);
    CHECK_THAT(-s.scores[0], WithinRel(outlier_influence_closed_form(l, lambda), 1e-7));
    CHECK_THAT(-s.scores[1], WithinRel(probe_influence_closed_form(l, lambda), 1e-9));
  }

  // a random background with P = 3 and an oblique v
  const Dataset bg = testsupport::random_dataset(31, 30, 3, false);
  Eigen::VectorXd v(3);
  v << 1, -2, 2;
  v.normalize();
  const Prop1Limits r = prop1_limits(bg.design(), bg.response(), v, 0.7, 4, 2);
  for (double lambda : {2.0, 20.0, 200.0}) {
    const Dataset d = with_outlier(bg.design(), bg.response(), v, 0.7, lambda);
    const OlsFit f = fit(d, WeightVector::ones(d.rows()));
    const ScoreVector s = influence_scores(f, d, 2);
    CHECK_THAT(-s.scores[0], WithinRel(outlier_influence_closed_form(r, lambda), 1e-7));
    CHECK_THAT(-s.scores[5], WithinRel(probe_influence_closed_form(r, lambda), 1e-7));
  }
  CHECK_THAT(probe_influence_closed_form(r, 1e7), WithinRel(r.limit_value, 1e-6));
}

TEST_CASE("outlier influence decays like lambda^-2", "[diagnostics]") {
  const Example1 e;
  const Prop1Limits l = prop1_limits(e.x, e.y, e.v, 1.0, 0, 1);
  std::vector<double> lambdas, closed, numeric;
  for (double lambda : {1e2, 1e3, 1e4, 1e5, 1e6}) {
    lambdas.push_back(lambda);
    closed.push_back(std::abs(outlier_influence_closed_form(l, lambda)));
    const Dataset d = with_outlier(e.x, e.y, e.v, 1.0, lambda);
    numeric.push_back(std::abs(influence_scores(fit(d, WeightVector::ones(3)), d, 1).scores[0]));
  }
  CHECK_THAT(loglog_slope(lambdas, closed), WithinAbs(-2.0, 1e-3));
  CHECK_THAT(loglog_slope(lambdas, numeric), WithinAbs(-2.0, 0.1));
}

TEST_CASE("a single covariate has s = 0", "[diagnostics]") {
  const Dataset bg = testsupport::random_dataset(5, 20, 1, false);
  Eigen::VectorXd v(1);
  v << -1;
  for (Index probe : {0, 7, 19}) {
    const Prop1Limits l = prop1_limits(bg.design(), bg.response(), v, 2.0, probe, 0);
    CHECK(std::abs(l.s) < 1e-15);
    CHECK(std::abs(l.limit_value) < 1e-15);
  }
}

TEST_CASE("limit quantities reject bad input", "[diagnostics]") {
  const Example1 e;
  Eigen::MatrixXd flat(3, 2);
  flat << 1, 2, 2, 4, 3, 6;
  const Eigen::Vector3d y(1, 2, 3);
  try {
    (void)prop1_limits(flat, y, e.v, 1.0, 0, 1);
    FAIL("expected RankDeficientBackground");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::RankDeficientBackground);
  }
  CHECK_THROWS_AS(prop1_limits(e.x, e.y, Eigen::Vector2d(1, 1), 1.0, 0, 1), Error);
  CHECK_THROWS_AS(prop1_limits(e.x, e.y, e.v, 0.0, 0, 1), Error);
  CHECK_THROWS_AS(prop1_limits(e.x, e.y, e.v, 1.0, 2, 1), Error);
}

TEST_CASE("additive error formulas match predicted minus refit", "[diagnostics]") {
  const Dataset d = testsupport::random_dataset(17, 40, 3);
  const AdditiveErrors none = additive_error_decomposition(d, 1, DropSet{{}, 0});
  CHECK(none.amip_error == 0.0);
  CHECK(std::abs(none.one_exact_direct) < 1e-12);

  const AdditiveErrors single = additive_error_decomposition(d, 1, DropSet{{6}, 1});
  CHECK(std::abs(single.one_exact_error) < 1e-12);
  CHECK(std::abs(single.one_exact_direct) < 1e-12);
  CHECK_THAT(single.amip_error, WithinAbs(single.amip_direct, 1e-10));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Index> idx(40);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(1 + static_cast<std::size_t>(trial % 5));
    const AdditiveErrors e = additive_error_decomposition(d, trial % 4, DropSet{idx, 5});
    CHECK_THAT(e.amip_error, WithinAbs(e.amip_direct, 1e-8));
    CHECK_THAT(e.one_exact_error, WithinAbs(e.one_exact_direct, 1e-8));
  }

  const GeneratedScenario g = generate(ScenarioId::GreedyAmipFail, kDefaultSeed);
  CHECK_THROWS_AS(additive_error_decomposition(g.data, 0, DropSet{*g.scenario.known_set, 10}), Error);
}

TEST_CASE("s and t stay away from zero in random draws", "[diagnostics]") {
  const StSimulation a = st_simulation(3, 20, 1, 200);
  CHECK(a.draws == 20);
  CHECK(a.zero_s == 0);
  CHECK(a.zero_t == 0);
  CHECK(a.min_abs_s > 1e-12);
  const StSimulation b = st_simulation(3, 20, 1, 200);
  CHECK(a.min_abs_s == b.min_abs_s);
  CHECK(a.min_abs_t == b.min_abs_t);
}
