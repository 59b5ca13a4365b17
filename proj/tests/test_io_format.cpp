#include <catch_amalgamated.hpp>

#include <limits>
#include <sstream>

#include "robaudit/approximators.hpp"
#include "robaudit/format.hpp"
#include "robaudit/io.hpp"
#include "robaudit/oracle.hpp"
#include "robaudit/scenarios.hpp"
#include "support.hpp"

using namespace robaudit;

namespace {

ErrorCode parse_error_of(const std::string& text, std::string* message = nullptr) {
  std::istringstream in(text);
  try {
    (void)read_csv(in);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("doubles survive a text round trip bit for bit", "[io]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("CSV parsing", "[io]") {
  std::istringstream in("a, b ,y\n1,2,3\n\n4.5,-6e-3,7\r\n");
  const CsvTable t = read_csv(in);
  CHECK(t.names == std::vector<std::string>{"a", "b", "y"});
  REQUIRE(t.values.rows() == 2);
  CHECK(t.values(1, 0) == 4.5);
  CHECK(t.values(1, 1) == -6e-3);
  CHECK(t.values(1, 2) == 7.0);
}

TEST_CASE("CSV errors locate the problem", "[io]") {
  std::string msg;
  CHECK(parse_error_of("x,y\n1,2\n3,abc\n", &msg) == ErrorCode::ParseError);
  CHECK(msg.find("line 3, column 2 ('y')") != std::string::npos);
  CHECK(parse_error_of("x,y\n1,2,3\n", &msg) == ErrorCode::ParseError);
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(parse_error_of("x,y\n1,\n") == ErrorCode::ParseError);
  CHECK(parse_error_of("x,,y\n") == ErrorCode::ParseError);
  CHECK(parse_error_of("") == ErrorCode::ParseError);
  CHECK(parse_error_of("x,y\n1,2x\n") == ErrorCode::ParseError);
  try {
    (void)read_csv_file("/nonexistent/file.csv");
    FAIL("expected FileNotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FileNotFound);
  }
}

TEST_CASE("tables become datasets", "[io]") {
  std::istringstream in("y,x1,x2\n1,0,1\n2,1,0\n3,1,1\n5,2,1\n");
  const CsvTable t = read_csv(in);
  const Dataset d = dataset_from_table(t, "y", true);
  CHECK(d.column_names() == std::vector<std::string>{"x1", "x2", kInterceptName});
  CHECK(d.response() == Eigen::Vector4d(1, 2, 3, 5));
  CHECK(d.design()(3, 0) == 2.0);
  CHECK(resolve_coef(d, "x2") == 1);
  CHECK(resolve_coef(d, "0") == 0);
  CHECK(resolve_coef(d, kInterceptName) == 2);
  CHECK_THROWS_AS(resolve_coef(d, "x9"), Error);
  CHECK_THROWS_AS(resolve_coef(d, "3"), Error);
  try {
    (void)dataset_from_table(t, "target", true);
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
  }
}

TEST_CASE("dataset CSV round trip", "[io]") {
  for (ScenarioId id : {ScenarioId::Simpsons, ScenarioId::Prop1Example, ScenarioId::RuntimeBench}) {
    const GeneratedScenario g = generate(id, 4);
    std::ostringstream os;
    write_dataset_csv(os, g.data);
    std::istringstream in(os.str());
    const Dataset back = dataset_from_table(read_csv(in), "y", g.data.has_intercept());
    CHECK(back.design() == g.data.design());
    CHECK(back.response() == g.data.response());
    CHECK(back.column_names() == g.data.column_names());
  }
}

TEST_CASE("masking exports", "[io]") {
  const Dataset d = testsupport::random_dataset(6, 12, 1);
  const OlsFit f = fit(d, WeightVector::ones(12));
  MaskingOptions mo;
  mo.top = 3;
  const MaskingReport r = masking_report(f, d, 0, mo);
  std::ostringstream rows, pairs;
  write_masking_csv(rows, r);
  write_pairs_csv(pairs, r);
  const std::string rs = rows.str(), ps = pairs.str();
  CHECK(rs.rfind("index,leverage,residual,influence,one_exact\n", 0) == 0);
  CHECK(std::count(rs.begin(), rs.end(), '\n') == 13);
  CHECK(ps.rfind("n,m,h_nm,bound\n", 0) == 0);
  CHECK(std::count(ps.begin(), ps.end(), '\n') == 4);
}

TEST_CASE("text, JSON and CSV reports agree", "[io]") {
  const GeneratedScenario g = generate(ScenarioId::OneOutlier, kDefaultSeed);
  const Dataset& d = g.data;
  const double alpha = 1.0 / static_cast<double>(d.rows());
  std::vector<AuditReport> reps;
  for (Method m : {Method::AMIP, Method::AdditiveOneExact}) {
    reps.push_back(to_report(additive_audit(d, 0, alpha, m, Direction::ToNegative)));
    reps.back().classification = failure_classify(d, 0, alpha, reps.back(), KnownSet{*g.scenario.known_set});
  }
  const AuditContext ctx{"x", d.rows(), alpha, 1, Direction::ToNegative, reps[0].full_estimate};

  std::ostringstream text;
  write_text(text, ctx, reps);
  const std::string t = text.str();
  CHECK(t.find("Method") != std::string::npos);
  CHECK(t.find("failure-with-rerun+without-rerun") != std::string::npos);
  CHECK(t.find("AMIP dropped: [") != std::string::npos);
  CHECK(t.find("Additive One-Exact dropped: [1000]") != std::string::npos);

  const nlohmann::json j = nlohmann::json::parse(to_json(ctx, reps).dump());
  REQUIRE(j["methods"].size() == 2);
  CHECK(j["methods"][0]["method"] == "amip");
  CHECK(j["methods"][1]["refit_estimate"].get<double>() == reps[1].refit.value);
  CHECK(j["methods"][1]["predicted_estimate"].get<double>() == *reps[1].predicted_estimate);
  CHECK(j["methods"][1]["dropped_indices"] == std::vector<Index>{1000});
  CHECK(j["methods"][0]["classification"] == "failure-with-rerun");
  CHECK(j["methods"][0]["predicted_missed"] == true);
  CHECK(j["budget"] == 1);

  std::ostringstream csv;
  write_csv(csv, reps);
  std::istringstream in(csv.str());
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header.rfind("method,predicted_estimate,refit_estimate,", 0) == 0);
  CHECK(row1.rfind("add1e," + format_double(*reps[1].predicted_estimate) + "," +
                       format_double(reps[1].refit.value) + ",0,1,1,no-failure,",
                   0) == 0);
  CHECK(row1.substr(row1.size() - 5) == ",1000");
}
