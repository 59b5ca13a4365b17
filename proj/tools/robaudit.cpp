// robaudit: audit the sign of an OLS coefficient against dropping a small
// fraction of rows, generate the synthetic constructions, export
// diagnostics, and time the methods.
//
// Exit codes: 0 ran, 2 some method found a sign-changing drop set within
// budget (audit only), 1 usage or data error.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "robaudit/robaudit.hpp"

namespace ra = robaudit;

namespace {

constexpr int kExitFlip = 2;
constexpr int kExitError = 1;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<ra::Method> parse_methods(const std::string& list) {
  std::vector<ra::Method> out;
  for (const auto& name : split_list(list)) {
    if (name == "all") {
      for (ra::Method m : {ra::Method::AMIP, ra::Method::AdditiveOneExact, ra::Method::GreedyAMIP,
                           ra::Method::GreedyOneExact, ra::Method::Oracle})
        out.push_back(m);
      continue;
    }
    const auto m = ra::method_from_key(name);
    if (!m) throw ra::Error(ra::ErrorCode::InvalidArgument, "unknown method '" + name + "'");
    out.push_back(*m);
  }
  std::vector<ra::Method> unique;
  for (ra::Method m : out)
    if (std::find(unique.begin(), unique.end(), m) == unique.end()) unique.push_back(m);
  return unique;
}

/// Writes to `path`, or stdout when empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    ra::write_file(path, text);
}

/// --threads wins over the default; ROBAUDIT_THREADS caps either.
unsigned resolve_threads(unsigned flag, unsigned fallback) {
  unsigned t = flag != 0 ? flag : fallback;
  if (const unsigned cap = ra::threads_from_env(0); cap != 0) t = std::min(t, cap);
  return std::max(1u, t);
}

unsigned hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct AuditArgs {
  std::string csv;
  std::string target;
  std::string coef;
  double alpha = 0.01;
  std::string direction = "auto";
  std::string methods = "amip,add1e,greedy-amip,greedy-1e";
  bool no_intercept = false;
  std::string format = "text";
  std::string ground_truth;
  std::string out;
  double max_subsets = 5e7;
  unsigned threads = 0;
};

int run_audit(const AuditArgs& a) {
  const ra::Dataset data = ra::dataset_from_table(ra::read_csv_file(a.csv), a.target, !a.no_intercept);
  const ra::Index p = ra::resolve_coef(data, a.coef);
  const ra::ComputeOptions opts{resolve_threads(a.threads, hardware_threads())};
  const auto methods = parse_methods(a.methods);
  if (methods.empty()) throw ra::Error(ra::ErrorCode::InvalidArgument, "no methods requested");

  const ra::Index k = ra::detail::checked_budget(a.alpha, data.rows());
  const ra::OlsFit full = ra::fit(data, ra::WeightVector::ones(data.rows()), opts);
  ra::Direction dir = ra::opposite_of(full.theta[p]);
  if (a.direction == "to-negative") dir = ra::Direction::ToNegative;
  if (a.direction == "to-positive") dir = ra::Direction::ToPositive;
  ra::detail::check_direction(full.theta[p], dir);

  std::vector<ra::AuditReport> reports;
  std::optional<ra::OracleResult> oracle;
  for (ra::Method m : methods) {
    switch (m) {
      case ra::Method::AMIP:
      case ra::Method::AdditiveOneExact: {
        const auto start = std::chrono::steady_clock::now();
        ra::AuditReport r = ra::to_report(ra::additive_audit(data, full, p, k, m, dir, opts));
        r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        reports.push_back(std::move(r));
        break;
      }
      case ra::Method::GreedyAMIP:
      case ra::Method::GreedyOneExact:
        reports.push_back(ra::greedy_audit(data, p, k, m, dir, opts).report);
        break;
      case ra::Method::Oracle: {
        const auto start = std::chrono::steady_clock::now();
        ra::OracleLimits limits;
        limits.max_subsets = a.max_subsets;
        oracle = ra::brute_force_mip(data, p, k, dir, limits, opts);
        ra::AuditReport r = ra::to_report(*oracle, p);
        r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        reports.push_back(std::move(r));
        break;
      }
    }
  }

  std::optional<ra::GroundTruth> truth;
  if (oracle && oracle->exhaustive) {
    truth = *oracle;
  } else if (!a.ground_truth.empty()) {
    std::ifstream in(a.ground_truth);
    if (!in) throw ra::Error(ra::ErrorCode::FileNotFound, "cannot open '" + a.ground_truth + "'");
    nlohmann::json j;
    try {
      in >> j;
      truth = ra::KnownSet{j.at("known_set").get<std::vector<ra::Index>>()};
    } catch (const nlohmann::json::exception& e) {
      throw ra::Error(ra::ErrorCode::ParseError, a.ground_truth + ": " + e.what());
    }
  }
  if (truth) {
    for (auto& r : reports) {
      try {
        r.classification = ra::failure_classify(data, p, a.alpha, r, *truth, opts);
      } catch (const ra::Error& e) {
        if (e.code() != ra::ErrorCode::GroundTruthUnavailable) throw;
        r.note += r.note.empty() ? e.what() : std::string("; ") + e.what();
      }
    }
  }

  const ra::AuditContext ctx{data.column_names()[static_cast<std::size_t>(p)], data.rows(), a.alpha, k, dir,
                             full.theta[p]};
  std::ostringstream os;
  if (a.format == "json")
    os << ra::to_json(ctx, reports).dump(2) << '\n';
  else if (a.format == "csv")
    ra::write_csv(os, reports);
  else
    ra::write_text(os, ctx, reports);
  emit(a.out, os.str());

  const bool flipped = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.sign_changed; });
  return flipped ? kExitFlip : 0;
}

struct GenerateArgs {
  std::string id;
  std::uint64_t seed = ra::kDefaultSeed;
  std::string out;
  std::string sidecar;
  std::vector<std::string> params;
  std::optional<double> lambda;
};

int run_generate(const GenerateArgs& a) {
  ra::Scenario s;
  s.id = ra::scenario_from_string(a.id);
  s.seed = a.seed;
  for (const auto& kv : a.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ra::Error(ra::ErrorCode::BadParams, "--param expects name=value, got '" + kv + "'");
    try {
      s.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw ra::Error(ra::ErrorCode::BadParams, "non-numeric value in --param '" + kv + "'");
    }
  }
  if (a.lambda) s.params["lambda"] = *a.lambda;
  const ra::GeneratedScenario g = ra::generate(s);

  std::ostringstream csv;
  ra::write_dataset_csv(csv, g.data);
  ra::write_file(a.out, csv.str());

  nlohmann::json side;
  side["scenario"] = ra::to_json(s);
  side["seed"] = g.effective_seed;
  side["seed_bumps"] = g.seed_bumps;
  side["construction_holds"] = g.construction_holds;
  side["known_set"] = g.scenario.known_set.value_or(std::vector<ra::Index>{});
  side["intercept"] = g.data.has_intercept();
  side["target"] = "y";
  side["coef"] = g.data.column_names()[static_cast<std::size_t>(g.coef)];
  side["rng"] = std::string(ra::kRngName);
  ra::write_file(a.sidecar.empty() ? a.out + ".json" : a.sidecar, side.dump(2) + "\n");
  return 0;
}

struct DiagnoseArgs {
  std::string csv;
  std::string target;
  std::string coef;
  bool no_intercept = false;
  std::string out;
  std::string pairs_out;
  std::string json_out;
  bool all_pairs = false;
  ra::Index top = 20;
  unsigned threads = 0;
};

int run_diagnose(const DiagnoseArgs& a) {
  const ra::Dataset data = ra::dataset_from_table(ra::read_csv_file(a.csv), a.target, !a.no_intercept);
  const ra::Index p = ra::resolve_coef(data, a.coef);
  const ra::ComputeOptions opts{resolve_threads(a.threads, hardware_threads())};
  const ra::OlsFit f = ra::fit(data, ra::WeightVector::ones(data.rows()), opts);
  ra::MaskingOptions mo;
  mo.all_pairs = a.all_pairs;
  mo.top = a.top;
  const ra::MaskingReport rep = ra::masking_report(f, data, p, mo, opts);

  std::ostringstream rows;
  ra::write_masking_csv(rows, rep);
  emit(a.out, rows.str());
  if (!a.pairs_out.empty()) {
    std::ostringstream pairs;
    ra::write_pairs_csv(pairs, rep);
    ra::write_file(a.pairs_out, pairs.str());
  }
  if (!a.json_out.empty()) ra::write_file(a.json_out, ra::to_json(rep).dump(2) + "\n");
  return 0;
}

struct BenchArgs {
  std::vector<ra::Index> ns;
  std::vector<ra::Index> ps;
  double alpha = 0.01;
  std::string methods = "amip,add1e,greedy-amip,greedy-1e";
  int repeats = 3;
  bool no_warmup = false;
  double time_budget = std::numeric_limits<double>::infinity();
  std::uint64_t seed = ra::kDefaultSeed;
  unsigned threads = 0;
  std::string out;
};

int run_bench(const BenchArgs& a) {
  ra::BenchGrid g;
  g.ns = a.ns;
  g.ps = a.ps;
  g.alpha = a.alpha;
  g.methods = parse_methods(a.methods);
  if (std::find(g.methods.begin(), g.methods.end(), ra::Method::Oracle) != g.methods.end())
    throw ra::Error(ra::ErrorCode::InvalidArgument, "the oracle is not benchmarked");
  g.repeats = a.repeats;
  g.warmup = !a.no_warmup;
  g.time_budget_seconds = a.time_budget;
  g.seed = a.seed;
  g.threads = resolve_threads(a.threads, 1);
  std::ostringstream os;
  ra::write_bench_csv(os, ra::run_benchmark(g));
  emit(a.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audit whether dropping a small fraction of rows flips an OLS coefficient's sign"};
  app.require_subcommand(1);

  AuditArgs audit;
  auto* cmd_audit = app.add_subcommand("audit", "Run drop-set audits on a CSV");
  cmd_audit->add_option("csv", audit.csv, "Input CSV (header row, numeric columns)")->required();
  cmd_audit->add_option("--target", audit.target, "Response column")->required();
  cmd_audit->add_option("--coef", audit.coef, "Coefficient: column name or 0-based design index")->required();
  cmd_audit->add_option("--alpha", audit.alpha, "Fraction of rows that may be dropped")->capture_default_str();
  cmd_audit->add_option("--direction", audit.direction, "auto, to-negative or to-positive")
      ->check(CLI::IsMember({"auto", "to-negative", "to-positive"}))
      ->capture_default_str();
  cmd_audit->add_option("--methods", audit.methods, "Comma list of amip,add1e,greedy-amip,greedy-1e,oracle or all")
      ->capture_default_str();
  cmd_audit->add_flag("--no-intercept", audit.no_intercept, "Do not append an intercept column");
  cmd_audit->add_option("--format", audit.format, "text, json or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  cmd_audit->add_option("--ground-truth", audit.ground_truth, "Sidecar JSON with a known_set for classification");
  cmd_audit->add_option("--out", audit.out, "Write the report here instead of stdout");
  cmd_audit->add_option("--oracle-max-subsets", audit.max_subsets, "Refuse oracle runs above this many subsets")
      ->capture_default_str();
  cmd_audit->add_option("--threads", audit.threads, "Worker threads (capped by ROBAUDIT_THREADS)");

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "Write a synthetic scenario as CSV plus a sidecar JSON");
  cmd_gen->add_option("id", gen.id, "Scenario id, e.g. simpsons or prop1-example")->required();
  cmd_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "Output CSV path")->required();
  cmd_gen->add_option("--sidecar", gen.sidecar, "Sidecar JSON path (default: <out>.json)");
  cmd_gen->add_option("--param", gen.params, "Parameter override name=value (repeatable)");
  cmd_gen->add_option("--lambda", gen.lambda, "Shorthand for --param lambda=<value>");

  DiagnoseArgs diag;
  auto* cmd_diag = app.add_subcommand("diagnose", "Export leverage, residual and score tables");
  cmd_diag->add_option("csv", diag.csv, "Input CSV")->required();
  cmd_diag->add_option("--target", diag.target, "Response column")->required();
  cmd_diag->add_option("--coef", diag.coef, "Coefficient: column name or 0-based design index")->required();
  cmd_diag->add_flag("--no-intercept", diag.no_intercept, "Do not append an intercept column");
  cmd_diag->add_option("--out", diag.out, "Row table CSV (default stdout)");
  cmd_diag->add_option("--pairs-out", diag.pairs_out, "Hat-pair table CSV");
  cmd_diag->add_option("--json-out", diag.json_out, "Full report as JSON");
  cmd_diag->add_flag("--all-pairs", diag.all_pairs, "Emit every pair instead of the top rows only");
  cmd_diag->add_option("--top", diag.top, "Pairs among this many rows with the largest |one_exact|")
      ->capture_default_str();
  cmd_diag->add_option("--threads", diag.threads, "Worker threads (capped by ROBAUDIT_THREADS)");

  BenchArgs bench;
  auto* cmd_bench = app.add_subcommand("benchmark", "Time the approximate methods on runtime_bench data");
  cmd_bench->add_option("--n", bench.ns, "Row counts (repeatable or comma separated)")->delimiter(',');
  cmd_bench->add_option("--p", bench.ps, "Dimensions (repeatable or comma separated)")->delimiter(',');
  cmd_bench->add_option("--alpha", bench.alpha, "Drop fraction")->capture_default_str();
  cmd_bench->add_option("--methods", bench.methods, "Comma list of methods")->capture_default_str();
  cmd_bench->add_option("--repeats", bench.repeats, "Timed repeats per cell")->capture_default_str();
  cmd_bench->add_flag("--no-warmup", bench.no_warmup, "Skip the discarded warm-up run");
  cmd_bench->add_option("--time-budget", bench.time_budget, "Seconds per run before a cell is marked timed out");
  cmd_bench->add_option("--seed", bench.seed, "Data seed")->capture_default_str();
  cmd_bench->add_option("--threads", bench.threads, "Worker threads (capped by ROBAUDIT_THREADS)");
  cmd_bench->add_option("--out", bench.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (cmd_audit->parsed()) return run_audit(audit);
    if (cmd_gen->parsed()) return run_generate(gen);
    if (cmd_diag->parsed()) return run_diagnose(diag);
    if (cmd_bench->parsed()) return run_bench(bench);
  } catch (const ra::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
