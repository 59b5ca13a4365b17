#pragma once

// Wall-clock comparison of the four approximate methods on runtime_bench
// data. A timed run covers scores, selection and every refit; data
// generation is excluded.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "robaudit/approximators.hpp"
#include "robaudit/greedy.hpp"
#include "robaudit/io.hpp"
#include "robaudit/scenarios.hpp"

namespace robaudit {

struct BenchGrid {
  std::vector<Index> ns;
  std::vector<Index> ps;
  double alpha = 0.01;
  std::vector<Method> methods = {Method::AMIP, Method::AdditiveOneExact, Method::GreedyAMIP,
                                 Method::GreedyOneExact};
  int repeats = 3;
  bool warmup = true;
  double time_budget_seconds = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct BenchRecord {
  Method method = Method::AMIP;
  Index n = 0;
  Index p = 0;
  double alpha = 0.0;
  double wall_seconds = 0.0;  // median over completed repeats
  int repeats = 0;
  bool timed_out = false;
  unsigned threads = 1;
  std::string fingerprint;
};

inline std::string machine_fingerprint() {
  std::string compiler =
#if defined(__clang__)
      "clang " __clang_version__;
#elif defined(__GNUC__)
      "gcc " __VERSION__;
#else
      "unknown-compiler";
#endif
  return compiler + "; hw_threads=" + std::to_string(std::thread::hardware_concurrency());
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

/// One end-to-end run of `method` on coefficient 0, aiming for a negative sign.
inline double time_method(const Dataset& data, Method method, double alpha, const ComputeOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  switch (method) {
    case Method::AMIP:
    case Method::AdditiveOneExact:
      (void)additive_audit(data, 0, alpha, method, Direction::ToNegative, opts);
      break;
    case Method::GreedyAMIP:
    case Method::GreedyOneExact:
      (void)greedy_audit(data, 0, alpha, method, Direction::ToNegative, opts);
      break;
    case Method::Oracle:
      throw Error(ErrorCode::InvalidArgument, "the oracle is not benchmarked");
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Cells run in grid order (N outer, P inner, methods in the listed order).
/// A cell whose run exceeds the time budget stops repeating and is marked.
inline std::vector<BenchRecord> run_benchmark(const BenchGrid& g) {
  if (g.repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be at least 1");
  std::vector<BenchRecord> out;
  const ComputeOptions opts{g.threads};
  const std::string fp = machine_fingerprint();
  for (Index n : g.ns) {
    for (Index p : g.ps) {
      const auto gen = generate(ScenarioId::RuntimeBench, g.seed,
                                {{"N", static_cast<double>(n)}, {"P", static_cast<double>(p)}});
      for (Method m : g.methods) {
        BenchRecord rec{m, n, p, g.alpha, 0.0, 0, false, g.threads, fp};
        if (g.warmup) (void)time_method(gen.data, m, g.alpha, opts);
        std::vector<double> times;
        for (int r = 0; r < g.repeats; ++r) {
          times.push_back(time_method(gen.data, m, g.alpha, opts));
          if (times.back() > g.time_budget_seconds) {
            rec.timed_out = true;
            break;
          }
        }
        rec.wall_seconds = median(times);
        rec.repeats = static_cast<int>(times.size());
        out.push_back(rec);
      }
    }
  }
  return out;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  os << "method,N,P,alpha,seconds,repeats\n";
  for (const auto& r : records)
    os << key(r.method) << ',' << r.n << ',' << r.p << ',' << format_double(r.alpha) << ','
       << format_double(r.wall_seconds) << ',' << r.repeats << '\n';
}

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw Error(ErrorCode::InvalidArgument, "need two or more points");
  double mx = 0.0, my = 0.0;
  const double k = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]) / k;
    my += std::log(ys[i]) / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace robaudit
