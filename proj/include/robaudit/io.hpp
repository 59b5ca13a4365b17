#pragma once

// CSV in and out. Dialect: comma separated, header row required, '.'
// decimal point, unquoted numeric fields. Doubles are written with 17
// significant digits so a write/read round trip is bit-exact.

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "robaudit/core_ols.hpp"
#include "robaudit/diagnostics.hpp"

namespace robaudit {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows x names.size()
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parses a numeric CSV. Errors name the line (1-based, header = 1), the
/// column (1-based) and the column name.
inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> cells;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto fields = detail::split_fields(view);
    if (!have_header) {
      for (auto f : fields) {
        const std::string name(detail::trim(f));
        if (name.empty())
          throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty column name");
        t.names.push_back(name);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != t.names.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(t.names.size()) + " fields, found " +
                                             std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string_view f = detail::trim(fields[c]);
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                                               " ('" + t.names[c] + "'): non-numeric value '" + std::string(f) +
                                               "'");
      cells.push_back(v);
    }
    ++rows;
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "line 1: missing header row");
  const Index cols = static_cast<Index>(t.names.size());
  t.values.resize(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) t.values(i, j) = cells[static_cast<std::size_t>(i * cols + j)];
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open '" + path + "'");
  return read_csv(in);
}

/// Response = the target column; every other column becomes a covariate.
inline Dataset dataset_from_table(const CsvTable& t, const std::string& target, bool intercept) {
  Index target_col = -1;
  for (std::size_t j = 0; j < t.names.size(); ++j)
    if (t.names[j] == target) target_col = static_cast<Index>(j);
  if (target_col < 0) throw Error(ErrorCode::MissingColumn, "no column named '" + target + "'");
  const Index n = t.values.rows();
  const Index cols = t.values.cols();
  Eigen::MatrixXd x(n, cols - 1);
  std::vector<std::string> names;
  for (Index j = 0, k = 0; j < cols; ++j) {
    if (j == target_col) continue;
    x.col(k++) = t.values.col(j);
    names.push_back(t.names[static_cast<std::size_t>(j)]);
  }
  return Dataset::make(std::move(x), t.values.col(target_col), std::move(names), intercept);
}

/// Coefficient by column name, or by 0-based design position if `spec` is all digits.
inline Index resolve_coef(const Dataset& d, const std::string& spec) {
  if (auto idx = d.column_index(spec)) return *idx;
  if (!spec.empty() && spec.find_first_not_of("0123456789") == std::string::npos) {
    const long long k = std::stoll(spec);
    if (k < d.cols()) return static_cast<Index>(k);
  }
  throw Error(ErrorCode::MissingColumn, "no coefficient named '" + spec + "'");
}

/// Covariates (intercept column omitted) followed by the response column.
inline void write_dataset_csv(std::ostream& os, const Dataset& d, const std::string& response_name = "y") {
  const Index k = d.has_intercept() ? d.cols() - 1 : d.cols();
  for (Index j = 0; j < k; ++j) os << d.column_names()[static_cast<std::size_t>(j)] << ',';
  os << response_name << '\n';
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < k; ++j) os << format_double(d.design()(i, j)) << ',';
    os << format_double(d.response()[i]) << '\n';
  }
}

inline void write_masking_csv(std::ostream& os, const MaskingReport& r) {
  os << "index,leverage,residual,influence,one_exact\n";
  for (const auto& row : r.rows)
    os << row.index << ',' << format_double(row.leverage) << ',' << format_double(row.residual) << ','
       << format_double(row.influence) << ',' << format_double(row.one_exact) << '\n';
}

inline void write_pairs_csv(std::ostream& os, const MaskingReport& r) {
  os << "n,m,h_nm,bound\n";
  for (const auto& p : r.pairs)
    os << p.n << ',' << p.m << ',' << format_double(p.h_nm) << ',' << format_double(p.bound) << '\n';
}

/// Writes `text` to `path`, throwing IoError on failure.
inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

}  // namespace robaudit
