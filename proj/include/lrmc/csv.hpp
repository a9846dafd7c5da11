#pragma once

// CSV serialization. Numbers use the shortest representation that
// round-trips, so output is byte-stable for identical inputs.

#include <fmt/format.h>

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lrmc/leverage.hpp"
#include "lrmc/linalg.hpp"
#include "lrmc/sampling.hpp"
#include "lrmc/solver.hpp"

namespace lrmc::csv {

inline std::string num(double v) { return fmt::format("{}", v); }

inline void write_dims(std::ostream& out, Index n1, Index n2) {
  out << "# n1=" << n1 << ",n2=" << n2 << '\n';
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  write_dims(out, m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << num(m(i, j));
    }
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline bool skip(const std::string& line) { return line.empty() || line[0] == '#'; }

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error("csv: cannot parse number '" + s + "'");
  }
  if (used != s.size()) throw Error("csv: trailing characters in '" + s + "'");
  return v;
}

}  // namespace detail

inline Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::skip(line)) continue;
    std::vector<double> row;
    for (const auto& cell : detail::split(line)) row.push_back(detail::parse_double(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error("csv: ragged matrix rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("csv: no matrix rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  require_finite(m, "csv::read_matrix");
  return m;
}

inline void write_mask(std::ostream& out, const IndexMask& mask) {
  write_dims(out, mask.rows(), mask.cols());
  out << "i,j\n";
  for (auto [i, j] : mask.members()) out << i << ',' << j << '\n';
}

inline IndexMask read_mask(std::istream& in) {
  std::string line;
  Index n1 = -1, n2 = -1;
  std::vector<std::pair<Index, Index>> pairs;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("# n1=", 0) == 0) {
      if (std::sscanf(line.c_str(), "# n1=%td,n2=%td", &n1, &n2) != 2) {
        throw Error("csv: malformed dimension line '" + line + "'");
      }
      continue;
    }
    if (detail::skip(line)) continue;
    if (!header) {
      if (line != "i,j") throw Error("csv: expected mask header 'i,j'");
      header = true;
      continue;
    }
    const auto cells = detail::split(line);
    if (cells.size() != 2) throw Error("csv: mask rows need two fields");
    pairs.emplace_back(std::stoll(cells[0]), std::stoll(cells[1]));
  }
  if (n1 <= 0 || n2 <= 0) throw Error("csv: mask file lacks '# n1=..,n2=..' line");
  return IndexMask::from_pairs(n1, n2, pairs);
}

inline void write_plan(std::ostream& out, const SamplingPlan& plan) {
  out << "# n1=" << plan.rows() << ",n2=" << plan.cols() << ",q=" << num(plan.q) << '\n';
  for (Index i = 0; i < plan.rows(); ++i) {
    for (Index j = 0; j < plan.cols(); ++j) {
      if (j) out << ',';
      out << num(plan.P(i, j));
    }
    out << '\n';
  }
}

/// Header `index,mu,nu`; the shorter vector is padded with empty fields.
inline void write_profile(std::ostream& out, const LeverageProfile& prof) {
  out << "index,mu,nu\n";
  const Index n = std::max(prof.rows(), prof.cols());
  for (Index k = 0; k < n; ++k) {
    out << k << ',';
    if (k < prof.rows()) out << num(prof.mu(k));
    out << ',';
    if (k < prof.cols()) out << num(prof.nu(k));
    out << '\n';
  }
}

inline void write_diagnostics(std::ostream& out, const Solution& sol) {
  out << "iters,residual,objective,converged\n";
  out << sol.iters << ',' << num(sol.feasibility_residual) << ',' << num(sol.objective) << ','
      << (sol.converged ? 1 : 0) << '\n';
}

}  // namespace lrmc::csv
