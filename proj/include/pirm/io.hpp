// Copyright 2026 The pirm-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// CSV serialization of sweep records.
//
// Columns: scenario,sigma,delta,n_parts,lambda,fairness_mode,global_risk,
// fairness,thresholds. Thresholds are ';'-joined with 12 significant digits;
// every other real is written with 17 so that it round-trips exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pirm/experiments.hpp"
#include "pirm/sem.hpp"

namespace pirm::io {

inline constexpr std::string_view kSweepCsvHeader =
    "scenario,sigma,delta,n_parts,lambda,fairness_mode,global_risk,fairness,thresholds";

inline std::string format_real(double v, int significant_digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, v);
  return buf;
}

inline std::string csv_row(const SweepRecord& r) {
  std::string row;
  row += r.scenario;
  row += ',' + format_real(r.sigma, 17);
  row += ',' + format_real(r.delta, 17);
  row += ',' + std::to_string(r.n_parts);
  row += ',' + format_real(r.lambda, 17);
  row += ',';
  row += to_string(r.fairness_mode);
  row += ',' + format_real(r.global_risk, 17);
  row += ',' + format_real(r.fairness, 17);
  row += ',';
  for (std::size_t j = 0; j < r.thresholds.size(); ++j) {
    if (j > 0) row += ';';
    row += format_real(r.thresholds[j], 12);
  }
  return row;
}

inline std::string to_csv(std::span<const SweepRecord> records) {
  std::string out(kSweepCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += csv_row(r);
    out += '\n';
  }
  return out;
}

// Writes `contents` to `path` in binary mode (no newline translation).
inline void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  os.close();
  if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_csv(std::span<const SweepRecord> records, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("write_csv: no records for '" + path.string() + "'");
  write_text_file(path, to_csv(records));
}

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_real(const std::string& s, std::string_view what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw std::invalid_argument("bad " + std::string(what) + " value '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline std::vector<SweepRecord> parse_csv(std::string_view text) {
  std::vector<SweepRecord> out;
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line != kSweepCsvHeader) {
    throw std::invalid_argument("parse_csv: missing or unexpected header");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = detail::split(line, ',');
    if (cols.size() != 9) {
      throw std::invalid_argument("parse_csv: line " + std::to_string(line_no) + " has " +
                                  std::to_string(cols.size()) + " columns");
    }
    SweepRecord r;
    r.scenario = cols[0];
    r.sigma = detail::parse_real(cols[1], "sigma");
    r.delta = detail::parse_real(cols[2], "delta");
    r.n_parts = static_cast<std::size_t>(std::stoul(cols[3]));
    r.lambda = detail::parse_real(cols[4], "lambda");
    r.fairness_mode = parse_fairness_mode(cols[5]);
    r.global_risk = detail::parse_real(cols[6], "global_risk");
    r.fairness = detail::parse_real(cols[7], "fairness");
    for (const auto& t : detail::split(cols[8], ';')) r.thresholds.push_back(detail::parse_real(t, "threshold"));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<SweepRecord> read_csv(const std::filesystem::path& path) {
  return parse_csv(read_text_file(path));
}

inline constexpr std::string_view kSemCellsCsvHeader = "method,E,e,sigma_e,subset,coefficients,mse";
inline constexpr std::string_view kSemSummaryCsvHeader =
    "method,scope,subsets,mean_mse,fairness,tolerance";

namespace detail {

inline std::string join_coefficients(const sem::FitResult& fit) {
  std::string s;
  for (std::size_t k = 0; k < fit.coefficients.size(); ++k) {
    if (k > 0) s += ';';
    s += format_real(fit.coefficients[k], 12);
  }
  return s;
}

inline const sem::FitResult& fit_for(const sem::MethodReport& m, std::size_t big_e) {
  for (const auto& [scope_e, fit] : m.fits) {
    if (scope_e == sem::kAllE || scope_e == big_e) return fit;
  }
  throw std::out_of_range("no fit covering E index " + std::to_string(big_e));
}

}  // namespace detail

// One row per (method, cell).
inline std::string sem_cells_csv(const sem::SemReport& report) {
  std::string out(kSemCellsCsvHeader);
  out += '\n';
  for (const auto& m : report.methods) {
    for (const auto& c : m.cells) {
      const auto& fit = detail::fit_for(m, c.key.big_e);
      out += m.method + ',' + std::to_string(c.key.big_e + 1) + ',' + std::to_string(c.key.small_e) +
             ',' + format_real(c.sigma_e, 17) + ',' + '"' + fit.subset.name() + '"' + ',' +
             detail::join_coefficients(fit) + ',' + format_real(c.mse, 17) + '\n';
    }
  }
  return out;
}

// One row per method.
inline std::string sem_summary_csv(const sem::SemReport& report) {
  std::string out(kSemSummaryCsvHeader);
  out += '\n';
  for (const auto& m : report.methods) {
    std::string subsets;
    for (const auto& [scope_e, fit] : m.fits) {
      if (!subsets.empty()) subsets += ';';
      if (scope_e != sem::kAllE) subsets += "E" + std::to_string(scope_e + 1) + "=";
      subsets += fit.subset.name();
    }
    out += m.method + ',' + m.scope + ',' + '"' + subsets + '"' + ',' + format_real(m.mean_mse, 17) +
           ',' + format_real(m.fairness, 17) + ',' + format_real(report.tolerance, 17) + '\n';
  }
  return out;
}

}  // namespace pirm::io
