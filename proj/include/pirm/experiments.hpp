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

// Partition-count and lambda sweeps over Gaussian-mixture scenarios.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pirm/envs.hpp"
#include "pirm/parallel.hpp"
#include "pirm/partition_solver.hpp"

namespace pirm {

inline const std::vector<std::size_t>& default_partition_counts() {
  static const std::vector<std::size_t> counts{1, 2, 3, 4, 6, 12, 24};
  return counts;
}

// Stable label for a (sigma, delta) pair. The four reference scenarios get
// "sep-{large|min}_overlap-{high|low}"; anything else is spelled out.
inline std::string scenario_label(double sigma, double delta) {
  const bool ref_sigma = sigma == 0.1 || sigma == 1.0;
  const bool ref_delta = delta == 0.1 || delta == 1.0;
  if (ref_sigma && ref_delta) {
    return std::string("sep-") + (sigma == 0.1 ? "large" : "min") + "_overlap-" +
           (delta == 0.1 ? "high" : "low");
  }
  std::ostringstream os;
  os.precision(12);
  os << "sigma-" << sigma << "_delta-" << delta;
  return os.str();
}

struct ScenarioConfig {
  std::string label;
  double mu1 = 1.0;
  double mu2 = 2.0;
  double sigma = 1.0;
  double delta = 0.1;
  std::size_t n_envs = 24;
  double lambda = 10.0;
  std::vector<std::size_t> partition_counts = default_partition_counts();
  FairnessMode fairness_mode = FairnessMode::assigned;
  SolveOptions solve_options{};

  EnvironmentFamily family() const { return {mu1, mu2, sigma, delta, n_envs}; }

  void validate() const {
    (void)family();
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("ScenarioConfig: lambda must be finite and >= 0");
    }
    if (partition_counts.empty()) {
      throw std::invalid_argument("ScenarioConfig: no partition counts");
    }
    for (std::size_t p : partition_counts) (void)make_partitioning(n_envs, p);
    solve_options.validate();
  }

  std::string effective_label() const {
    return label.empty() ? scenario_label(sigma, delta) : label;
  }
};

// The four (sigma, delta) combinations of the reference study, in the order
// large/min separation x high/low overlap.
inline std::vector<ScenarioConfig> reference_scenarios() {
  std::vector<ScenarioConfig> out;
  for (double delta : {0.1, 1.0}) {
    for (double sigma : {0.1, 1.0}) {
      ScenarioConfig c;
      c.sigma = sigma;
      c.delta = delta;
      c.label = scenario_label(sigma, delta);
      out.push_back(std::move(c));
    }
  }
  return out;
}

struct SweepRecord {
  std::string scenario;
  double sigma = 0.0;
  double delta = 0.0;
  std::size_t n_parts = 0;
  double lambda = 0.0;
  FairnessMode fairness_mode = FairnessMode::assigned;
  double global_risk = 0.0;
  double fairness = 0.0;
  std::vector<double> thresholds;

  bool operator==(const SweepRecord&) const = default;
};

inline SweepRecord make_record(const ScenarioConfig& config, const PirmSolution& sol) {
  return {config.effective_label(), config.sigma, config.delta, sol.partitioning.n_parts(),
          sol.lambda, sol.fairness_mode, sol.global_risk, sol.fairness, sol.thresholds};
}

inline std::vector<std::size_t> sorted_counts(std::vector<std::size_t> counts) {
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  return counts;
}

// One record per partition count, ascending.
inline std::vector<SweepRecord> run_partition_sweep(const ScenarioConfig& config,
                                                    std::size_t threads = 0) {
  config.validate();
  const EnvironmentFamily family = config.family();
  const auto counts = sorted_counts(config.partition_counts);
  std::vector<SweepRecord> out(counts.size());
  parallel_for(counts.size(), threads, [&](std::size_t k) {
    const auto sol = solve_pirm(family, make_partitioning(config.n_envs, counts[k]), config.lambda,
                                config.solve_options, config.fairness_mode);
    out[k] = make_record(config, sol);
  });
  return out;
}

inline std::vector<double> log_space(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1 || !std::isfinite(hi)) {
    throw std::invalid_argument("log_space: need 0 < lo <= hi and count >= 1");
  }
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline std::vector<double> default_lambda_grid() { return log_space(1e-3, 1e3, 25); }

// Cartesian product lambda_grid x partition_counts, ordered by
// (lambda, n_parts) ascending.
inline std::vector<SweepRecord> run_lambda_sweep(const ScenarioConfig& config,
                                                 std::vector<double> lambda_grid,
                                                 std::size_t threads = 0) {
  config.validate();
  if (lambda_grid.empty()) throw std::invalid_argument("run_lambda_sweep: empty lambda grid");
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw std::invalid_argument("run_lambda_sweep: lambda values must be finite and >= 0");
    }
  }
  std::sort(lambda_grid.begin(), lambda_grid.end());
  const EnvironmentFamily family = config.family();
  const auto counts = sorted_counts(config.partition_counts);
  std::vector<SweepRecord> out(lambda_grid.size() * counts.size());
  parallel_for(out.size(), threads, [&](std::size_t k) {
    const double lambda = lambda_grid[k / counts.size()];
    const std::size_t p = counts[k % counts.size()];
    const auto sol = solve_pirm(family, make_partitioning(config.n_envs, p), lambda,
                                config.solve_options, config.fairness_mode);
    out[k] = make_record(config, sol);
  });
  return out;
}

struct RecordAudit {
  double global_risk;
  double fairness;
};

// Recomputes (global risk, fairness) of a record from its thresholds alone.
inline RecordAudit audit_record(const SweepRecord& record, double mu1, double mu2,
                                std::size_t n_envs) {
  const EnvironmentFamily family(mu1, mu2, record.sigma, record.delta, n_envs);
  const Partitioning parts = make_partitioning(n_envs, record.n_parts);
  if (record.thresholds.size() != parts.n_parts()) {
    throw std::invalid_argument("audit_record: threshold count does not match n_parts");
  }
  std::vector<double> per_env(n_envs);
  for (std::size_t i = 0; i < n_envs; ++i) per_env[i] = record.thresholds[parts.block_of(i)];
  return {global_risk(family, per_env),
          solution_fairness(family, record.thresholds, parts, record.fairness_mode)};
}

}  // namespace pirm
