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

// Partial invariant risk minimization over contiguous environment blocks.
//
// Every block of a Partitioning gets one threshold, chosen to minimize the
// IRMv1 objective
//
//   sum_{i in block} R_i(t) + lambda * (dR_i/dt)^2
//
// by a dense grid scan followed by golden-section refinement of every
// near-optimal grid cell. One block is plain IRM, one block per environment
// is ERM (lambda is switched off for singleton blocks).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pirm/envs.hpp"
#include "pirm/golden.hpp"

namespace pirm {

class DivisibilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Contiguous equal-size blocks: block j owns [j*m, (j+1)*m - 1].
class Partitioning {
 public:
  Partitioning(std::size_t n_envs, std::size_t n_parts) : n_envs_(n_envs), n_parts_(n_parts) {
    if (n_envs < 1 || n_parts < 1) {
      throw std::invalid_argument("Partitioning: n_envs and n_parts must be >= 1");
    }
    if (n_envs % n_parts != 0) {
      throw DivisibilityError("Partitioning: " + std::to_string(n_parts) +
                              " partitions do not divide " + std::to_string(n_envs) +
                              " environments");
    }
    block_size_ = n_envs / n_parts;
  }

  std::size_t n_envs() const { return n_envs_; }
  std::size_t n_parts() const { return n_parts_; }
  std::size_t block_size() const { return block_size_; }

  std::size_t first(std::size_t j) const { return check_block(j) * block_size_; }
  std::size_t last(std::size_t j) const { return first(j) + block_size_ - 1; }

  std::vector<std::size_t> block(std::size_t j) const {
    std::vector<std::size_t> idx(block_size_);
    std::iota(idx.begin(), idx.end(), first(j));
    return idx;
  }

  std::size_t block_of(std::size_t env) const {
    if (env >= n_envs_) throw std::out_of_range("Partitioning: environment index out of range");
    return env / block_size_;
  }

  bool operator==(const Partitioning&) const = default;

 private:
  std::size_t check_block(std::size_t j) const {
    if (j >= n_parts_) throw std::out_of_range("Partitioning: block index out of range");
    return j;
  }

  std::size_t n_envs_;
  std::size_t n_parts_;
  std::size_t block_size_ = 1;
};

inline Partitioning make_partitioning(std::size_t n_envs, std::size_t n_parts) {
  return Partitioning(n_envs, n_parts);
}

struct SearchInterval {
  double lo;
  double hi;
};

struct SolveOptions {
  // Unset: [m1(first) - 6 sigma, m2(last) + 6 sigma] of the block being solved.
  std::optional<SearchInterval> search;
  std::size_t grid_points = 4001;
  double refine_tol = 1e-9;

  void validate() const {
    if (search && !(search->lo < search->hi && std::isfinite(search->lo) &&
                    std::isfinite(search->hi))) {
      throw std::invalid_argument("SolveOptions: degenerate search interval");
    }
    if (grid_points < 3) throw std::invalid_argument("SolveOptions: grid_points must be >= 3");
    if (!(refine_tol > 0.0)) throw std::invalid_argument("SolveOptions: refine_tol must be > 0");
  }
};

inline constexpr double kSearchMarginSigmas = 6.0;

inline SearchInterval default_search_interval(const EnvironmentFamily& family,
                                              std::span<const std::size_t> env_indices) {
  if (env_indices.empty()) throw std::invalid_argument("default_search_interval: empty block");
  const auto [lo_it, hi_it] = std::minmax_element(env_indices.begin(), env_indices.end());
  const double margin = kSearchMarginSigmas * family.sigma();
  return {class_means(family, *lo_it).m1 - margin, class_means(family, *hi_it).m2 + margin};
}

inline double irmv1_objective(const EnvironmentFamily& family,
                              std::span<const std::size_t> env_indices, double t,
                              double lambda) {
  if (env_indices.empty()) throw std::invalid_argument("irmv1_objective: empty environment set");
  if (!(lambda >= 0.0)) throw std::invalid_argument("irmv1_objective: lambda must be >= 0");
  double value = 0.0;
  for (std::size_t i : env_indices) {
    const double g = env_risk_deriv(family, i, t);
    value += env_risk(family, i, t) + lambda * g * g;
  }
  return value;
}

namespace detail {

// Values within this relative distance of the best one are treated as ties.
inline constexpr double kTieRelTol = 1e-12;
// Grid local minima within this relative distance of the grid minimum are refined.
inline constexpr double kCandidateRelSlack = 1e-3;
inline constexpr std::size_t kMaxCandidates = 256;

inline double tie_tolerance(double v) { return kTieRelTol * std::max(1.0, std::abs(v)); }

}  // namespace detail

// Threshold minimizing irmv1_objective over the search interval. Deterministic;
// among (numerically) tied minima the smallest threshold is returned.
inline double solve_threshold(const EnvironmentFamily& family,
                              std::span<const std::size_t> env_indices, double lambda,
                              const SolveOptions& opts = {}) {
  opts.validate();
  if (env_indices.empty()) throw std::invalid_argument("solve_threshold: empty environment set");
  if (!(lambda >= 0.0)) throw std::invalid_argument("solve_threshold: lambda must be >= 0");
  const SearchInterval range = opts.search.value_or(default_search_interval(family, env_indices));

  auto objective = [&](double t) { return irmv1_objective(family, env_indices, t, lambda); };

  const std::size_t n = opts.grid_points;
  const double h = (range.hi - range.lo) / static_cast<double>(n - 1);
  auto grid_at = [&](std::size_t k) {
    return k + 1 == n ? range.hi : range.lo + static_cast<double>(k) * h;
  };

  std::vector<double> values(n);
  for (std::size_t k = 0; k < n; ++k) values[k] = objective(grid_at(k));
  const double vmin = *std::min_element(values.begin(), values.end());
  const double slack = detail::kCandidateRelSlack * std::max(1.0, std::abs(vmin));

  // Grid local minima; a flat run counts once, at its first point.
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < n; ++k) {
    if (values[k] > vmin + slack) continue;
    if (k > 0 && values[k - 1] <= values[k]) continue;
    std::size_t r = k;
    while (r + 1 < n && values[r + 1] == values[k]) ++r;
    if (r + 1 < n && values[r + 1] < values[k]) continue;
    candidates.push_back(k);
  }
  if (candidates.size() > detail::kMaxCandidates) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    candidates.resize(detail::kMaxCandidates);
    std::sort(candidates.begin(), candidates.end());
  }

  std::vector<Minimum<double>> refined;
  refined.reserve(candidates.size());
  for (std::size_t k : candidates) {
    const double a = grid_at(k == 0 ? 0 : k - 1);
    const double b = grid_at(std::min(k + 1, n - 1));
    Minimum<double> best{grid_at(k), values[k]};
    const Minimum<double> m = golden_section_minimize(objective, a, b, opts.refine_tol);
    if (m.fx < best.fx || (m.fx == best.fx && m.x < best.x)) best = m;
    refined.push_back(best);
  }

  double vbest = vmin;
  for (const auto& m : refined) vbest = std::min(vbest, m.fx);
  const double tol = detail::tie_tolerance(vbest);
  std::optional<double> choice;
  for (const auto& m : refined) {
    if (m.fx <= vbest + tol && (!choice || m.x < *choice)) choice = m.x;
  }
  // Flat optimal plateaus: the leftmost grid point on the plateau wins.
  for (std::size_t k = 0; k < n; ++k) {
    if (values[k] <= vbest + tol) {
      if (grid_at(k) < *choice) choice = grid_at(k);
      break;
    }
  }
  return *choice;
}

enum class FairnessMode { assigned, per_threshold_global };

inline std::string_view to_string(FairnessMode mode) {
  return mode == FairnessMode::assigned ? "assigned" : "per-threshold-global";
}

inline FairnessMode parse_fairness_mode(std::string_view text) {
  if (text == "assigned") return FairnessMode::assigned;
  if (text == "per-threshold-global" || text == "per_threshold_global") {
    return FairnessMode::per_threshold_global;
  }
  throw std::invalid_argument("unknown fairness mode '" + std::string(text) + "'");
}

struct PirmSolution {
  Partitioning partitioning;
  double lambda = 0.0;            // as requested
  double effective_lambda = 0.0;  // 0 when blocks are singletons
  FairnessMode fairness_mode = FairnessMode::assigned;
  std::vector<double> thresholds;  // one per block
  RiskVector env_risks;            // each environment at its block's threshold
  double global_risk = 0.0;
  double fairness = 0.0;

  // Threshold used for each environment.
  std::vector<double> assigned_thresholds() const {
    std::vector<double> out(partitioning.n_envs());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = thresholds[partitioning.block_of(i)];
    return out;
  }
};

// Fairness of a multi-threshold solution.
//
// assigned: variance of the risks each environment sees under its own block's
// threshold. per_threshold_global: mean over blocks of F_V(t_j) with t_j
// applied to every environment.
inline double solution_fairness(const EnvironmentFamily& family,
                                std::span<const double> block_thresholds,
                                const Partitioning& partitioning, FairnessMode mode) {
  if (block_thresholds.size() != partitioning.n_parts()) {
    throw std::invalid_argument("solution_fairness: threshold count does not match partitioning");
  }
  if (mode == FairnessMode::assigned) {
    std::vector<double> per_env(partitioning.n_envs());
    for (std::size_t i = 0; i < per_env.size(); ++i) {
      per_env[i] = block_thresholds[partitioning.block_of(i)];
    }
    return fairness_vrex(env_risks(family, per_env));
  }
  double sum = 0.0;
  for (double t : block_thresholds) sum += fairness_vrex(env_risks(family, t));
  return sum / static_cast<double>(block_thresholds.size());
}

inline PirmSolution solve_pirm(const EnvironmentFamily& family, const Partitioning& partitioning,
                               double lambda, const SolveOptions& opts = {},
                               FairnessMode mode = FairnessMode::assigned) {
  if (family.n_envs() != partitioning.n_envs()) {
    throw std::invalid_argument("solve_pirm: family has " + std::to_string(family.n_envs()) +
                                " environments, partitioning has " +
                                std::to_string(partitioning.n_envs()));
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("solve_pirm: lambda must be >= 0");

  PirmSolution sol{partitioning};
  sol.lambda = lambda;
  sol.effective_lambda = partitioning.block_size() == 1 ? 0.0 : lambda;
  sol.fairness_mode = mode;
  sol.thresholds.resize(partitioning.n_parts());
  for (std::size_t j = 0; j < partitioning.n_parts(); ++j) {
    const std::vector<std::size_t> idx = partitioning.block(j);
    sol.thresholds[j] = solve_threshold(family, idx, sol.effective_lambda, opts);
  }
  sol.env_risks = env_risks(family, sol.assigned_thresholds());
  sol.global_risk = mean_of(sol.env_risks);
  sol.fairness = solution_fairness(family, sol.thresholds, partitioning, mode);
  return sol;
}

}  // namespace pirm
