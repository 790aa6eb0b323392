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

// Linear structural-equation experiment with two environment variables.
//
// For every cell (E, e), with s = sigma(e):
//   X1 ~ N(0, s^2),  X2 ~ N(0, s^2)
//   Y  = X1 + f(E) * X2 + N(0, s^2)
//   X3 = Y + N(0, 1)
//
// X1 has an invariant coefficient across all cells, X2 only within a fixed E,
// and X3 (an effect of Y) never. Invariant feature sets are found by
// enumerating the seven non-empty subsets of {X1, X2, X3} and thresholding an
// IRMv1-style gradient penalty of the pooled least-squares fit.

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pirm/envs.hpp"
#include "pirm/parallel.hpp"

namespace pirm::sem {

inline constexpr std::size_t kNumE = 3;
inline constexpr std::size_t kNumFeatures = 3;

struct SemScenario {
  std::vector<double> sigma_e{0.2, 1.0, 2.0};
  std::array<double, kNumE> f_values{1.0, 2.0, 3.0};
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;

  void validate() const {
    if (sigma_e.empty()) throw std::invalid_argument("SemScenario: sigma_e is empty");
    for (double s : sigma_e) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw std::invalid_argument("SemScenario: sigma_e entries must be finite and >= 0");
      }
    }
    for (double f : f_values) {
      if (!std::isfinite(f)) throw std::invalid_argument("SemScenario: f values must be finite");
    }
    if (n_samples < 1) throw std::invalid_argument("SemScenario: n_samples must be >= 1");
  }
};

// Cell coordinates; big_e in [0, 3) stands for E = big_e + 1.
struct CellKey {
  std::size_t big_e = 0;
  std::size_t small_e = 0;
  auto operator<=>(const CellKey&) const = default;
};

inline std::string to_string(CellKey k) {
  return "(E=" + std::to_string(k.big_e + 1) + ",e=" + std::to_string(k.small_e) + ")";
}

struct SemCell {
  std::vector<double> x1, x2, x3, y;

  std::size_t size() const { return y.size(); }
  double feature(std::size_t j, std::size_t row) const {
    switch (j) {
      case 0: return x1[row];
      case 1: return x2[row];
      default: return x3[row];
    }
  }
};

struct SemDataset {
  SemScenario scenario;
  std::map<CellKey, SemCell> cells;

  const SemCell& cell(CellKey k) const {
    const auto it = cells.find(k);
    if (it == cells.end()) throw std::out_of_range("SemDataset: no cell " + to_string(k));
    return it->second;
  }
  std::vector<CellKey> keys() const {
    std::vector<CellKey> out;
    out.reserve(cells.size());
    for (const auto& [k, c] : cells) out.push_back(k);
    return out;
  }
};

// Bit set over {X1, X2, X3}: bit j selects feature X(j+1).
class FeatureSubset {
 public:
  constexpr FeatureSubset() = default;
  constexpr explicit FeatureSubset(unsigned mask) : mask_(mask) {
    if (mask == 0 || mask > 7) throw std::invalid_argument("FeatureSubset: mask must be in 1..7");
  }
  static constexpr FeatureSubset of(std::initializer_list<int> features) {
    unsigned m = 0;
    for (int f : features) {
      if (f < 1 || f > 3) throw std::invalid_argument("FeatureSubset: features are 1, 2, 3");
      m |= 1u << (f - 1);
    }
    return FeatureSubset(m);
  }

  constexpr unsigned mask() const { return mask_; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(mask_)); }
  constexpr bool contains(std::size_t j) const { return (mask_ >> j) & 1u; }
  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (contains(j)) out.push_back(j);
    }
    return out;
  }
  std::string name() const {
    std::string s = "{";
    for (std::size_t j : indices()) {
      if (s.size() > 1) s += ",";
      s += "X" + std::to_string(j + 1);
    }
    return s + "}";
  }
  constexpr auto operator<=>(const FeatureSubset&) const = default;

 private:
  unsigned mask_ = 1;
};

// All seven non-empty subsets ordered by size, then lexicographically.
inline std::vector<FeatureSubset> all_subsets() {
  return {FeatureSubset(0b001), FeatureSubset(0b010), FeatureSubset(0b100), FeatureSubset(0b011),
          FeatureSubset(0b101), FeatureSubset(0b110), FeatureSubset(0b111)};
}

struct FitResult {
  FeatureSubset subset;
  std::vector<double> coefficients;  // one per selected feature, in X1..X3 order
  double pooled_mse = 0.0;
  double invariance_penalty = 0.0;

  // Coefficients expanded to all three features (zeros where unselected).
  std::array<double, kNumFeatures> full_coefficients() const {
    std::array<double, kNumFeatures> w{};
    const auto idx = subset.indices();
    for (std::size_t k = 0; k < idx.size(); ++k) w[idx[k]] = coefficients[k];
    return w;
  }
};

class SingularFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoInvariantSubsetError : public std::runtime_error {
 public:
  NoInvariantSubsetError(std::map<FeatureSubset, double> penalties, double tol)
      : std::runtime_error(describe(penalties, tol)), penalties_(std::move(penalties)) {}
  const std::map<FeatureSubset, double>& penalties() const { return penalties_; }

 private:
  static std::string describe(const std::map<FeatureSubset, double>& p, double tol) {
    std::string s = "no invariant subset below tolerance " + std::to_string(tol) + ":";
    for (const auto& [subset, v] : p) s += " " + subset.name() + "=" + std::to_string(v);
    return s;
  }
  std::map<FeatureSubset, double> penalties_;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t cell_seed(std::uint64_t seed, CellKey k) {
  return splitmix64(splitmix64(splitmix64(seed) ^ (k.big_e + 1)) ^ (k.small_e + 0x100));
}

}  // namespace detail

inline SemCell generate_cell(const SemScenario& scenario, CellKey key) {
  const double s = scenario.sigma_e.at(key.small_e);
  const double f = scenario.f_values.at(key.big_e);
  std::mt19937_64 rng(detail::cell_seed(scenario.seed, key));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = scenario.n_samples;
  SemCell c;
  c.x1.resize(n);
  c.x2.resize(n);
  c.x3.resize(n);
  c.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double x1 = s * normal(rng);
    const double x2 = s * normal(rng);
    const double y = x1 + f * x2 + s * normal(rng);
    c.x1[r] = x1;
    c.x2[r] = x2;
    c.y[r] = y;
    c.x3[r] = y + normal(rng);
  }
  return c;
}

// Every (E, e) cell is drawn from its own seed-derived stream, so a cell's
// contents do not depend on generation order.
inline SemDataset generate_sem(const SemScenario& scenario, std::size_t threads = 1) {
  scenario.validate();
  SemDataset ds{scenario, {}};
  std::vector<CellKey> keys;
  for (std::size_t big = 0; big < kNumE; ++big) {
    for (std::size_t small = 0; small < scenario.sigma_e.size(); ++small) {
      keys.push_back({big, small});
    }
  }
  std::vector<SemCell> cells(keys.size());
  parallel_for(keys.size(), threads,
               [&](std::size_t i) { cells[i] = generate_cell(scenario, keys[i]); });
  for (std::size_t i = 0; i < keys.size(); ++i) ds.cells.emplace(keys[i], std::move(cells[i]));
  return ds;
}

// Second-moment sums of a set of cells restricted to a feature subset.
struct Moments {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yty = 0.0;
  std::size_t n = 0;
};

inline Moments moments(const SemDataset& ds, std::span<const CellKey> cells, FeatureSubset subset) {
  const auto idx = subset.indices();
  const auto k = static_cast<Eigen::Index>(idx.size());
  Moments m{Eigen::MatrixXd::Zero(k, k), Eigen::VectorXd::Zero(k), 0.0, 0};
  std::vector<double> row(idx.size());
  for (const CellKey key : cells) {
    const SemCell& c = ds.cell(key);
    for (std::size_t r = 0; r < c.size(); ++r) {
      for (std::size_t a = 0; a < idx.size(); ++a) row[a] = c.feature(idx[a], r);
      const double y = c.y[r];
      for (Eigen::Index a = 0; a < k; ++a) {
        m.xty(a) += row[a] * y;
        for (Eigen::Index b = 0; b <= a; ++b) m.xtx(a, b) += row[a] * row[b];
      }
      m.yty += y * y;
    }
    m.n += c.size();
  }
  m.xtx.triangularView<Eigen::StrictlyUpper>() = m.xtx.transpose();
  return m;
}

// Mean squared error of coefficients w (subset order) over the given cells.
inline double mse(const SemDataset& ds, std::span<const CellKey> cells, FeatureSubset subset,
                  std::span<const double> w) {
  const auto idx = subset.indices();
  if (w.size() != idx.size()) throw std::invalid_argument("mse: coefficient count mismatch");
  double ss = 0.0;
  std::size_t n = 0;
  for (const CellKey key : cells) {
    const SemCell& c = ds.cell(key);
    for (std::size_t r = 0; r < c.size(); ++r) {
      double pred = 0.0;
      for (std::size_t a = 0; a < idx.size(); ++a) pred += w[a] * c.feature(idx[a], r);
      const double res = c.y[r] - pred;
      ss += res * res;
    }
    n += c.size();
  }
  if (n == 0) throw std::invalid_argument("mse: no samples");
  return ss / static_cast<double>(n);
}

// Exact gradient of the mean squared error over `cells` at w:
//   (2/n) (X^T X w - X^T y).
inline std::vector<double> mse_gradient(const SemDataset& ds, std::span<const CellKey> cells,
                                        FeatureSubset subset, std::span<const double> w) {
  const Moments m = moments(ds, cells, subset);
  if (m.n == 0) throw std::invalid_argument("mse_gradient: no samples");
  if (w.size() != static_cast<std::size_t>(m.xty.size())) {
    throw std::invalid_argument("mse_gradient: coefficient count mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::VectorXd g = (2.0 / static_cast<double>(m.n)) * (m.xtx * wv - m.xty);
  return {g.data(), g.data() + g.size()};
}

// Least squares of Y on the subset features over the pooled cells, no
// intercept. Throws SingularFitError when the pooled design is rank deficient.
inline FitResult ols_fit(const SemDataset& ds, std::span<const CellKey> cells,
                         FeatureSubset subset) {
  if (cells.empty()) throw std::invalid_argument("ols_fit: empty cell selection");
  const Moments m = moments(ds, cells, subset);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m.xtx);
  lu.setThreshold(1e-10);
  if (m.xtx.isZero(0.0) || lu.rank() < m.xtx.rows()) {
    throw SingularFitError("ols_fit: design matrix for " + subset.name() + " is rank deficient");
  }
  const Eigen::VectorXd w = lu.solve(m.xty);
  FitResult fit;
  fit.subset = subset;
  fit.coefficients.assign(w.data(), w.data() + w.size());
  fit.pooled_mse = mse(ds, cells, subset, fit.coefficients);
  return fit;
}

// An environment is a group of cells; a scope is a list of environments.
using Environment = std::vector<CellKey>;
using Scope = std::vector<Environment>;

inline std::vector<CellKey> flatten(const Scope& scope) {
  std::vector<CellKey> out;
  for (const auto& env : scope) out.insert(out.end(), env.begin(), env.end());
  return out;
}

// Every (E, e) cell is its own environment.
inline Scope full_scope(const SemDataset& ds) {
  Scope s;
  for (const CellKey k : ds.keys()) s.push_back({k});
  return s;
}

// The e-environments of one fixed E (big_e in [0, 3)).
inline Scope per_e_scope(const SemDataset& ds, std::size_t big_e) {
  Scope s;
  for (const CellKey k : ds.keys()) {
    if (k.big_e == big_e) s.push_back({k});
  }
  if (s.empty()) throw std::invalid_argument("per_e_scope: no cells for E index " + std::to_string(big_e));
  return s;
}

// Sum over environments of ||grad_w MSE_e(w)||^2 at the pooled fit w.
inline double penalty_at(const SemDataset& ds, const Scope& scope, const FitResult& pooled) {
  double penalty = 0.0;
  for (const auto& env : scope) {
    for (double g : mse_gradient(ds, env, pooled.subset, pooled.coefficients)) penalty += g * g;
  }
  return penalty;
}

inline void check_scope(const Scope& scope) {
  if (scope.size() < 2) throw std::invalid_argument("invariance penalty needs >= 2 environments");
  for (const auto& env : scope) {
    if (env.empty()) throw std::invalid_argument("scope contains an empty environment");
  }
}

// Pooled fit over the scope together with its invariance penalty.
inline FitResult penalized_fit(const SemDataset& ds, const Scope& scope, FeatureSubset subset) {
  check_scope(scope);
  const auto pooled_cells = flatten(scope);
  FitResult fit = ols_fit(ds, pooled_cells, subset);
  fit.invariance_penalty = penalty_at(ds, scope, fit);
  return fit;
}

inline double invariance_penalty(const SemDataset& ds, const Scope& scope, FeatureSubset subset) {
  return penalized_fit(ds, scope, subset).invariance_penalty;
}

// Tolerance used for subset selection: a multiple of the {X1} penalty over the
// full scope, which is pure sampling noise.
inline constexpr double kToleranceMultiplier = 5.0;

inline double calibrate_tolerance(const SemDataset& ds) {
  return kToleranceMultiplier * invariance_penalty(ds, full_scope(ds), FeatureSubset::of({1}));
}

// Among subsets whose penalty is below tol, the one with the smallest pooled
// MSE; ties go to the smaller subset, then lexicographic order. Subsets whose
// pooled design is singular are skipped.
inline FitResult select_invariant_subset(const SemDataset& ds, const Scope& scope, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("select_invariant_subset: tol must be > 0");
  check_scope(scope);
  std::map<FeatureSubset, double> penalties;
  std::optional<FitResult> best;
  for (const FeatureSubset subset : all_subsets()) {
    FitResult fit;
    try {
      fit = penalized_fit(ds, scope, subset);
    } catch (const SingularFitError&) {
      penalties[subset] = std::numeric_limits<double>::infinity();
      continue;
    }
    penalties[subset] = fit.invariance_penalty;
    if (fit.invariance_penalty < tol && (!best || fit.pooled_mse < best->pooled_mse)) {
      best = std::move(fit);
    }
  }
  if (!best) throw NoInvariantSubsetError(std::move(penalties), tol);
  return *best;
}

struct CellError {
  CellKey key;
  double sigma_e;
  double mse;
};

struct MethodReport {
  std::string method;
  std::string scope;
  std::vector<std::pair<std::size_t, FitResult>> fits;  // (E index or kAllE, fit)
  std::vector<CellError> cells;                         // ordered by CellKey
  double mean_mse = 0.0;
  double fairness = 0.0;
};

inline constexpr std::size_t kAllE = static_cast<std::size_t>(-1);

struct SemReport {
  SemScenario scenario;
  double tolerance = 0.0;
  std::vector<MethodReport> methods;  // irm-global, pirm-per-E, erm-pooled

  const MethodReport& method(std::string_view name) const {
    for (const auto& m : methods) {
      if (m.method == name) return m;
    }
    throw std::out_of_range("SemReport: no method " + std::string(name));
  }
};

namespace detail {

inline void summarize(MethodReport& r) {
  std::vector<double> errs;
  errs.reserve(r.cells.size());
  for (const auto& c : r.cells) errs.push_back(c.mse);
  r.mean_mse = mean_of(errs);
  r.fairness = fairness_vrex(errs);
}

inline CellError cell_error(const SemDataset& ds, CellKey k, const FitResult& fit) {
  const CellKey one[] = {k};
  return {k, ds.scenario.sigma_e[k.small_e], mse(ds, one, fit.subset, fit.coefficients)};
}

}  // namespace detail

// IRM over all cells, partial IRM within each E, and pooled ERM on all
// features, each scored by per-cell MSE, its mean, and the variance of the
// per-cell MSEs.
inline SemReport run_sem_experiment(const SemDataset& ds) {
  SemReport report{ds.scenario, calibrate_tolerance(ds), {}};
  const auto keys = ds.keys();

  MethodReport irm{"irm-global", "all", {}, {}, 0.0, 0.0};
  const FitResult global = select_invariant_subset(ds, full_scope(ds), report.tolerance);
  irm.fits.emplace_back(kAllE, global);
  for (const CellKey k : keys) irm.cells.push_back(detail::cell_error(ds, k, global));
  detail::summarize(irm);

  MethodReport pirm{"pirm-per-E", "per-E", {}, {}, 0.0, 0.0};
  std::map<std::size_t, FitResult> per_e;
  for (std::size_t big = 0; big < kNumE; ++big) {
    per_e.emplace(big, select_invariant_subset(ds, per_e_scope(ds, big), report.tolerance));
    pirm.fits.emplace_back(big, per_e.at(big));
  }
  for (const CellKey k : keys) pirm.cells.push_back(detail::cell_error(ds, k, per_e.at(k.big_e)));
  detail::summarize(pirm);

  MethodReport erm{"erm-pooled", "all", {}, {}, 0.0, 0.0};
  const FitResult pooled = ols_fit(ds, keys, FeatureSubset(0b111));
  erm.fits.emplace_back(kAllE, pooled);
  for (const CellKey k : keys) erm.cells.push_back(detail::cell_error(ds, k, pooled));
  detail::summarize(erm);

  report.methods = {std::move(irm), std::move(pirm), std::move(erm)};
  return report;
}

inline SemReport run_sem_experiment(const SemScenario& scenario, std::size_t threads = 0) {
  return run_sem_experiment(generate_sem(scenario, threads));
}

}  // namespace pirm::sem
