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

#include "pirm/sem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"

namespace pirm::sem {
namespace {

using pirm::testing::population_mse;
using pirm::testing::population_ols;
using pirm::testing::sem_cell_covariance;

const SemDataset& reference_data() {
  static const SemDataset ds = [] {
    SemScenario s;
    s.seed = 42;
    return generate_sem(s, 0);
  }();
  return ds;
}

const SemReport& reference_report() {
  static const SemReport r = run_sem_experiment(reference_data());
  return r;
}

Eigen::Matrix4d pooled_covariance(const SemScenario& s) {
  Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
  for (double f : s.f_values) {
    for (double sigma : s.sigma_e) c += sem_cell_covariance(sigma, f);
  }
  return c / static_cast<double>(s.f_values.size() * s.sigma_e.size());
}

double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

TEST(FeatureSubset, NamesAndOrder) {
  const auto all = all_subsets();
  ASSERT_EQ(all.size(), 7u);
  EXPECT_EQ(all.front().name(), "{X1}");
  EXPECT_EQ(all[3].name(), "{X1,X2}");
  EXPECT_EQ(all.back().name(), "{X1,X2,X3}");
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_LE(all[i - 1].size(), all[i].size());
  EXPECT_EQ(FeatureSubset::of({2, 1}).mask(), 0b011u);
  EXPECT_THROW(FeatureSubset(0), std::invalid_argument);
  EXPECT_THROW(FeatureSubset::of({4}), std::invalid_argument);
}

TEST(Generate, ZeroNoiseCell) {
  SemScenario s;
  s.sigma_e = {0.0};
  s.n_samples = 500;
  const auto ds = generate_sem(s);
  ASSERT_EQ(ds.cells.size(), 3u);
  for (const auto& [k, c] : ds.cells) {
    for (std::size_t r = 0; r < c.size(); ++r) {
      EXPECT_EQ(c.x1[r], 0.0);
      EXPECT_EQ(c.x2[r], 0.0);
      EXPECT_EQ(c.y[r], 0.0);
    }
    EXPECT_NEAR(sample_cov(c.x3, c.x3), 1.0, 0.2);
  }
  EXPECT_THROW(ols_fit(ds, ds.keys(), FeatureSubset::of({1})), SingularFitError);
  EXPECT_NO_THROW(ols_fit(ds, ds.keys(), FeatureSubset::of({3})));
}

TEST(Generate, SecondMomentsMatchPopulation) {
  const auto& ds = reference_data();
  for (const auto& [k, c] : ds.cells) {
    const double sigma = ds.scenario.sigma_e[k.small_e];
    const double f = ds.scenario.f_values[k.big_e];
    const Eigen::Matrix4d pop = sem_cell_covariance(sigma, f);
    const std::vector<const std::vector<double>*> cols{&c.x1, &c.x2, &c.x3, &c.y};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const double got = sample_cov(*cols[a], *cols[b]);
        // Standard error of a product moment is at most about
        // sqrt(2 * var_a * var_b / n); allow 6 of them.
        const double se = std::sqrt(2.0 * pop(a, a) * pop(b, b) / static_cast<double>(c.size()));
        EXPECT_NEAR(got, pop(a, b), 6.0 * se) << to_string(k) << " " << a << "," << b;
      }
    }
  }
}

TEST(Generate, DeterministicAndThreadIndependent) {
  SemScenario s;
  s.n_samples = 2000;
  s.seed = 7;
  const auto a = generate_sem(s, 1);
  const auto b = generate_sem(s, 4);
  for (const auto& [k, c] : a.cells) {
    const auto& d = b.cell(k);
    EXPECT_EQ(std::memcmp(c.y.data(), d.y.data(), c.size() * sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(c.x3.data(), d.x3.data(), c.size() * sizeof(double)), 0);
  }
  s.seed = 8;
  const auto other = generate_sem(s, 1);
  EXPECT_NE(other.cell({0, 0}).y, a.cell({0, 0}).y);
  EXPECT_NE(a.cell({0, 1}).y, a.cell({1, 1}).y);
}

TEST(OlsFit, PerEnvironmentRecoversCausalCoefficients) {
  const auto& ds = reference_data();
  for (std::size_t big = 0; big < kNumE; ++big) {
    const auto cells = flatten(per_e_scope(ds, big));
    const auto fit = ols_fit(ds, cells, FeatureSubset::of({1, 2}));
    EXPECT_NEAR(fit.coefficients[0], 1.0, 0.02);
    EXPECT_NEAR(fit.coefficients[1], ds.scenario.f_values[big], 0.02);
  }
}

TEST(OlsFit, EffectFeatureMatchesPopulation) {
  const auto& ds = reference_data();
  const CellKey k{0, 1};  // sigma = 1, f = 1
  const CellKey one[] = {k};
  const auto fit = ols_fit(ds, one, FeatureSubset::of({3}));
  // cov(X3, Y) / var(X3) = 3 / 4
  EXPECT_NEAR(fit.coefficients[0], 0.75, 0.01);
  const auto pop = sem_cell_covariance(1.0, 1.0);
  const auto w = population_ols(pop, {2});
  EXPECT_NEAR(fit.pooled_mse, population_mse(pop, {2}, w), 0.03);
}

TEST(OlsFit, EffectCoefficientDependsOnNoiseScale) {
  const auto& ds = reference_data();
  const FeatureSubset all(0b111);
  double x3[2];
  for (std::size_t small : {0u, 2u}) {
    const CellKey one[] = {CellKey{0, small}};
    const auto fit = ols_fit(ds, one, all);
    const auto w = population_ols(sem_cell_covariance(ds.scenario.sigma_e[small], 1.0), {0, 1, 2});
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(fit.coefficients[j], w(j), 0.02) << small << " " << j;
    x3[small == 0 ? 0 : 1] = fit.coefficients[2];
  }
  EXPECT_GT(std::abs(x3[1] - x3[0]), 0.05);
}

TEST(OlsFit, PooledErmMatchesPopulation) {
  const auto& ds = reference_data();
  const auto fit = ols_fit(ds, ds.keys(), FeatureSubset(0b111));
  const Eigen::Matrix4d cov = pooled_covariance(ds.scenario);
  const auto w = population_ols(cov, {0, 1, 2});
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(fit.coefficients[j], w(j), 0.01);
  EXPECT_NEAR(fit.pooled_mse, population_mse(cov, {0, 1, 2}, w), 0.02);
}

TEST(OlsFit, ResidualsOrthogonalToFeatures) {
  const auto& ds = reference_data();
  const auto keys = ds.keys();
  const auto fit = ols_fit(ds, keys, FeatureSubset(0b111));
  const auto g = mse_gradient(ds, keys, fit.subset, fit.coefficients);
  for (double v : g) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(MseGradient, MatchesFiniteDifferences) {
  SemScenario s;
  s.n_samples = 3000;
  const auto ds = generate_sem(s);
  const auto keys = per_e_scope(ds, 1)[2];
  const FeatureSubset subset(0b111);
  const std::vector<double> w{0.4, -0.3, 0.2};
  const auto g = mse_gradient(ds, keys, subset, w);
  for (std::size_t j = 0; j < 3; ++j) {
    const double h = 1e-4;
    auto wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    const double fd = (mse(ds, keys, subset, wp) - mse(ds, keys, subset, wm)) / (2.0 * h);
    EXPECT_NEAR(g[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
  EXPECT_THROW(mse_gradient(ds, keys, subset, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Penalty, IdenticalEnvironmentsGiveZero) {
  const auto& ds = reference_data();
  const Scope twice{{CellKey{2, 2}}, {CellKey{2, 2}}};
  for (const auto subset : all_subsets()) {
    EXPECT_NEAR(invariance_penalty(ds, twice, subset), 0.0, 1e-18);
  }
}

TEST(Penalty, InvariantSubsetsAreSmall) {
  const auto& ds = reference_data();
  const double tol = calibrate_tolerance(ds);
  const Scope all = full_scope(ds);
  EXPECT_LT(invariance_penalty(ds, all, FeatureSubset::of({1})), tol);
  EXPECT_GT(invariance_penalty(ds, all, FeatureSubset::of({1, 2})), 100.0 * tol);
  EXPECT_GT(invariance_penalty(ds, all, FeatureSubset::of({3})), 100.0 * tol);
  for (std::size_t big = 0; big < kNumE; ++big) {
    const Scope per = per_e_scope(ds, big);
    EXPECT_LT(invariance_penalty(ds, per, FeatureSubset::of({1, 2})), tol);
    EXPECT_GT(invariance_penalty(ds, per, FeatureSubset::of({1, 2, 3})), 100.0 * tol);
  }
}

TEST(Penalty, ScopeChecks) {
  const auto& ds = reference_data();
  EXPECT_THROW(invariance_penalty(ds, Scope{{CellKey{0, 0}}}, FeatureSubset::of({1})),
               std::invalid_argument);
  EXPECT_THROW(invariance_penalty(ds, Scope{{CellKey{0, 0}}, {}}, FeatureSubset::of({1})),
               std::invalid_argument);
  EXPECT_THROW(per_e_scope(ds, 5), std::invalid_argument);
}

TEST(Selection, FullScopeSelectsDirectCause) {
  const auto& ds = reference_data();
  const auto fit = select_invariant_subset(ds, full_scope(ds), calibrate_tolerance(ds));
  EXPECT_EQ(fit.subset, FeatureSubset::of({1}));
  EXPECT_NEAR(fit.coefficients[0], 1.0, 0.01);
}

TEST(Selection, ConstantMechanismSelectsBothCauses) {
  SemScenario s;
  s.f_values = {2.0, 2.0, 2.0};
  s.n_samples = 50000;
  s.seed = 3;
  const auto ds = generate_sem(s);
  const auto fit = select_invariant_subset(ds, full_scope(ds), calibrate_tolerance(ds));
  EXPECT_EQ(fit.subset, FeatureSubset::of({1, 2}));
  EXPECT_NEAR(fit.coefficients[0], 1.0, 0.02);
  EXPECT_NEAR(fit.coefficients[1], 2.0, 0.02);
}

TEST(Selection, NothingBelowToleranceThrows) {
  const auto& ds = reference_data();
  try {
    select_invariant_subset(ds, full_scope(ds), 1e-300);
    FAIL() << "expected NoInvariantSubsetError";
  } catch (const NoInvariantSubsetError& e) {
    EXPECT_EQ(e.penalties().size(), 7u);
  }
  EXPECT_THROW(select_invariant_subset(ds, full_scope(ds), 0.0), std::invalid_argument);
}

TEST(Experiment, MethodsAndFits) {
  const auto& r = reference_report();
  ASSERT_EQ(r.methods.size(), 3u);
  EXPECT_EQ(r.methods[0].method, "irm-global");
  EXPECT_EQ(r.methods[1].method, "pirm-per-E");
  EXPECT_EQ(r.methods[2].method, "erm-pooled");
  const auto& pirm = r.method("pirm-per-E");
  ASSERT_EQ(pirm.fits.size(), 3u);
  for (const auto& [big, fit] : pirm.fits) {
    EXPECT_EQ(fit.subset, FeatureSubset::of({1, 2}));
    EXPECT_NEAR(fit.coefficients[1], r.scenario.f_values[big], 0.02);
  }
  for (const auto& m : r.methods) EXPECT_EQ(m.cells.size(), 9u);
  EXPECT_THROW(r.method("lasso"), std::out_of_range);
}

TEST(Experiment, CellErrorsMatchPopulation) {
  const auto& r = reference_report();
  const auto& s = r.scenario;
  const Eigen::Matrix4d pooled = pooled_covariance(s);
  const auto w_erm = population_ols(pooled, {0, 1, 2});
  Eigen::VectorXd w_irm(1);
  w_irm << 1.0;
  for (std::size_t c = 0; c < 9; ++c) {
    const CellKey k = r.methods[0].cells[c].key;
    const double sigma = s.sigma_e[k.small_e];
    const double f = s.f_values[k.big_e];
    const Eigen::Matrix4d cov = sem_cell_covariance(sigma, f);
    Eigen::VectorXd w_p(2);
    w_p << 1.0, f;
    const double expect[3] = {population_mse(cov, {0}, w_irm), population_mse(cov, {0, 1}, w_p),
                              population_mse(cov, {0, 1, 2}, w_erm)};
    for (std::size_t m = 0; m < 3; ++m) {
      EXPECT_NEAR(r.methods[m].cells[c].mse, expect[m], 0.03 * expect[m] + 0.01)
          << r.methods[m].method << " " << to_string(k);
    }
  }
}

TEST(Experiment, MeanErrorOrdering) {
  const auto& r = reference_report();
  const double irm = r.method("irm-global").mean_mse;
  const double pirm = r.method("pirm-per-E").mean_mse;
  const double erm = r.method("erm-pooled").mean_mse;
  EXPECT_GT(irm, pirm);
  EXPECT_GT(pirm, erm);
  EXPECT_NEAR(irm, 9.52, 0.2);
  EXPECT_NEAR(pirm, 1.68, 0.05);
  EXPECT_NEAR(erm, 0.7368, 0.02);
}

TEST(Experiment, SpreadOfPerCellErrors) {
  // Per-cell errors of the per-E fit are sigma(e)^2, so their spread is the
  // variance of {0.04, 1, 4}; the pooled ERM fit leans on X3 and is far flatter.
  const auto& r = reference_report();
  const double pirm = r.method("pirm-per-E").fairness;
  const double erm = r.method("erm-pooled").fairness;
  EXPECT_NEAR(pirm, 2.8448, 0.15);
  EXPECT_NEAR(erm, 0.0439, 0.01);
  EXPECT_LT(erm, pirm);
}

TEST(Experiment, StableAcrossSeeds) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SemScenario s;
    s.n_samples = 20000;
    s.seed = seed;
    const auto r = run_sem_experiment(s, 0);
    EXPECT_EQ(r.method("irm-global").fits[0].second.subset, FeatureSubset::of({1}));
    for (const auto& [big, fit] : r.method("pirm-per-E").fits) {
      EXPECT_EQ(fit.subset, FeatureSubset::of({1, 2})) << "seed " << seed;
      EXPECT_NEAR(fit.coefficients[0], 1.0, 0.05);
      EXPECT_NEAR(fit.coefficients[1], s.f_values[big], 0.05);
    }
    EXPECT_GT(r.method("irm-global").mean_mse, r.method("pirm-per-E").mean_mse);
  }
}

}  // namespace
}  // namespace pirm::sem
