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

// Shifted Gaussian-mixture environment family and its closed-form risks.
//
// Environment i is an equal-prior mixture of N(mu1 + i*delta, sigma^2)
// (class 1) and N(mu2 + i*delta, sigma^2) (class 2). A threshold classifier
// predicts class 1 iff x < t.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pirm/gauss.hpp"

namespace pirm {

using RiskVector = std::vector<double>;

struct ClassMeans {
  double m1;
  double m2;
};

class EnvironmentFamily {
 public:
  EnvironmentFamily(double mu1, double mu2, double sigma, double delta,
                    std::size_t n_envs)
      : mu1_(mu1), mu2_(mu2), sigma_(sigma), delta_(delta), n_envs_(n_envs) {
    if (!std::isfinite(mu1) || !std::isfinite(mu2) || !(mu1 < mu2)) {
      throw std::invalid_argument("EnvironmentFamily: requires finite mu1 < mu2");
    }
    if (!std::isfinite(sigma) || !(sigma > 0.0)) {
      throw std::invalid_argument("EnvironmentFamily: sigma must be > 0");
    }
    if (!std::isfinite(delta) || delta < 0.0) {
      throw std::invalid_argument("EnvironmentFamily: delta must be >= 0");
    }
    if (n_envs < 1) {
      throw std::invalid_argument("EnvironmentFamily: n_envs must be >= 1");
    }
  }

  double mu1() const { return mu1_; }
  double mu2() const { return mu2_; }
  double sigma() const { return sigma_; }
  double delta() const { return delta_; }
  std::size_t n_envs() const { return n_envs_; }

  // Centre of symmetry of the whole family.
  double center() const {
    return 0.5 * (mu1_ + mu2_) + 0.5 * static_cast<double>(n_envs_ - 1) * delta_;
  }

  void check_index(std::size_t i) const {
    if (i >= n_envs_) {
      throw std::out_of_range("environment index " + std::to_string(i) +
                              " out of range [0, " + std::to_string(n_envs_) + ")");
    }
  }

 private:
  double mu1_;
  double mu2_;
  double sigma_;
  double delta_;
  std::size_t n_envs_;
};

inline ClassMeans class_means(const EnvironmentFamily& family, std::size_t i) {
  family.check_index(i);
  const double shift = static_cast<double>(i) * family.delta();
  return {family.mu1() + shift, family.mu2() + shift};
}

// Bayes-optimal threshold of environment i (midpoint of its class means).
inline double env_midpoint(const EnvironmentFamily& family, std::size_t i) {
  const auto [m1, m2] = class_means(family, i);
  return 0.5 * (m1 + m2);
}

// 0-1 risk of threshold t on environment i:
//   R_i(t) = 1/2 * P(x >= t | class 1) + 1/2 * P(x < t | class 2).
inline double env_risk(const EnvironmentFamily& family, std::size_t i, double t) {
  detail::require_finite(t, "env_risk");
  const auto [m1, m2] = class_means(family, i);
  const double s = family.sigma();
  return 0.5 * std_normal_sf((t - m1) / s) + 0.5 * std_normal_cdf((t - m2) / s);
}

// dR_i/dt = (phi((t - m2)/sigma) - phi((t - m1)/sigma)) / (2 sigma).
inline double env_risk_deriv(const EnvironmentFamily& family, std::size_t i, double t) {
  detail::require_finite(t, "env_risk_deriv");
  const auto [m1, m2] = class_means(family, i);
  const double s = family.sigma();
  return (std_normal_pdf((t - m2) / s) - std_normal_pdf((t - m1) / s)) / (2.0 * s);
}

// Risk of every environment under one shared threshold.
inline RiskVector env_risks(const EnvironmentFamily& family, double t) {
  RiskVector out(family.n_envs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = env_risk(family, i, t);
  return out;
}

// Risk of every environment under its own assigned threshold.
inline RiskVector env_risks(const EnvironmentFamily& family,
                            std::span<const double> thresholds) {
  if (thresholds.size() != family.n_envs()) {
    throw std::invalid_argument("env_risks: expected " + std::to_string(family.n_envs()) +
                                " thresholds, got " + std::to_string(thresholds.size()));
  }
  RiskVector out(family.n_envs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = env_risk(family, i, thresholds[i]);
  return out;
}

inline double mean_of(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_of: empty input");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Uniform average of per-environment risks, each environment evaluated at its
// own threshold.
inline double global_risk(const EnvironmentFamily& family,
                          std::span<const double> thresholds) {
  const RiskVector risks = env_risks(family, thresholds);
  return mean_of(risks);
}

// V-REx penalty (1 / 2N^2) * sum_i sum_j (r_i - r_j)^2.
//
// The double sum equals the population variance of r; the two-pass form is
// used since it is O(N) and never negative.
inline double fairness_vrex(std::span<const double> risks) {
  if (risks.empty()) throw std::invalid_argument("fairness_vrex: empty risk vector");
  const double mean = mean_of(risks);
  double ss = 0.0;
  for (double r : risks) {
    const double d = r - mean;
    ss += d * d;
  }
  return ss / static_cast<double>(risks.size());
}

}  // namespace pirm
