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

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pirm {

namespace detail {

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::domain_error(std::string(what) + ": argument must be finite");
  }
}

}  // namespace detail

// Standard normal density (2*pi)^(-1/2) * exp(-x^2 / 2).
inline double std_normal_pdf(double x) {
  detail::require_finite(x, "std_normal_pdf");
  constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Standard normal distribution function.
//
// Evaluated through the complementary error function, Phi(x) = erfc(-x/sqrt2)/2,
// which keeps full relative accuracy in the lower tail (x -> -inf) where the
// risks of well separated classes live. The upper tail is taken by reflection
// so that cdf(x) + cdf(-x) == 1 holds to rounding.
inline double std_normal_cdf(double x) {
  detail::require_finite(x, "std_normal_cdf");
  constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;
  double p = 0.0;
  if (x < 0.0) {
    p = 0.5 * std::erfc(-x * kInvSqrt2);
  } else {
    p = 1.0 - 0.5 * std::erfc(x * kInvSqrt2);
  }
  if (p < 0.0) return 0.0;
  if (p > 1.0) return 1.0;
  return p;
}

// Upper tail 1 - Phi(x), accurate for large positive x.
inline double std_normal_sf(double x) {
  detail::require_finite(x, "std_normal_sf");
  return std_normal_cdf(-x);
}

}  // namespace pirm
