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
#include <stdexcept>

namespace pirm {

template <typename T>
struct Minimum {
  T x;
  T fx;
};

// Golden-section search for a minimum of a unimodal function on [a, b].
//
// Iterates until the bracket is narrower than `tol` and returns the better of
// the two interior probes. On exact ties the smaller abscissa wins.
template <typename T, typename F>
Minimum<T> golden_section_minimize(F&& f, T a, T b, T tol, int max_iter = 200) {
  if (!(a < b)) throw std::invalid_argument("golden_section_minimize: need a < b");
  if (!(tol > T(0))) throw std::invalid_argument("golden_section_minimize: need tol > 0");

  const T inv_phi = (std::sqrt(T(5)) - T(1)) / T(2);
  T c = b - inv_phi * (b - a);
  T d = a + inv_phi * (b - a);
  T fc = f(c);
  T fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  if (fc <= fd) return {c, fc};
  return {d, fd};
}

}  // namespace pirm
