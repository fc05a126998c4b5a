//
// Copyright 2026 The ipsrs Authors
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
//
#pragma once

#include <cmath>
#include <vector>

#include "ipsrs/matrix.hpp"
#include "ipsrs/rng.hpp"

namespace fixtures {

struct Dataset {
  ipsrs::Matrix x;
  std::vector<int> y;
};

// Gaussian features, labels drawn from a logistic model with the given
// coefficients.
inline Dataset logistic_data(std::size_t n, const std::vector<double>& beta, double intercept,
                             std::uint64_t seed) {
  ipsrs::Rng rng(seed);
  Dataset d{ipsrs::Matrix(n, beta.size()), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double m = intercept;
    for (std::size_t j = 0; j < beta.size(); ++j) {
      d.x(i, j) = rng.normal();
      m += beta[j] * d.x(i, j);
    }
    d.y[i] = rng.bernoulli(ipsrs::sigmoid(m)) ? 1 : 0;
  }
  return d;
}

}  // namespace fixtures
