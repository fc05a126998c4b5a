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

// Penalized logistic family (logistic / lasso / ridge / elastic net) solved by
// proximal Newton steps with cyclic coordinate descent on the local quadratic
// model, and unpenalized IRLS with the inverse-Fisher covariance.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipsrs/matrix.hpp"

namespace ipsrs::models {

struct Penalty {
  double l1 = 0.0;
  double l2 = 0.0;
  friend bool operator==(const Penalty&, const Penalty&) = default;
};

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  Penalty penalty;
  // (p+1)x(p+1), index 0 is the intercept. Unpenalized IRLS fits only.
  std::optional<Matrix> covariance;
  bool converged = false;
  int iterations = 0;
  // Penalized objective after each outer iteration (coordinate-descent fits).
  std::vector<double> objective_trace;

  std::size_t width() const { return weights.size(); }
  // Standard error of coefficient k (0 = intercept, k = weight k-1).
  double standard_error(std::size_t k) const;
};

struct SolverSettings {
  int max_outer_iterations = 200;
  int max_inner_sweeps = 2000;
  // Convergence on the largest coordinate change of an outer step.
  double tolerance = 1e-10;
};

// Minimizes mean logistic loss + l1*|w|_1 + (l2/2)*|w|^2, intercept
// unpenalized. Non-convergence is reported through `converged`.
LinearModel fit_penalized_logistic(const Matrix& x, std::span<const int> labels, Penalty penalty,
                                   const SolverSettings& settings = {});

struct IrlsSettings {
  int max_iterations = 100;
  double tolerance = 1e-10;
  // Coefficients beyond this magnitude are treated as diverging.
  double divergence_limit = 30.0;
};

// Maximum-likelihood fit with covariance = inverse observed Fisher
// information. Throws SeparationError for single-class labels or separable
// data and RankDeficiencyError naming collinear columns.
LinearModel fit_logistic_irls(const Matrix& x, std::span<const int> labels,
                              const IrlsSettings& settings = {},
                              std::span<const std::string> column_names = {});

struct WaldInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// estimate +- 1.96 * se for coefficient k (0 = intercept).
WaldInterval wald_interval(const LinearModel& model, std::size_t k);

// Mean logistic loss plus the model's penalty.
double penalized_objective(const LinearModel& model, const Matrix& x, std::span<const int> labels);

// Gradient of the mean logistic loss with respect to (intercept, weights).
std::vector<double> logistic_gradient(const LinearModel& model, const Matrix& x,
                                      std::span<const int> labels);

std::vector<double> predict_margin(const LinearModel& model, const Matrix& x);

// log(1 + exp(m)) without overflow.
double softplus(double margin);

}  // namespace ipsrs::models
