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
#include "ipsrs/models/linear.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ipsrs/error.hpp"
#include "ipsrs/kernels.hpp"

namespace ipsrs::models {
namespace {

constexpr double kProbFloor = 1e-12;

void check_inputs(const Matrix& x, std::span<const int> labels) {
  if (x.rows() != labels.size()) {
    throw ValidationError("design has " + std::to_string(x.rows()) + " rows but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (x.rows() == 0) throw ValidationError("cannot fit a model on zero rows");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
  }
}

double prevalence(std::span<const int> labels) {
  double s = 0.0;
  for (int y : labels) s += y;
  return s / static_cast<double>(labels.size());
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double mean_logloss(std::span<const double> margins, std::span<const int> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    s += softplus(margins[i]) - labels[i] * margins[i];
  }
  return s / static_cast<double>(margins.size());
}

double penalty_value(const Penalty& pen, std::span<const double> w) {
  double l1 = 0.0, l2 = 0.0;
  for (double v : w) {
    l1 += std::abs(v);
    l2 += v * v;
  }
  return pen.l1 * l1 + 0.5 * pen.l2 * l2;
}

std::vector<double> margins_of(const Matrix& x, std::span<const double> w, double b) {
  std::vector<double> m(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) m[i] = b + kernels::dot(x.row(i), w);
  return m;
}

}  // namespace

double softplus(double margin) {
  return margin > 0.0 ? margin + std::log1p(std::exp(-margin)) : std::log1p(std::exp(margin));
}

double LinearModel::standard_error(std::size_t k) const {
  if (!covariance) throw ValidationError("model carries no covariance");
  if (k >= covariance->rows()) throw ValidationError("coefficient index out of range");
  return std::sqrt((*covariance)(k, k));
}

WaldInterval wald_interval(const LinearModel& model, std::size_t k) {
  const double est = k == 0 ? model.intercept : model.weights.at(k - 1);
  const double se = model.standard_error(k);
  return {est, est - 1.96 * se, est + 1.96 * se};
}

std::vector<double> predict_margin(const LinearModel& model, const Matrix& x) {
  if (x.cols() != model.width()) {
    throw ValidationError("model expects " + std::to_string(model.width()) +
                          " columns, input has " + std::to_string(x.cols()));
  }
  return margins_of(x, model.weights, model.intercept);
}

double penalized_objective(const LinearModel& model, const Matrix& x,
                           std::span<const int> labels) {
  check_inputs(x, labels);
  const auto m = predict_margin(model, x);
  return mean_logloss(m, labels) + penalty_value(model.penalty, model.weights);
}

std::vector<double> logistic_gradient(const LinearModel& model, const Matrix& x,
                                      std::span<const int> labels) {
  check_inputs(x, labels);
  const auto m = predict_margin(model, x);
  const double n = static_cast<double>(x.rows());
  std::vector<double> g(model.width() + 1, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double r = sigmoid(m[i]) - labels[i];
    g[0] += r;
    auto row = x.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) g[j + 1] += r * row[j];
  }
  for (double& v : g) v /= n;
  return g;
}

LinearModel fit_penalized_logistic(const Matrix& x, std::span<const int> labels, Penalty penalty,
                                   const SolverSettings& settings) {
  check_inputs(x, labels);
  if (penalty.l1 < 0.0 || penalty.l2 < 0.0) throw ValidationError("penalties must be >= 0");
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  const double prev = std::clamp(prevalence(labels), kProbFloor, 1.0 - kProbFloor);
  LinearModel model;
  model.penalty = penalty;
  model.weights.assign(p, 0.0);
  model.intercept = logit(prev);

  const auto cols = x.columns();
  std::vector<double> margins(n, model.intercept);
  std::vector<double> w_irls(n), resid(n), delta(n);
  std::vector<double> curvature(p), grad0(p);
  double objective = mean_logloss(margins, labels) + penalty_value(penalty, model.weights);

  for (int outer = 0; outer < settings.max_outer_iterations; ++outer) {
    model.iterations = outer + 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = std::clamp(sigmoid(margins[i]), kProbFloor, 1.0 - kProbFloor);
      w_irls[i] = pr * (1.0 - pr);
      resid[i] = labels[i] - pr;
    }
    const double w_sum = kernels::sum(w_irls) * inv_n;
    const double grad0_b = kernels::sum(resid) * inv_n;
    for (std::size_t j = 0; j < p; ++j) {
      curvature[j] = kernels::weighted_sumsq(w_irls, cols[j]) * inv_n;
      grad0[j] = kernels::dot(resid, cols[j]) * inv_n;
    }

    // Coordinate descent on the local quadratic model; `delta` holds X * step.
    std::vector<double> w_new = model.weights;
    double b_new = model.intercept;
    std::fill(delta.begin(), delta.end(), 0.0);
    for (int sweep = 0; sweep < settings.max_inner_sweeps; ++sweep) {
      double max_change = 0.0;
      {
        const double c = grad0_b - kernels::dot(w_irls, delta) * inv_n;
        const double step = c / w_sum;
        if (step != 0.0) {
          b_new += step;
          for (double& d : delta) d += step;
          max_change = std::max(max_change, std::abs(step) * std::sqrt(w_sum));
        }
      }
      for (std::size_t j = 0; j < p; ++j) {
        const double a = curvature[j];
        if (a + penalty.l2 <= 0.0) continue;
        const double c = grad0[j] - kernels::weighted_dot(w_irls, cols[j], delta) * inv_n;
        // c is measured at the current quadratic iterate for coordinate j.
        const double u = a * w_new[j] + c;
        const double v = soft_threshold(u, penalty.l1) / (a + penalty.l2);
        const double step = v - w_new[j];
        if (step != 0.0) {
          w_new[j] = v;
          kernels::axpy(step, cols[j], delta);
          max_change = std::max(max_change, std::abs(step) * std::sqrt(a + penalty.l2));
        }
      }
      if (max_change < settings.tolerance * 0.1) break;
    }

    // Backtracking on the true objective along the proximal Newton direction.
    std::vector<double> dir(p);
    for (std::size_t j = 0; j < p; ++j) dir[j] = w_new[j] - model.weights[j];
    const double dir_b = b_new - model.intercept;
    double t = 1.0;
    bool accepted = false;
    std::vector<double> trial_w(p), trial_m(n);
    double trial_obj = objective;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < p; ++j) trial_w[j] = model.weights[j] + t * dir[j];
      for (std::size_t i = 0; i < n; ++i) trial_m[i] = margins[i] + t * delta[i];
      trial_obj = mean_logloss(trial_m, labels) + penalty_value(penalty, trial_w);
      if (trial_obj <= objective) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    double max_step = std::abs(t * dir_b);
    for (double d : dir) max_step = std::max(max_step, std::abs(t * d));
    if (!accepted) {
      // No descent available along the direction: the iterate is stationary
      // up to rounding.
      model.converged = true;
      break;
    }
    model.weights = trial_w;
    model.intercept += t * dir_b;
    margins = trial_m;
    const double previous = objective;
    objective = trial_obj;
    model.objective_trace.push_back(objective);
    if (objective > previous) throw Error("penalized objective increased during descent");
    if (max_step < settings.tolerance) {
      model.converged = true;
      break;
    }
  }
  return model;
}

LinearModel fit_logistic_irls(const Matrix& x, std::span<const int> labels,
                              const IrlsSettings& settings,
                              std::span<const std::string> column_names) {
  check_inputs(x, labels);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const double prev = prevalence(labels);
  if (prev == 0.0 || prev == 1.0) {
    throw SeparationError("all labels are identical; the logistic fit is degenerate");
  }

  Eigen::MatrixXd design(n, p + 1);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) design(i, j + 1) = x(i, j);
  }
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) y(i) = labels[i];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (static_cast<std::size_t>(qr.rank()) < p + 1) {
    const auto perm = qr.colsPermutation().indices();
    std::string names;
    for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) {
      const auto col = static_cast<std::size_t>(perm(k));
      std::string name = col == 0 ? std::string("intercept")
                         : col - 1 < column_names.size()
                             ? column_names[col - 1]
                             : "column " + std::to_string(col - 1);
      names += (names.empty() ? "" : ", ") + name;
    }
    throw RankDeficiencyError("design matrix is rank deficient; collinear columns: " + names);
  }

  auto loglik = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = design * beta;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += y(i) * eta(i) - softplus(eta(i));
    return s;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  beta(0) = logit(prev);
  double ll = loglik(beta);
  LinearModel model;
  Eigen::MatrixXd fisher;
  for (int it = 0; it < settings.max_iterations; ++it) {
    model.iterations = it + 1;
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd pr(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      pr(i) = sigmoid(eta(i));
      w(i) = std::max(pr(i) * (1.0 - pr(i)), 1e-300);
    }
    const Eigen::VectorXd grad = design.transpose() * (y - pr);
    fisher = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher);
    if (ldlt.info() != Eigen::Success) throw SingularMatrixError("Fisher information is singular");
    Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    Eigen::VectorXd next = beta + step;
    double next_ll = loglik(next);
    // Rounding near the optimum can make an exact Newton step look like a
    // tiny loss; only backtrack on a real decrease.
    const double slack = 1e-12 * (1.0 + std::abs(ll));
    for (int ls = 0; ls < 40 && next_ll < ll - slack; ++ls) {
      t *= 0.5;
      next = beta + t * step;
      next_ll = loglik(next);
    }
    const double change = step.cwiseAbs().maxCoeff();
    beta = next;
    ll = next_ll;
    if (beta.cwiseAbs().maxCoeff() > settings.divergence_limit || -ll < 1e-8 * n) {
      throw SeparationError("coefficients diverge; the classes are (quasi-)separable");
    }
    if (change < settings.tolerance) {
      model.converged = true;
      break;
    }
  }
  if (!model.converged) {
    throw SeparationError("IRLS did not converge; the classes may be separable");
  }

  // Covariance at the final estimate.
  const Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pr = sigmoid(eta(i));
    w(i) = pr * (1.0 - pr);
  }
  fisher = design.transpose() * w.asDiagonal() * design;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(fisher);
  if (!lu.isInvertible()) throw SingularMatrixError("Fisher information is singular");
  const Eigen::MatrixXd cov = lu.inverse();

  model.intercept = beta(0);
  model.weights.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) model.weights[j] = beta(j + 1);
  Matrix c(p + 1, p + 1);
  for (std::size_t a = 0; a <= p; ++a) {
    for (std::size_t b = 0; b <= p; ++b) c(a, b) = cov(a, b);
  }
  model.covariance = std::move(c);
  return model;
}

}  // namespace ipsrs::models
