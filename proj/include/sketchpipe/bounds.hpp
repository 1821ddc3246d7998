// Copyright 2026 The sketchpipe Authors.
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

// Closed-form failure probabilities and constants for the sketched mean,
// covariance and cluster-center estimators. With preconditioning active all
// formulas take p = p_pad and stats of the transformed matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>

#include "sketchpipe/error.hpp"
#include "sketchpipe/sketch.hpp"

namespace sketchpipe {

struct BoundInputs {
  std::size_t p = 0;
  std::size_t m = 0;
  std::size_t n = 0;
  double eta = 1.0;
  DataStats stats;
  std::optional<double> rho;
  std::optional<std::size_t> n_k;

  void validate() const {
    if (p == 0 || m < 1 || m > p) throw ParameterError("BoundInputs: need 1 <= m <= p");
    if (eta != 1.0 && eta != 0.5) throw ParameterError("BoundInputs: eta must be 1 or 1/2");
    if (rho && !(*rho > 0.0 && *rho <= 1.0)) throw ParameterError("BoundInputs: rho must be in (0, 1]");
  }
};

inline double clamp_probability(double delta) { return std::clamp(delta, 0.0, 1.0); }

inline double tau(std::size_t m, std::size_t p) {
  if (m < 1 || m > p) throw ParameterError("tau: need 1 <= m <= p");
  return std::max(static_cast<double>(p) / static_cast<double>(m) - 1.0, 1.0);
}

namespace detail {

// Positive root of t^2/2 = l * (a + b t) scaled by n: n t^2 / 2 = l (a + b t).
inline double bernstein_root(double l, double a, double b, double n) {
  if (l <= 0.0) return 0.0;
  return (l * b + std::sqrt(l * l * b * b + 2.0 * n * l * a)) / n;
}

}  // namespace detail

/// Per-coordinate failure probability of the mean estimator at error t.
inline double mean_delta1(double t, const BoundInputs& in) {
  in.validate();
  const double p = static_cast<double>(in.p);
  const double n = static_cast<double>(in.n);
  const double r = p / static_cast<double>(in.m);
  const double var = (r - 1.0) * in.stats.max_row_norm * in.stats.max_row_norm / n;
  const double bnd = tau(in.m, in.p) * in.stats.max_abs * t / 3.0;
  return 2.0 * p * std::exp(-(n * t * t / 2.0) / (var + bnd));
}

inline double mean_t_for_delta1(double delta1, const BoundInputs& in) {
  in.validate();
  if (!(delta1 > 0.0)) throw ParameterError("mean_t_for_delta1: delta must be positive");
  const double p = static_cast<double>(in.p);
  const double n = static_cast<double>(in.n);
  const double r = p / static_cast<double>(in.m);
  const double l = std::log(2.0 * p / delta1);
  const double a = (r - 1.0) * in.stats.max_row_norm * in.stats.max_row_norm / n;
  const double b = tau(in.m, in.p) * in.stats.max_abs / 3.0;
  return detail::bernstein_root(l, a, b, n);
}

/// Smallest m for which the mean estimator reaches error t with
/// probability 0.99 on preconditioned data.
inline double cor4_min_m(double p, double n, double t, double eta) {
  if (p <= 0 || n <= 0 || t <= 0) throw ParameterError("cor4_min_m: p, n, t must be positive");
  return (1.0 / n) * (4.0 / eta) * std::log(200.0 * n * p) * std::log(2000.0 * p) *
         (1.0 / (t * t) + std::sqrt(p) / (3.0 * t));
}

struct CovConstants {
  double L = 0.0;
  double sigma_sq = 0.0;
};

/// L and the variance bound sigma^2. cov_norm and diag_norm are the spectral
/// norms of C_emp and diag(C_emp); rho defaults to 1.
inline CovConstants cov_constants(const BoundInputs& in, double cov_norm, double diag_norm) {
  in.validate();
  if (in.m < 2) throw ParameterError("cov_constants: needs m >= 2");
  const double p = static_cast<double>(in.p);
  const double m = static_cast<double>(in.m);
  const double n = static_cast<double>(in.n);
  const double rho = in.rho.value_or(1.0);
  const double col2 = in.stats.max_col_norm * in.stats.max_col_norm;
  const double max2 = in.stats.max_abs * in.stats.max_abs;
  const double frob2 = in.stats.frob_norm * in.stats.frob_norm;
  const double ratio = p * (p - 1.0) / (m * (m - 1.0));
  const double mm1sq = m * (m - 1.0) * (m - 1.0);

  CovConstants c;
  c.L = ((ratio * rho + 1.0) * col2 + p * (p - m) / (m * (m - 1.0)) * max2) / n;
  c.sigma_sq = ((ratio * rho - 1.0) * col2 * cov_norm +
                p * (p - 1.0) * (p - m) / mm1sq * rho * col2 * diag_norm +
                2.0 * p * (p - 1.0) * (p - m) / mm1sq * max2 * frob2 / n +
                p * (p - m) * (p - m) / mm1sq * in.stats.max_fourth_moment_row / n) /
               n;
  return c;
}

inline double cov_delta2(double t, double p, double L, double sigma_sq) {
  return p * std::exp(-(t * t / 2.0) / (sigma_sq + L * t / 3.0));
}

inline double cov_t_for_delta2(double delta2, double p, double L, double sigma_sq) {
  if (!(delta2 > 0.0)) throw ParameterError("cov_t_for_delta2: delta must be positive");
  return detail::bernstein_root(std::log(p / delta2), sigma_sq, L / 3.0, 1.0);
}

/// Failure probability for ||H_k - I||_2 <= t on a cluster of n_k points.
inline double hk_delta3(double t, std::size_t n_k, std::size_t p, std::size_t m) {
  if (m < 1 || m > p) throw ParameterError("hk_delta3: need 1 <= m <= p");
  const double r = static_cast<double>(p) / static_cast<double>(m);
  const double nk = static_cast<double>(n_k);
  return static_cast<double>(p) * std::exp(-(nk * t * t / 2.0) / ((r - 1.0) + (r + 1.0) * t / 3.0));
}

inline double hk_t_for_delta3(double delta3, std::size_t n_k, std::size_t p, std::size_t m) {
  if (m < 1 || m > p) throw ParameterError("hk_t_for_delta3: need 1 <= m <= p");
  if (!(delta3 > 0.0)) throw ParameterError("hk_t_for_delta3: delta must be positive");
  const double r = static_cast<double>(p) / static_cast<double>(m);
  const double l = std::log(static_cast<double>(p) / delta3);
  return detail::bernstein_root(l, r - 1.0, (r + 1.0) / 3.0, static_cast<double>(n_k));
}

/// Norm-reduction factor rho such that ||w_i||^2 <= rho ||x_i||^2 holds for
/// all n preconditioned columns with probability 1 - alpha.
inline double ros_rho(double alpha, double p, double n, double m, double eta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("ros_rho: alpha must be in (0, 1]");
  return (m / p) * (2.0 / eta) * std::log(2.0 * n * p / alpha);
}

/// Single-vector form of ros_rho.
inline double ros_rho_single(double alpha, double p, double m, double eta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("ros_rho_single: alpha must be in (0, 1]");
  return (m / p) * (2.0 / eta) * std::log(2.0 * p / alpha);
}

/// Sketch size above which sqrt(p/m)-scaled sampled ROS distances fall in
/// [kJlLower, kJlUpper] times the true distance with probability 1 - 3/beta.
inline double jl_min_m(double beta, double p) {
  if (!(beta > 1.0)) throw ParameterError("jl_min_m: beta must exceed 1");
  const double s = std::sqrt(beta) + std::sqrt(8.0 * std::log(beta * p));
  return 4.0 * s * s * std::log(beta);
}

inline constexpr double kJlLower = 0.40;
inline constexpr double kJlUpper = 1.48;

}  // namespace sketchpipe
