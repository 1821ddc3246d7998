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

// Seeded synthetic data generators. Every column draws from its own derived
// stream, so output does not depend on the worker count.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"
#include "sketchpipe/parallel.hpp"
#include "sketchpipe/random.hpp"

namespace sketchpipe {

namespace detail {

inline constexpr std::uint64_t kBasisStream = 0x4241534953000000ULL;
inline constexpr std::uint64_t kColumnStream = 0x434f4c0000000000ULL;
inline constexpr std::uint64_t kCenterStream = 0x43454e5400000000ULL;

inline double std_normal(SplitMix64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  return nd(rng);
}

inline SplitMix64 column_rng(std::uint64_t seed, std::size_t i) {
  return SplitMix64(derive_seed(derive_seed(seed, kColumnStream), i));
}

// z = L e for the lower Cholesky factor L of C_ij = 2 * 0.5^|i-j|, written as
// the AR(1) recursion it reduces to.
inline void ar1_apply(std::span<const double> e, std::span<double> z) {
  if (e.empty()) return;
  z[0] = std::sqrt(2.0) * e[0];
  const double s = std::sqrt(1.5);
  for (std::size_t j = 1; j < e.size(); ++j) z[j] = 0.5 * z[j - 1] + s * e[j];
}

}  // namespace detail

struct SpikedData {
  DenseMatrix x;
  Eigen::MatrixXd u;  // p x k orthonormal principal components
};

/// x_i = sum_j kappa_ij lambda_j u_j with kappa ~ N(0, 1). The components are
/// orthonormalized Gaussian vectors, or k distinct random canonical basis
/// vectors when canonical_basis is set.
inline SpikedData gen_spiked(std::size_t p, std::size_t n, std::size_t k, const std::vector<double>& lambdas,
                             std::uint64_t seed, bool canonical_basis = false) {
  if (k < 1 || k > p) throw ParameterError("gen_spiked: need 1 <= k <= p");
  if (lambdas.size() != k) throw ParameterError("gen_spiked: need k lambdas");
  SpikedData out;
  const auto pi = static_cast<Eigen::Index>(p);
  const auto ki = static_cast<Eigen::Index>(k);
  SplitMix64 brng(derive_seed(seed, detail::kBasisStream));
  if (canonical_basis) {
    std::vector<std::size_t> perm(p);
    for (std::size_t j = 0; j < p; ++j) perm[j] = j;
    out.u = Eigen::MatrixXd::Zero(pi, ki);
    for (std::size_t t = 0; t < k; ++t) {
      const auto r = t + static_cast<std::size_t>(uniform_below(brng, p - t));
      std::swap(perm[t], perm[r]);
      out.u(static_cast<Eigen::Index>(perm[t]), static_cast<Eigen::Index>(t)) = 1.0;
    }
  } else {
    Eigen::MatrixXd g(pi, ki);
    for (Eigen::Index c = 0; c < ki; ++c) {
      for (Eigen::Index r = 0; r < pi; ++r) g(r, c) = detail::std_normal(brng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    out.u = qr.householderQ() * Eigen::MatrixXd::Identity(pi, ki);
  }
  Eigen::MatrixXd scaled = out.u;
  for (std::size_t t = 0; t < k; ++t) scaled.col(static_cast<Eigen::Index>(t)) *= lambdas[t];
  out.x.resize(p, n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    Eigen::VectorXd kappa(ki);
    for (std::size_t i = b; i < e; ++i) {
      auto rng = detail::column_rng(seed, i);
      for (Eigen::Index t = 0; t < ki; ++t) kappa(t) = detail::std_normal(rng);
      Eigen::Map<Eigen::VectorXd>(out.x.col(i).data(), pi) = scaled * kappa;
    }
  });
  return out;
}

/// C_ij = 2 * 0.5^|i-j|.
inline Eigen::MatrixXd t_scale_matrix(std::size_t p) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          2.0 * std::pow(0.5, std::abs(static_cast<double>(i) - static_cast<double>(j)));
    }
  }
  return c;
}

/// Multivariate t with dof degrees of freedom, zero location and scale
/// matrix C_ij = 2 * 0.5^|i-j|: x = z / sqrt(u / dof), z ~ N(0, C),
/// u ~ chi^2_dof.
inline DenseMatrix gen_multivariate_t(std::size_t p, std::size_t n, double dof, std::uint64_t seed) {
  if (!(dof > 0.0)) throw ParameterError("gen_multivariate_t: dof must be positive");
  if (p == 0) throw ParameterError("gen_multivariate_t: p must be positive");
  DenseMatrix x(p, n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    std::vector<double> g(p);
    for (std::size_t i = b; i < e; ++i) {
      auto rng = detail::column_rng(seed, i);
      for (double& v : g) v = detail::std_normal(rng);
      std::chi_squared_distribution<double> chi(dof);
      const double u = chi(rng);
      auto col = x.col(i);
      detail::ar1_apply(g, col);
      const double scale = 1.0 / std::sqrt(u / dof);
      for (double& v : col) v *= scale;
    }
  });
  return x;
}

struct ClusterData {
  DenseMatrix x;
  std::vector<std::uint32_t> labels;
  DenseMatrix centers;  // p x K
};

/// K Gaussian blobs: centers with N(0, separation^2) entries, uniform
/// membership, isotropic N(0, noise_sigma^2) noise.
inline ClusterData gen_clusters(std::size_t p, std::size_t n, std::size_t K, double separation,
                                double noise_sigma, std::uint64_t seed) {
  if (K < 1) throw ParameterError("gen_clusters: K must be positive");
  if (noise_sigma < 0.0) throw ParameterError("gen_clusters: noise_sigma must be non-negative");
  ClusterData out;
  out.centers.resize(p, K);
  SplitMix64 crng(derive_seed(seed, detail::kCenterStream));
  for (std::size_t k = 0; k < K; ++k) {
    for (double& v : out.centers.col(k)) v = separation * detail::std_normal(crng);
  }
  out.x.resize(p, n);
  out.labels.resize(n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto rng = detail::column_rng(seed, i);
      const auto k = static_cast<std::uint32_t>(uniform_below(rng, K));
      out.labels[i] = k;
      const auto c = out.centers.col(k);
      auto col = out.x.col(i);
      for (std::size_t j = 0; j < p; ++j) col[j] = c[j] + noise_sigma * detail::std_normal(rng);
    }
  });
  return out;
}

struct MeanNoiseData {
  DenseMatrix x;
  std::vector<double> mean;
};

/// x_i = mean + eps_i with eps_i ~ N(0, I).
inline MeanNoiseData gen_mean_plus_noise(std::vector<double> mean, std::size_t n, std::uint64_t seed) {
  MeanNoiseData out;
  out.mean = std::move(mean);
  const std::size_t p = out.mean.size();
  out.x.resize(p, n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto rng = detail::column_rng(seed, i);
      auto col = out.x.col(i);
      for (std::size_t j = 0; j < p; ++j) col[j] = out.mean[j] + detail::std_normal(rng);
    }
  });
  return out;
}

/// x_i = xbar + eps_i with xbar ~ N(0, I) drawn once and eps_i ~ N(0, I).
inline MeanNoiseData gen_mean_plus_noise(std::size_t p, std::size_t n, std::uint64_t seed) {
  std::vector<double> mean(p);
  SplitMix64 mrng(derive_seed(seed, detail::kCenterStream));
  for (double& v : mean) v = detail::std_normal(mrng);
  return gen_mean_plus_noise(std::move(mean), n, seed);
}

}  // namespace sketchpipe
