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

// Unbiased sample-mean and covariance estimators computed from a sparse
// sketch, plus the PCA helpers that consume them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"
#include "sketchpipe/parallel.hpp"
#include "sketchpipe/sketch.hpp"
#include "sketchpipe/transform.hpp"

namespace sketchpipe {

/// (p/m)(1/n) sum_i w_i, still in the preconditioned domain (length p_pad).
inline std::vector<double> estimate_mean_preconditioned(const SparseSketch& s) {
  if (s.n() == 0) throw DimensionError("estimate_mean: empty sketch");
  std::vector<double> sum(s.p(), 0.0);
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto idx = s.indices(i);
    const auto val = s.values(i);
    for (std::size_t t = 0; t < idx.size(); ++t) sum[idx[t]] += val[t];
  }
  const double scale = static_cast<double>(s.p()) / static_cast<double>(s.m());
  const double n = static_cast<double>(s.n());
  for (double& v : sum) v = v / n * scale;
  return sum;
}

/// Mean estimate mapped back to the original domain and truncated to p_raw.
inline std::vector<double> estimate_mean(const SparseSketch& s) {
  auto mean = estimate_mean_preconditioned(s);
  unprecondition_inplace(mean, s.spec());
  mean.resize(s.p_raw());
  return mean;
}

enum class CovarianceDomain { Preconditioned };

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;  // p_pad x p_pad, symmetric
  std::size_t n_used = 0;
  CovarianceDomain domain = CovarianceDomain::Preconditioned;
};

/// C_emp_hat = p(p-1)/(m(m-1)) (1/n) sum_i w_i w_i^T, then the diagonal is
/// debiased by subtracting (p-m)/(p-1) diag(C_emp_hat). Unbiased for
/// (1/n) Y Y^T of the preconditioned data. O(n m^2).
inline CovarianceEstimate estimate_covariance(const SparseSketch& s) {
  if (s.m() < 2) throw ParameterError("estimate_covariance: needs m >= 2");
  if (s.n() == 0) throw DimensionError("estimate_covariance: empty sketch");
  const std::size_t p = s.p();
  const std::size_t m = s.m();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));

  // Each worker owns a block of matrix columns and scans every sample, so
  // every entry is summed in sample order regardless of the worker count.
  parallel_for(p, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t i = 0; i < s.n(); ++i) {
      const auto idx = s.indices(i);
      const auto val = s.values(i);
      auto first = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(c0));
      for (auto a = static_cast<std::size_t>(first - idx.begin()); a < m && idx[a] < c1; ++a) {
        const double va = val[a];
        double* column = acc.data() + static_cast<std::size_t>(idx[a]) * p;
        for (std::size_t b = a; b < m; ++b) column[idx[b]] += va * val[b];
      }
    }
  }, 8);

  const double pd = static_cast<double>(p);
  const double md = static_cast<double>(m);
  const double scale = (pd * (pd - 1.0)) / (md * (md - 1.0));
  const double debias = (pd - md) / (pd - 1.0);
  const double n = static_cast<double>(s.n());
  CovarianceEstimate est;
  est.n_used = s.n();
  est.matrix.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t c = 0; c < p; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    const double d = scale * acc(ci, ci) / n;
    est.matrix(ci, ci) = d - debias * d;
    for (std::size_t r = c + 1; r < p; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      const double v = scale * acc(ri, ci) / n;
      est.matrix(ri, ci) = v;
      est.matrix(ci, ri) = v;
    }
  }
  return est;
}

/// (1/n) X X^T.
inline Eigen::MatrixXd sample_covariance(const DenseMatrix& x) {
  const auto xm = x.eigen();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(xm.rows(), xm.rows());
  c.selfadjointView<Eigen::Lower>().rankUpdate(xm);
  c.triangularView<Eigen::StrictlyUpper>() = c.transpose();
  return c / static_cast<double>(x.cols());
}

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // unit columns
};

inline void require_symmetric(const Eigen::MatrixXd& c, const char* who) {
  if (c.rows() != c.cols()) throw DimensionError(std::string(who) + ": matrix is not square");
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ParameterError(std::string(who) + ": matrix is not symmetric");
  }
}

/// Eigenpairs of the k largest eigenvalues of a symmetric matrix. Each
/// vector's largest-magnitude entry is made positive.
inline EigenPairs top_eigen(const Eigen::MatrixXd& c, std::size_t k) {
  require_symmetric(c, "top_eigenvectors");
  const auto p = static_cast<std::size_t>(c.rows());
  if (k < 1 || k > p) throw ParameterError("top_eigenvectors: need 1 <= k <= p");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success) throw ParameterError("top_eigenvectors: solver failed");
  EigenPairs out;
  out.values.resize(static_cast<Eigen::Index>(k));
  out.vectors.resize(c.rows(), static_cast<Eigen::Index>(k));
  for (std::size_t t = 0; t < k; ++t) {
    const auto src = static_cast<Eigen::Index>(p - 1 - t);
    const auto dst = static_cast<Eigen::Index>(t);
    out.values(dst) = solver.eigenvalues()(src);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.vectors.col(dst) = v;
  }
  return out;
}

inline Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& c, std::size_t k) {
  return top_eigen(c, k).vectors;
}

/// Largest absolute eigenvalue of a symmetric matrix.
inline double spectral_norm_symmetric(const Eigen::MatrixXd& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Top-k principal components of the sketch's covariance estimate, mapped
/// back through (HD)^T and truncated to the original dimension.
inline Eigen::MatrixXd principal_components(const SparseSketch& s, std::size_t k) {
  const auto cov = estimate_covariance(s);
  const auto pcs = top_eigen(cov.matrix, k).vectors;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s.p_raw()), static_cast<Eigen::Index>(k));
  std::vector<double> buf(s.p());
  for (Eigen::Index t = 0; t < pcs.cols(); ++t) {
    for (std::size_t j = 0; j < s.p(); ++j) buf[j] = pcs(static_cast<Eigen::Index>(j), t);
    unprecondition_inplace(buf, s.spec());
    for (std::size_t j = 0; j < s.p_raw(); ++j) out(static_cast<Eigen::Index>(j), t) = buf[j];
  }
  return out;
}

/// trace(U^T X X^T U) / trace(X X^T).
inline double explained_variance(const Eigen::MatrixXd& u, const DenseMatrix& x) {
  if (static_cast<std::size_t>(u.rows()) != x.rows()) {
    throw DimensionError("explained_variance: U rows must match X rows");
  }
  const auto xm = x.eigen();
  const double total = xm.squaredNorm();
  if (total == 0.0) throw DimensionError("explained_variance: X is zero");
  return (u.transpose() * xm).squaredNorm() / total;
}

/// Number of true PCs matched by an estimated PC with |<u_true, u_est>| above
/// the threshold. Pairs are formed greedily by largest overlap, each
/// estimated PC used at most once.
inline std::size_t recovered_pc_count(const Eigen::MatrixXd& u_est, const Eigen::MatrixXd& u_true,
                                      double threshold = 0.95) {
  if (u_est.rows() != u_true.rows()) throw DimensionError("recovered_pc_count: row mismatch");
  Eigen::MatrixXd g = (u_true.transpose() * u_est).cwiseAbs();
  std::size_t count = 0;
  const Eigen::Index pairs = std::min(g.rows(), g.cols());
  for (Eigen::Index step = 0; step < pairs; ++step) {
    Eigen::Index r = 0, c = 0;
    const double best = g.maxCoeff(&r, &c);
    if (best < 0) break;
    if (best > threshold) ++count;
    g.row(r).setConstant(-1.0);
    g.col(c).setConstant(-1.0);
  }
  return count;
}

}  // namespace sketchpipe
