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

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sketchpipe/bounds.hpp"
#include "sketchpipe/cluster.hpp"
#include "sketchpipe/datagen.hpp"
#include "sketchpipe/estimators.hpp"
#include "sketchpipe/idx.hpp"
#include "sketchpipe/sketch.hpp"

namespace sketchpipe::experiments {

// ---------------------------------------------------------------- CSV

inline std::string csv_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string cell(const std::string& s) { return s; }
inline std::string cell(const char* s) { return s; }
inline std::string cell(double v) { return csv_number(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }
template <class T>
  requires std::is_integral_v<T>
std::string cell(T v) {
  return std::to_string(v);
}

/// RFC 4180 table: header row, CRLF line ends, '.' decimal separator.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw DimensionError("CsvTable: row width does not match header");
    rows_.push_back(std::move(cells));
  }

  template <class... T>
  void add_row(const T&... v) {
    add({cell(v)...});
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c) out += ',';
        out += csv_escape(cells[c]);
      }
      out += "\r\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    const std::string s = str();
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw IoError("write failed: " + path.string());
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---------------------------------------------------------------- helpers

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

inline double min_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

inline std::size_t scaled(std::size_t v, double s) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(v) * s)));
}

inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t n, std::uint64_t trial) {
  return derive_seed(derive_seed(seed, n), trial);
}

namespace detail {

inline constexpr std::uint64_t kSignSalt = 1;
inline constexpr std::uint64_t kSampleSalt = 2;
inline constexpr std::uint64_t kMeanSalt = 3;
inline constexpr std::uint64_t kColumnSalt = 4;

inline SparseSketch sketch_matrix(const DenseMatrix& x, TransformKind kind, double gamma, std::uint64_t seed) {
  const auto spec = PreconditionSpec::make(kind, x.rows(), derive_seed(seed, kSignSalt));
  const auto plan = SamplingPlan::from_gamma(gamma, spec.p_pad, derive_seed(seed, kSampleSalt));
  MatrixSource src(x);
  return sketch_stream(src, spec, plan);
}

inline std::vector<double> row_means(const DenseMatrix& x) {
  std::vector<double> mu(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.cols(); ++i) {
    const auto c = x.col(i);
    for (std::size_t j = 0; j < x.rows(); ++j) mu[j] += c[j];
  }
  for (double& v : mu) v /= static_cast<double>(x.cols());
  return mu;
}

}  // namespace detail

// ---------------------------------------------------------------- mean estimator

/// Sample-mean error against the closed-form bound. Data x_i = xbar + eps_i
/// with xbar fixed across runs; each run draws fresh noise and sampling.
struct MeanErrorParams {
  std::size_t p = 100;
  double gamma = 0.3;
  double delta1 = 1e-3;
  std::vector<std::size_t> ns{100, 1000, 10000};
  std::size_t trials = 1000;
  TransformKind kind = TransformKind::None;
  std::uint64_t seed = 1;

  void scale(double s) {
    for (auto& n : ns) n = scaled(n, s);
    trials = scaled(trials, s);
  }
};

struct MeanErrorRow {
  std::size_t n = 0;
  std::size_t m = 0;
  double mean_err = 0.0;     // average over runs of the l_inf error
  double max_err = 0.0;      // maximum over runs
  double bound_t = 0.0;      // average over runs of t(delta1)
  double bound_t_min = 0.0;  // smallest per-run t
  std::size_t exceed = 0;    // runs whose error exceeded their own t
};

inline std::vector<MeanErrorRow> run_mean_error(const MeanErrorParams& prm) {
  std::vector<double> xbar(prm.p);
  SplitMix64 mrng(derive_seed(prm.seed, detail::kMeanSalt));
  for (double& v : xbar) v = sketchpipe::detail::std_normal(mrng);

  std::vector<MeanErrorRow> rows;
  for (std::size_t n : prm.ns) {
    MeanErrorRow row;
    row.n = n;
    std::vector<double> errs, ts;
    for (std::size_t r = 0; r < prm.trials; ++r) {
      const auto s = trial_seed(prm.seed, n, r);
      const auto x = gen_mean_plus_noise(xbar, n, s).x;
      const auto sk = detail::sketch_matrix(x, prm.kind, prm.gamma, s);
      const auto y = precondition_matrix(x, sk.spec());
      const auto truth = detail::row_means(y);
      const auto est = estimate_mean_preconditioned(sk);
      double err = 0.0;
      for (std::size_t j = 0; j < truth.size(); ++j) err = std::max(err, std::abs(est[j] - truth[j]));
      BoundInputs in;
      in.p = sk.p();
      in.m = sk.m();
      in.n = n;
      in.eta = eta(sk.spec());
      in.stats = compute_stats(y);
      const double t = mean_t_for_delta1(prm.delta1, in);
      row.m = sk.m();
      row.exceed += err > t;
      errs.push_back(err);
      ts.push_back(t);
    }
    row.mean_err = mean_of(errs);
    row.max_err = max_of(errs);
    row.bound_t = mean_of(ts);
    row.bound_t_min = min_of(ts);
    rows.push_back(row);
  }
  return rows;
}

inline CsvTable mean_error_csv(const std::vector<MeanErrorRow>& rows) {
  CsvTable t({"n", "m", "mean_err", "max_err", "bound_t", "bound_t_min", "exceed_count"});
  for (const auto& r : rows) t.add_row(r.n, r.m, r.mean_err, r.max_err, r.bound_t, r.bound_t_min, r.exceed);
  return t;
}

// ---------------------------------------------------------------- covariance estimator

struct CovPoint {
  std::size_t n = 0;
  double gamma = 0.3;
  TransformKind kind = TransformKind::DCT;
};

/// Covariance error ||C_hat - C_emp||_2 in the preconditioned domain against
/// the closed-form bound at delta2. Spiked-model data are regenerated every
/// run and shared by all points with the same n.
struct CovErrorParams {
  std::size_t p = 200;
  std::size_t k = 5;
  std::vector<double> lambdas{10, 8, 6, 4, 2};
  bool canonical_basis = false;
  double delta2 = 0.01;
  std::size_t trials = 50;
  std::uint64_t seed = 1;
  std::vector<CovPoint> points;

  void scale(double s) {
    for (auto& pt : points) pt.n = scaled(pt.n, s);
    trials = scaled(trials, s);
  }
};

struct CovErrorRow {
  CovPoint point;
  std::size_t m = 0;
  double mean_err = 0.0;
  double max_err = 0.0;
  double bound_t = 0.0;  // average over runs
  double bound_t_min = 0.0;
  std::size_t exceed = 0;
};

inline std::vector<CovErrorRow> run_cov_error(const CovErrorParams& prm) {
  const std::size_t np = prm.points.size();
  std::vector<std::vector<double>> errs(np), ts(np);
  std::vector<CovErrorRow> rows(np);
  for (std::size_t q = 0; q < np; ++q) rows[q].point = prm.points[q];

  std::vector<std::size_t> ns;
  for (const auto& pt : prm.points) {
    if (std::find(ns.begin(), ns.end(), pt.n) == ns.end()) ns.push_back(pt.n);
  }
  for (std::size_t r = 0; r < prm.trials; ++r) {
    for (std::size_t n : ns) {
      const auto s = trial_seed(prm.seed, n, r);
      const auto x = gen_spiked(prm.p, n, prm.k, prm.lambdas, s, prm.canonical_basis).x;
      for (TransformKind kind : {TransformKind::None, TransformKind::Hadamard, TransformKind::DCT}) {
        std::vector<std::size_t> mine;
        for (std::size_t q = 0; q < np; ++q) {
          if (prm.points[q].n == n && prm.points[q].kind == kind) mine.push_back(q);
        }
        if (mine.empty()) continue;
        const auto spec = PreconditionSpec::make(kind, prm.p, derive_seed(s, detail::kSignSalt));
        const auto y = precondition_matrix(x, spec);
        const Eigen::MatrixXd c_emp = sample_covariance(y);
        const double cov_norm = spectral_norm_symmetric(c_emp);
        const double diag_norm = c_emp.diagonal().cwiseAbs().maxCoeff();
        const auto stats = compute_stats(y);
        for (std::size_t q : mine) {
          const auto sk = detail::sketch_matrix(x, kind, prm.points[q].gamma, s);
          const auto est = estimate_covariance(sk);
          const double err = spectral_norm_symmetric(est.matrix - c_emp);
          double rho = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            double w2 = 0.0, y2 = 0.0;
            for (double v : sk.values(i)) w2 += v * v;
            for (double v : y.col(i)) y2 += v * v;
            if (y2 > 0.0) rho = std::max(rho, w2 / y2);
          }
          BoundInputs in;
          in.p = sk.p();
          in.m = sk.m();
          in.n = n;
          in.eta = eta(spec);
          in.stats = stats;
          in.rho = std::clamp(rho, std::numeric_limits<double>::min(), 1.0);
          const auto c = cov_constants(in, cov_norm, diag_norm);
          const double t = cov_t_for_delta2(prm.delta2, static_cast<double>(sk.p()), c.L, c.sigma_sq);
          rows[q].m = sk.m();
          rows[q].exceed += err > t;
          errs[q].push_back(err);
          ts[q].push_back(t);
        }
      }
    }
  }
  for (std::size_t q = 0; q < np; ++q) {
    rows[q].mean_err = mean_of(errs[q]);
    rows[q].max_err = max_of(errs[q]);
    rows[q].bound_t = mean_of(ts[q]);
    rows[q].bound_t_min = min_of(ts[q]);
  }
  return rows;
}

inline CsvTable cov_error_csv(const std::vector<CovErrorRow>& rows) {
  CsvTable t({"n", "gamma", "m", "transform", "mean_err", "max_err", "bound_t", "bound_t_min", "exceed_count"});
  for (const auto& r : rows) {
    t.add_row(r.point.n, r.point.gamma, r.m, to_string(r.point.kind), r.mean_err, r.max_err, r.bound_t,
              r.bound_t_min, r.exceed);
  }
  return t;
}

/// Error versus n at fixed gamma.
inline CovErrorParams fig3a_params() {
  CovErrorParams prm;
  for (std::size_t f : {1u, 2u, 5u, 10u, 20u}) prm.points.push_back({f * prm.p, 0.3, TransformKind::DCT});
  return prm;
}

/// Error versus gamma at n = 10p.
inline CovErrorParams fig3b_params() {
  CovErrorParams prm;
  for (double g : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) prm.points.push_back({10 * prm.p, g, TransformKind::DCT});
  return prm;
}

/// Canonical-basis components, with and without preconditioning.
inline CovErrorParams fig4_params() {
  CovErrorParams prm;
  prm.p = 512;
  prm.k = 10;
  prm.lambdas = {10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  prm.canonical_basis = true;
  prm.trials = 100;
  for (double g : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    prm.points.push_back({1024, g, TransformKind::Hadamard});
    prm.points.push_back({1024, g, TransformKind::None});
  }
  return prm;
}

// ---------------------------------------------------------------- PC recovery

struct PcRecoveryParams {
  std::size_t p = 512;
  std::size_t n = 1024;
  std::vector<double> lambdas{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  std::vector<double> gammas{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<TransformKind> kinds{TransformKind::Hadamard, TransformKind::None};
  double threshold = 0.95;
  std::size_t trials = 100;
  std::uint64_t seed = 1;

  void scale(double s) {
    n = scaled(n, s);
    trials = scaled(trials, s);
  }
};

struct PcRecoveryRow {
  double gamma = 0.0;
  TransformKind kind = TransformKind::None;
  std::size_t m = 0;
  double mean_recovered = 0.0;
  double std_recovered = 0.0;
  double min_recovered = 0.0;
};

inline std::vector<PcRecoveryRow> run_pc_recovery(const PcRecoveryParams& prm) {
  const std::size_t k = prm.lambdas.size();
  const std::size_t nq = prm.gammas.size() * prm.kinds.size();
  std::vector<std::vector<double>> counts(nq);
  std::vector<PcRecoveryRow> rows(nq);
  for (std::size_t r = 0; r < prm.trials; ++r) {
    const auto s = trial_seed(prm.seed, prm.n, r);
    const auto data = gen_spiked(prm.p, prm.n, k, prm.lambdas, s, true);
    std::size_t q = 0;
    for (double g : prm.gammas) {
      for (TransformKind kind : prm.kinds) {
        const auto sk = detail::sketch_matrix(data.x, kind, g, s);
        const auto u = principal_components(sk, k);
        counts[q].push_back(static_cast<double>(recovered_pc_count(u, data.u, prm.threshold)));
        rows[q].gamma = g;
        rows[q].kind = kind;
        rows[q].m = sk.m();
        ++q;
      }
    }
  }
  for (std::size_t q = 0; q < nq; ++q) {
    rows[q].mean_recovered = mean_of(counts[q]);
    rows[q].std_recovered = std_of(counts[q]);
    rows[q].min_recovered = min_of(counts[q]);
  }
  return rows;
}

inline CsvTable pc_recovery_csv(const std::vector<PcRecoveryRow>& rows) {
  CsvTable t({"gamma", "m", "preconditioned", "transform", "mean_recovered", "std_recovered", "min_recovered"});
  for (const auto& r : rows) {
    t.add_row(r.gamma, r.m, r.kind != TransformKind::None, to_string(r.kind), r.mean_recovered, r.std_recovered,
              r.min_recovered);
  }
  return t;
}

// ---------------------------------------------------------------- explained variance

/// Explained variance of k estimated PCs on multivariate-t data:
/// precondition + sample versus uniform sampling of gamma * n whole columns
/// (the same number of stored entries).
struct ExplainedVarianceParams {
  std::size_t p = 512;
  std::size_t n = 1024;
  double dof = 1.0;
  std::size_t k = 10;
  std::vector<double> gammas{0.1, 0.2, 0.3, 0.4, 0.5};
  std::size_t trials = 200;
  TransformKind kind = TransformKind::Hadamard;
  std::uint64_t seed = 1;

  void scale(double s) {
    n = scaled(n, s);
    trials = scaled(trials, s);
  }
};

struct ExplainedVarianceRow {
  double gamma = 0.0;
  std::string method;
  double mean_ev = 0.0;
  double std_ev = 0.0;
  double min_ev = 0.0;
};

inline constexpr const char* kPreconditionSample = "precondition_sample";
inline constexpr const char* kUniformColumns = "uniform_columns";

/// Top-k left singular vectors of c uniformly chosen columns.
inline Eigen::MatrixXd column_sample_pcs(const DenseMatrix& x, std::size_t c, std::size_t k, std::uint64_t seed) {
  const SamplingPlan plan{seed, x.cols(), c};
  const auto cols = sample_indices(plan, 0);
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(c));
  for (std::size_t t = 0; t < c; ++t) {
    const auto src = x.col(cols[t]);
    for (std::size_t j = 0; j < x.rows(); ++j) xs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = src[j];
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(std::min<Eigen::Index>(static_cast<Eigen::Index>(k), svd.matrixU().cols()));
}

inline std::vector<ExplainedVarianceRow> run_explained_variance(const ExplainedVarianceParams& prm) {
  const std::size_t ng = prm.gammas.size();
  std::vector<std::vector<double>> ours(ng), cols(ng);
  for (std::size_t r = 0; r < prm.trials; ++r) {
    const auto s = trial_seed(prm.seed, prm.n, r);
    const auto x = gen_multivariate_t(prm.p, prm.n, prm.dof, s);
    for (std::size_t g = 0; g < ng; ++g) {
      const auto sk = detail::sketch_matrix(x, prm.kind, prm.gammas[g], s);
      ours[g].push_back(explained_variance(principal_components(sk, prm.k), x));
      const double c = static_cast<double>(sk.m()) * static_cast<double>(prm.n) / static_cast<double>(sk.p());
      const auto nc = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(c)), 1, prm.n);
      cols[g].push_back(explained_variance(column_sample_pcs(x, nc, prm.k, derive_seed(s, detail::kColumnSalt)), x));
    }
  }
  std::vector<ExplainedVarianceRow> rows;
  for (std::size_t g = 0; g < ng; ++g) {
    rows.push_back({prm.gammas[g], kPreconditionSample, mean_of(ours[g]), std_of(ours[g]), min_of(ours[g])});
    rows.push_back({prm.gammas[g], kUniformColumns, mean_of(cols[g]), std_of(cols[g]), min_of(cols[g])});
  }
  return rows;
}

inline CsvTable explained_variance_csv(const std::vector<ExplainedVarianceRow>& rows) {
  CsvTable t({"gamma", "method", "mean_explained_variance", "std_explained_variance", "min_explained_variance"});
  for (const auto& r : rows) t.add_row(r.gamma, r.method, r.mean_ev, r.std_ev, r.min_ev);
  return t;
}

// ---------------------------------------------------------------- H_k concentration

struct HkParams {
  std::size_t p = 100;
  double gamma = 0.3;
  double delta3 = 1e-3;
  std::vector<std::size_t> ns{100, 1000, 10000};
  std::size_t trials = 1000;
  std::uint64_t seed = 1;

  void scale(double s) {
    for (auto& n : ns) n = scaled(n, s);
    trials = scaled(trials, s);
  }
};

struct HkRow {
  std::size_t n = 0;
  std::size_t m = 0;
  double mean_dev = 0.0;
  double max_dev = 0.0;
  double bound_t = 0.0;
};

/// ||H_k - I||_2 of one cluster of n points, with m of p coordinates drawn
/// per point.
inline double hk_deviation_sampled(const SamplingPlan& plan, std::size_t n) {
  std::vector<std::uint64_t> counts(plan.p, 0);
  std::vector<std::uint32_t> idx(plan.m);
  for (std::size_t i = 0; i < n; ++i) {
    sample_indices_into(plan, i, idx);
    for (auto j : idx) ++counts[j];
  }
  const double scale = static_cast<double>(plan.p) / (static_cast<double>(plan.m) * static_cast<double>(n));
  double dev = 0.0;
  for (auto c : counts) dev = std::max(dev, std::abs(scale * static_cast<double>(c) - 1.0));
  return dev;
}

inline std::vector<HkRow> run_hk(const HkParams& prm) {
  std::vector<HkRow> rows;
  for (std::size_t n : prm.ns) {
    HkRow row;
    row.n = n;
    const auto base = SamplingPlan::from_gamma(prm.gamma, prm.p, 0);
    row.m = base.m;
    std::vector<double> devs(prm.trials);
    parallel_for(prm.trials, [&](std::size_t b, std::size_t e) {
      for (std::size_t r = b; r < e; ++r) {
        devs[r] = hk_deviation_sampled(SamplingPlan{trial_seed(prm.seed, n, r), prm.p, base.m}, n);
      }
    });
    row.mean_dev = mean_of(devs);
    row.max_dev = max_of(devs);
    row.bound_t = hk_t_for_delta3(prm.delta3, n, prm.p, base.m);
    rows.push_back(row);
  }
  return rows;
}

inline CsvTable hk_csv(const std::vector<HkRow>& rows) {
  CsvTable t({"n", "m", "mean_dev", "max_dev", "bound_t"});
  for (const auto& r : rows) t.add_row(r.n, r.m, r.mean_dev, r.max_dev, r.bound_t);
  return t;
}

// ---------------------------------------------------------------- clustering speed

struct ClusterSpeedParams {
  std::size_t p = 512;
  std::size_t n = 100000;
  std::size_t K = 5;
  double gamma = 0.05;
  double separation = 1.0;
  double noise_sigma = 0.5;
  std::size_t n_init = 3;
  TransformKind kind = TransformKind::Hadamard;
  std::uint64_t seed = 1;

  void scale(double s) { n = scaled(n, s); }
};

struct ClusterSpeedResult {
  std::size_t n = 0, p = 0, K = 0, m = 0;
  double gamma = 0.0;
  double agreement = 0.0;  // sparsified vs full labels, best matching
  double accuracy_full = 0.0;
  double accuracy_sparsified = 0.0;
  double seconds_per_iteration_full = 0.0;
  double seconds_per_iteration_sparsified = 0.0;
  double speedup = 0.0;
  std::size_t iterations_full = 0;
  std::size_t iterations_sparsified = 0;
  double sketch_seconds = 0.0;
};

inline ClusterSpeedResult run_cluster_speed(const ClusterSpeedParams& prm) {
  const auto data = gen_clusters(prm.p, prm.n, prm.K, prm.separation, prm.noise_sigma, prm.seed);
  KMeansOptions o;
  o.n_init = prm.n_init;
  o.seed = prm.seed;
  o.transform = prm.kind;
  const auto full = lloyd_full(data.x, prm.K, o);
  MatrixSource src(data.x);
  const auto sparse = sparsified_kmeans(src, prm.K, prm.gamma, o);
  ClusterSpeedResult r;
  r.n = prm.n;
  r.p = prm.p;
  r.K = prm.K;
  r.gamma = prm.gamma;
  r.m = SamplingPlan::from_gamma(prm.gamma, PreconditionSpec::make(prm.kind, prm.p, 0).p_pad, 0).m;
  r.agreement = clustering_accuracy(sparse.assignments.labels, full.assignments.labels);
  r.accuracy_full = clustering_accuracy(full.assignments.labels, data.labels);
  r.accuracy_sparsified = clustering_accuracy(sparse.assignments.labels, data.labels);
  r.seconds_per_iteration_full = full.diagnostics.seconds_per_iteration();
  r.seconds_per_iteration_sparsified = sparse.diagnostics.seconds_per_iteration();
  r.speedup = r.seconds_per_iteration_sparsified > 0.0
                  ? r.seconds_per_iteration_full / r.seconds_per_iteration_sparsified
                  : 0.0;
  r.iterations_full = full.diagnostics.total_iterations;
  r.iterations_sparsified = sparse.diagnostics.total_iterations;
  r.sketch_seconds = sparse.diagnostics.sketch_seconds;
  return r;
}

inline CsvTable cluster_speed_csv(const ClusterSpeedResult& r) {
  CsvTable t({"n", "p", "K", "gamma", "m", "agreement", "accuracy_full", "accuracy_sparsified",
              "seconds_per_iteration_full", "seconds_per_iteration_sparsified", "speedup", "iterations_full",
              "iterations_sparsified", "sketch_seconds"});
  t.add_row(r.n, r.p, r.K, r.gamma, r.m, r.agreement, r.accuracy_full, r.accuracy_sparsified,
            r.seconds_per_iteration_full, r.seconds_per_iteration_sparsified, r.speedup, r.iterations_full,
            r.iterations_sparsified, r.sketch_seconds);
  return t;
}

// ---------------------------------------------------------------- clustering accuracy

enum class Method { Full, Sparsified, SparsifiedRaw, TwoPass, FeatureExtraction, FeatureSelection };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Full: return "kmeans";
    case Method::Sparsified: return "sparsified";
    case Method::SparsifiedRaw: return "sparsified_no_precondition";
    case Method::TwoPass: return "sparsified_2pass";
    case Method::FeatureExtraction: return "feature_extraction";
    case Method::FeatureSelection: return "feature_selection_exact_svd";
  }
  return "?";
}

inline std::vector<Method> all_methods() {
  return {Method::Full, Method::Sparsified, Method::SparsifiedRaw, Method::TwoPass, Method::FeatureExtraction,
          Method::FeatureSelection};
}

/// Runs one clustering method on an in-memory matrix. gamma sets the sketch
/// size (or projection size m = round(gamma p) for the feature baselines)
/// and is ignored by Full.
inline KMeansResult run_method(Method method, const DenseMatrix& x, std::size_t K, double gamma,
                               KMeansOptions opts) {
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(gamma * static_cast<double>(x.rows()))));
  switch (method) {
    case Method::Full:
      return lloyd_full(x, K, opts);
    case Method::Sparsified: {
      MatrixSource src(x);
      return sparsified_kmeans(src, K, gamma, opts);
    }
    case Method::SparsifiedRaw: {
      opts.transform = TransformKind::None;
      MatrixSource src(x);
      return sparsified_kmeans(src, K, gamma, opts);
    }
    case Method::TwoPass: {
      MatrixSource src(x);
      return sparsified_kmeans_two_pass(src, K, gamma, opts);
    }
    case Method::FeatureExtraction:
      return feature_extraction_baseline(x, K, m, opts);
    case Method::FeatureSelection:
      return feature_selection_exact_svd(x, K, m, opts);
  }
  throw ParameterError("run_method: unknown method");
}

struct AccuracyParams {
  std::size_t K = 3;
  std::vector<double> gammas{0.05, 0.1, 0.2, 0.3};
  std::vector<Method> methods = all_methods();
  std::size_t replicates = 10;
  std::size_t n_init = 5;
  std::uint64_t seed = 1;

  void scale(double s) { replicates = scaled(replicates, s); }
};

struct AccuracyRecord {
  Method method = Method::Full;
  double gamma = 1.0;
  std::size_t replicate = 0;
  double accuracy = 0.0;
  double objective = 0.0;
  double seconds = 0.0;  // iteration phase
  std::size_t passes = 0;
};

struct AccuracySummary {
  Method method = Method::Full;
  double gamma = 1.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_seconds = 0.0;
  std::size_t replicates = 0;
};

/// Per-replicate accuracy of each method; replicate r uses seed
/// derive_seed(seed, r) for every method. Full runs once per replicate.
inline std::vector<AccuracyRecord> run_accuracy(const DenseMatrix& x, const std::vector<std::uint32_t>& truth,
                                                const AccuracyParams& prm) {
  std::vector<AccuracyRecord> out;
  for (std::size_t r = 0; r < prm.replicates; ++r) {
    KMeansOptions o;
    o.n_init = prm.n_init;
    o.seed = derive_seed(prm.seed, r);
    for (Method method : prm.methods) {
      const std::vector<double> gs = method == Method::Full ? std::vector<double>{1.0} : prm.gammas;
      for (double g : gs) {
        const auto res = run_method(method, x, prm.K, g, o);
        out.push_back({method, g, r, clustering_accuracy(res.assignments.labels, truth), res.diagnostics.objective,
                       res.diagnostics.iterate_seconds, res.diagnostics.passes});
      }
    }
  }
  return out;
}

inline std::vector<AccuracySummary> summarize(const std::vector<AccuracyRecord>& recs) {
  std::vector<AccuracySummary> out;
  std::vector<std::vector<double>> acc, sec;
  for (const auto& rec : recs) {
    std::size_t q = 0;
    while (q < out.size() && !(out[q].method == rec.method && out[q].gamma == rec.gamma)) ++q;
    if (q == out.size()) {
      out.push_back({rec.method, rec.gamma, 0.0, 0.0, 0.0, 0});
      acc.emplace_back();
      sec.emplace_back();
    }
    acc[q].push_back(rec.accuracy);
    sec[q].push_back(rec.seconds);
  }
  for (std::size_t q = 0; q < out.size(); ++q) {
    out[q].mean_accuracy = mean_of(acc[q]);
    out[q].std_accuracy = std_of(acc[q]);
    out[q].mean_seconds = mean_of(sec[q]);
    out[q].replicates = acc[q].size();
  }
  return out;
}

inline const AccuracySummary* find_summary(const std::vector<AccuracySummary>& s, Method m, double gamma) {
  for (const auto& row : s) {
    if (row.method == m && (m == Method::Full || std::abs(row.gamma - gamma) < 1e-12)) return &row;
  }
  return nullptr;
}

inline CsvTable accuracy_csv(const std::vector<AccuracyRecord>& recs) {
  CsvTable t({"method", "gamma", "replicate", "accuracy", "objective", "iterate_seconds", "passes"});
  for (const auto& r : recs) {
    t.add_row(to_string(r.method), r.gamma, r.replicate, r.accuracy, r.objective, r.seconds, r.passes);
  }
  return t;
}

inline CsvTable accuracy_summary_csv(const std::vector<AccuracySummary>& rows) {
  CsvTable t({"method", "gamma", "replicates", "mean_accuracy", "std_accuracy", "mean_iterate_seconds"});
  for (const auto& r : rows) {
    t.add_row(to_string(r.method), r.gamma, r.replicates, r.mean_accuracy, r.std_accuracy, r.mean_seconds);
  }
  return t;
}

inline const std::vector<int>& mnist_digits() {
  static const std::vector<int> d{0, 3, 9};
  return d;
}

inline LabeledImages load_mnist_or_throw(const std::string& dir) {
  auto data = load_mnist_digits(dir, mnist_digits());
  if (!data) {
    throw IoError("no MNIST IDX files in '" + dir +
                  "': place train-images-idx3-ubyte, train-labels-idx1-ubyte (and optionally the t10k pair) "
                  "there, or pass --mnist-dir");
  }
  return std::move(*data);
}

// ---------------------------------------------------------------- registry

struct RunContext {
  double scale = 1.0;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = ".";
  std::string mnist_dir = "data/mnist";
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::function<std::vector<std::filesystem::path>(const RunContext&)> run;
};

inline std::vector<ExperimentInfo> experiment_registry() {
  auto write = [](const CsvTable& t, const RunContext& ctx, const std::string& file) {
    const auto path = ctx.out_dir / file;
    t.write(path);
    return path;
  };
  std::vector<ExperimentInfo> reg;
  reg.push_back({"fig2", "mean-estimator error vs n (p=100, gamma=0.3, 1000 runs) with the delta1=0.001 bound",
                 [write](const RunContext& ctx) {
                   MeanErrorParams prm;
                   prm.seed = ctx.seed;
                   prm.scale(ctx.scale);
                   return std::vector{write(mean_error_csv(run_mean_error(prm)), ctx, "fig2.csv")};
                 }});
  auto cov = [write](std::string name, CovErrorParams (*preset)()) {
    return [write, name, preset](const RunContext& ctx) {
      auto prm = preset();
      prm.seed = ctx.seed;
      prm.scale(ctx.scale);
      return std::vector{write(cov_error_csv(run_cov_error(prm)), ctx, name + ".csv")};
    };
  };
  reg.push_back({"fig3a", "covariance error vs n (spiked, p=200, gamma=0.3, 50 runs) with the delta2=0.01 bound",
                 cov("fig3a", fig3a_params)});
  reg.push_back({"fig3b", "covariance error vs gamma (spiked, p=200, n=10p, 50 runs) with the delta2=0.01 bound",
                 cov("fig3b", fig3b_params)});
  reg.push_back({"fig4", "covariance error vs gamma on canonical-basis data, with and without preconditioning",
                 cov("fig4", fig4_params)});
  reg.push_back({"fig5", "K-means vs sparsified K-means on 5 Gaussian clusters (p=512, n=1e5, gamma=0.05)",
                 [write](const RunContext& ctx) {
                   ClusterSpeedParams prm;
                   prm.seed = ctx.seed;
                   prm.scale(ctx.scale);
                   return std::vector{write(cluster_speed_csv(run_cluster_speed(prm)), ctx, "fig5.csv")};
                 }});
  reg.push_back({"fig7", "||H_k - I||_2 vs n (p=100, gamma=0.3, 1000 runs) with the delta3=0.001 bound",
                 [write](const RunContext& ctx) {
                   HkParams prm;
                   prm.seed = ctx.seed;
                   prm.scale(ctx.scale);
                   return std::vector{write(hk_csv(run_hk(prm)), ctx, "fig7.csv")};
                 }});
  reg.push_back({"table1", "recovered principal components vs gamma, with and without preconditioning",
                 [write](const RunContext& ctx) {
                   PcRecoveryParams prm;
                   prm.seed = ctx.seed;
                   prm.scale(ctx.scale);
                   return std::vector{write(pc_recovery_csv(run_pc_recovery(prm)), ctx, "table1.csv")};
                 }});
  reg.push_back({"colsample", "explained variance: precondition+sample vs uniform column sampling on t data",
                 [write](const RunContext& ctx) {
                   ExplainedVarianceParams prm;
                   prm.seed = ctx.seed;
                   prm.scale(ctx.scale);
                   return std::vector{
                       write(explained_variance_csv(run_explained_variance(prm)), ctx, "colsample.csv")};
                 }});
  reg.push_back({"mnist-accuracy", "clustering accuracy vs gamma on MNIST digits {0,3,9} for every method",
                 [write](const RunContext& ctx) {
                   const auto data = load_mnist_or_throw(ctx.mnist_dir);
                   AccuracyParams prm;
                   prm.seed = ctx.seed;
                   prm.scale(ctx.scale);
                   const auto recs = run_accuracy(data.x, data.labels, prm);
                   return std::vector{write(accuracy_csv(recs), ctx, "mnist_accuracy.csv"),
                                      write(accuracy_summary_csv(summarize(recs)), ctx,
                                            "mnist_accuracy_summary.csv")};
                 }});
  return reg;
}

inline std::vector<std::filesystem::path> run_experiment(const std::string& name, const RunContext& ctx) {
  for (const auto& e : experiment_registry()) {
    if (e.name == name) return e.run(ctx);
  }
  std::string known;
  for (const auto& e : experiment_registry()) known += (known.empty() ? "" : ", ") + e.name;
  throw ParameterError("unknown experiment '" + name + "' (known: " + known + ")");
}

}  // namespace sketchpipe::experiments
