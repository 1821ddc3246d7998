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

// K-means on dense data and on sparse sketches (sparsified K-means), the
// two-pass refinement, random-projection baselines and clustering metrics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"
#include "sketchpipe/parallel.hpp"
#include "sketchpipe/random.hpp"
#include "sketchpipe/sketch.hpp"
#include "sketchpipe/source.hpp"
#include "sketchpipe/transform.hpp"

namespace sketchpipe {

enum class CenterDomain { Original, Preconditioned };

struct CenterSet {
  std::size_t K = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // dim x K, column-major
  CenterDomain domain = CenterDomain::Original;

  CenterSet() = default;
  CenterSet(std::size_t k, std::size_t d, CenterDomain dom = CenterDomain::Original)
      : K(k), dim(d), data(k * d, 0.0), domain(dom) {}

  std::span<const double> center(std::size_t k) const { return {data.data() + k * dim, dim}; }
  std::span<double> center(std::size_t k) { return {data.data() + k * dim, dim}; }

  Eigen::MatrixXd matrix() const {
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), static_cast<Eigen::Index>(dim),
                                             static_cast<Eigen::Index>(K));
  }
  bool finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }
  bool operator==(const CenterSet&) const = default;
};

struct Assignments {
  std::vector<std::uint32_t> labels;
  std::size_t size() const { return labels.size(); }
  bool operator==(const Assignments&) const = default;
};

/// n_k^{(j)}: how often coordinate j was sampled among the points of cluster k.
struct CountDiagonal {
  std::size_t K = 0;
  std::size_t p = 0;
  std::vector<std::uint64_t> counts;  // p x K
  std::vector<std::uint64_t> sizes;   // n_k

  std::uint64_t at(std::size_t k, std::size_t j) const { return counts[k * p + j]; }
};

struct KMeansOptions {
  std::size_t max_iter = 100;
  std::size_t n_init = 20;
  std::uint64_t seed = 0;
  TransformKind transform = TransformKind::Hadamard;
  std::size_t chunk_cols = 1024;
};

struct KMeansDiagnostics {
  std::size_t iterations = 0;  // of the selected restart
  bool converged = false;
  std::vector<double> objective_history;  // after every assignment step
  double objective = 0.0;
  std::size_t best_restart = 0;
  std::size_t passes = 0;
  double sketch_seconds = 0.0;
  double iterate_seconds = 0.0;  // summed over all restarts
  std::size_t total_iterations = 0;  // summed over all restarts

  double seconds_per_iteration() const {
    return total_iterations == 0 ? 0.0 : iterate_seconds / static_cast<double>(total_iterations);
  }
};

struct KMeansResult {
  Assignments assignments;
  CenterSet centers;
  KMeansDiagnostics diagnostics;
  CenterSet preconditioned_centers;  // sparsified runs only
  CountDiagonal counts;               // sparsified runs only
};

namespace detail {

inline constexpr std::size_t kUpdateBlock = 2048;
inline constexpr std::uint64_t kSignStream = 0x5349474e00000000ULL;
inline constexpr std::uint64_t kSampleStream = 0x53414d5000000000ULL;
inline constexpr std::uint64_t kProjectionStream = 0x50524f4a00000000ULL;

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs fn(block, begin, end) over fixed-size blocks of [0, n). Block
// boundaries do not depend on the worker count.
template <class Fn>
void for_blocks(std::size_t n, Fn&& fn) {
  const std::size_t nb = (n + kUpdateBlock - 1) / kUpdateBlock;
  parallel_for(nb, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) fn(b, b * kUpdateBlock, std::min(n, (b + 1) * kUpdateBlock));
  }, 1);
}

class DenseData {
 public:
  explicit DenseData(const DenseMatrix& x) : x_(x) {}

  std::size_t n() const { return x_.cols(); }
  std::size_t dim() const { return x_.rows(); }

  double dist(std::size_t i, const double* c) const {
    const double* a = x_.col(i).data();
    double s = 0.0;
    for (std::size_t j = 0; j < x_.rows(); ++j) {
      const double d = a[j] - c[j];
      s += d * d;
    }
    return s;
  }
  double point_dist(std::size_t i, std::size_t j) const { return dist(i, x_.col(j).data()); }
  void load_seed(std::size_t i, double* c) const { std::copy_n(x_.col(i).data(), dim(), c); }
  void reseed(std::size_t i, double* c) const { load_seed(i, c); }

  void update(const std::vector<std::uint32_t>& labels, std::size_t K, std::vector<double>& centers) const {
    const std::size_t d = dim();
    const std::size_t nb = (n() + kUpdateBlock - 1) / kUpdateBlock;
    std::vector<double> sums(nb * K * d, 0.0);
    std::vector<std::uint64_t> sizes(nb * K, 0);
    for_blocks(n(), [&](std::size_t b, std::size_t i0, std::size_t i1) {
      double* bs = sums.data() + b * K * d;
      std::uint64_t* bz = sizes.data() + b * K;
      for (std::size_t i = i0; i < i1; ++i) {
        const std::uint32_t k = labels[i];
        const double* a = x_.col(i).data();
        double* s = bs + k * d;
        for (std::size_t j = 0; j < d; ++j) s[j] += a[j];
        ++bz[k];
      }
    });
    std::vector<double> total(K * d, 0.0);
    std::vector<std::uint64_t> size(K, 0);
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t t = 0; t < K * d; ++t) total[t] += sums[b * K * d + t];
      for (std::size_t k = 0; k < K; ++k) size[k] += sizes[b * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (size[k] == 0) continue;
      const double nk = static_cast<double>(size[k]);
      for (std::size_t j = 0; j < d; ++j) centers[k * d + j] = total[k * d + j] / nk;
    }
  }

 private:
  const DenseMatrix& x_;
};

class SketchData {
 public:
  explicit SketchData(const SparseSketch& s)
      : s_(s), r_(static_cast<double>(s.p()) / static_cast<double>(s.m())) {}

  std::size_t n() const { return s_.n(); }
  std::size_t dim() const { return s_.p(); }

  // Squared distance over the sampled coordinates of column i only.
  double dist(std::size_t i, const double* c) const {
    const auto idx = s_.indices(i);
    const auto val = s_.values(i);
    double s = 0.0;
    for (std::size_t t = 0; t < idx.size(); ++t) {
      const double d = val[t] - c[idx[t]];
      s += d * d;
    }
    return s;
  }

  // Unbiased estimate of ||y_i - y_j||^2 from two sparse columns, summed over
  // the union of their supports.
  double point_dist(std::size_t i, std::size_t j) const {
    const auto ia = s_.indices(i);
    const auto va = s_.values(i);
    const auto ib = s_.indices(j);
    const auto vb = s_.values(j);
    const double r = r_;
    double s = 0.0;
    std::size_t a = 0, b = 0;
    while (a < ia.size() || b < ib.size()) {
      if (b == ib.size() || (a < ia.size() && ia[a] < ib[b])) {
        s += r * va[a] * va[a];
        ++a;
      } else if (a == ia.size() || ib[b] < ia[a]) {
        s += r * vb[b] * vb[b];
        ++b;
      } else {
        const double d = va[a] - vb[b];
        s += r * d * d + 2.0 * va[a] * vb[b] * r * (1.0 - r);
        ++a;
        ++b;
      }
    }
    return s;
  }

  void load_seed(std::size_t i, double* c) const {
    std::fill_n(c, dim(), 0.0);
    reseed(i, c);
  }
  void reseed(std::size_t i, double* c) const {
    const auto idx = s_.indices(i);
    const auto val = s_.values(i);
    for (std::size_t t = 0; t < idx.size(); ++t) c[idx[t]] = val[t];
  }

  void update(const std::vector<std::uint32_t>& labels, std::size_t K, std::vector<double>& centers,
              CountDiagonal* counts_out = nullptr) const {
    const std::size_t d = dim();
    const std::size_t nb = (n() + kUpdateBlock - 1) / kUpdateBlock;
    std::vector<double> sums(nb * K * d, 0.0);
    std::vector<std::uint32_t> cnts(nb * K * d, 0);
    std::vector<std::uint64_t> sizes(nb * K, 0);
    for_blocks(n(), [&](std::size_t b, std::size_t i0, std::size_t i1) {
      double* bs = sums.data() + b * K * d;
      std::uint32_t* bc = cnts.data() + b * K * d;
      for (std::size_t i = i0; i < i1; ++i) {
        const std::uint32_t k = labels[i];
        const auto idx = s_.indices(i);
        const auto val = s_.values(i);
        double* s = bs + k * d;
        std::uint32_t* c = bc + k * d;
        for (std::size_t t = 0; t < idx.size(); ++t) {
          s[idx[t]] += val[t];
          ++c[idx[t]];
        }
        ++sizes[b * K + k];
      }
    });
    std::vector<double> total(K * d, 0.0);
    std::vector<std::uint64_t> count(K * d, 0);
    std::vector<std::uint64_t> size(K, 0);
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t t = 0; t < K * d; ++t) {
        total[t] += sums[b * K * d + t];
        count[t] += cnts[b * K * d + t];
      }
      for (std::size_t k = 0; k < K; ++k) size[k] += sizes[b * K + k];
    }
    for (std::size_t t = 0; t < K * d; ++t) {
      if (count[t] > 0) centers[t] = total[t] / static_cast<double>(count[t]);
    }
    if (counts_out) {
      counts_out->K = K;
      counts_out->p = d;
      counts_out->counts = std::move(count);
      counts_out->sizes = std::move(size);
    }
  }

 private:
  const SparseSketch& s_;
  double r_;
};

// D^2 seeding. Returns the chosen point indices.
template <class Data>
std::vector<std::size_t> pp_seeds(const Data& data, std::size_t K, SplitMix64& rng) {
  const std::size_t n = data.n();
  if (K < 1) throw ParameterError("kmeans: K must be at least 1");
  if (K > n) throw ParameterError("kmeans: K exceeds the number of points");
  std::vector<std::size_t> seeds;
  seeds.reserve(K);
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto add = [&](std::size_t c) {
    seeds.push_back(c);
    chosen[c] = 1;
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const double d = chosen[i] ? 0.0 : std::max(0.0, data.point_dist(i, c));
        d2[i] = std::min(d2[i], d);
      }
    });
  };
  add(static_cast<std::size_t>(uniform_below(rng, n)));
  while (seeds.size() < K) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0 && std::isfinite(total)) {
      const double u = uniform_unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc > u) break;
      }
    } else {
      auto r = uniform_below(rng, n - seeds.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (r-- == 0) {
          pick = i;
          break;
        }
      }
    }
    add(pick);
  }
  return seeds;
}

struct RunState {
  std::vector<std::uint32_t> labels;
  std::vector<double> centers;
  std::vector<double> history;
  std::size_t iterations = 0;
  bool converged = false;
  double objective = 0.0;
  double seconds = 0.0;
};

// Assigns every point to its nearest center (lowest index on ties); returns
// the number of changed labels and stores per-point distances.
template <class Data>
std::size_t assign_all(const Data& data, std::size_t K, const std::vector<double>& centers,
                       std::vector<std::uint32_t>& labels, std::vector<double>& dists) {
  const std::size_t d = data.dim();
  std::vector<std::size_t> changed_per_block((data.n() + kUpdateBlock - 1) / kUpdateBlock, 0);
  for_blocks(data.n(), [&](std::size_t blk, std::size_t i0, std::size_t i1) {
    std::size_t changed = 0;
    for (std::size_t i = i0; i < i1; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t bl = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const double v = data.dist(i, centers.data() + k * d);
        if (v < best) {
          best = v;
          bl = static_cast<std::uint32_t>(k);
        }
      }
      if (labels[i] != bl) ++changed;
      labels[i] = bl;
      dists[i] = best;
    }
    changed_per_block[blk] = changed;
  });
  std::size_t changed = 0;
  for (auto c : changed_per_block) changed += c;
  return changed;
}

// Moves the point farthest from its own center into each empty cluster.
template <class Data>
void reseed_empty(const Data& data, std::size_t K, std::vector<double>& centers,
                  std::vector<std::uint32_t>& labels, std::vector<double>& dists) {
  std::vector<std::size_t> sizes(K, 0);
  for (auto l : labels) ++sizes[l];
  for (std::size_t k = 0; k < K; ++k) {
    if (sizes[k] > 0) continue;
    std::size_t far = data.n();
    double best = -1.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (sizes[labels[i]] > 1 && dists[i] > best) {
        best = dists[i];
        far = i;
      }
    }
    if (far == data.n()) continue;
    --sizes[labels[far]];
    labels[far] = static_cast<std::uint32_t>(k);
    ++sizes[k];
    dists[far] = 0.0;
    data.reseed(far, centers.data() + k * data.dim());
  }
}

template <class Data>
RunState lloyd_run(const Data& data, std::size_t K, std::size_t max_iter, SplitMix64& rng) {
  const std::size_t n = data.n();
  const std::size_t d = data.dim();
  const auto seeds = pp_seeds(data, K, rng);
  RunState st;
  st.centers.assign(K * d, 0.0);
  for (std::size_t k = 0; k < K; ++k) data.load_seed(seeds[k], st.centers.data() + k * d);

  st.labels.assign(n, 0);
  std::vector<double> dists(n, 0.0);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t bl = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const double v = data.point_dist(i, seeds[k]);
        if (v < best) {
          best = v;
          bl = static_cast<std::uint32_t>(k);
        }
      }
      st.labels[i] = bl;
      dists[i] = best;
    }
  });

  const auto t0 = Clock::now();
  while (st.iterations < max_iter) {
    reseed_empty(data, K, st.centers, st.labels, dists);
    data.update(st.labels, K, st.centers);
    const std::size_t changed = assign_all(data, K, st.centers, st.labels, dists);
    double obj = 0.0;
    for (double v : dists) obj += v;
    st.history.push_back(obj);
    ++st.iterations;
    if (changed == 0) {
      st.converged = true;
      break;
    }
  }
  st.seconds = seconds_since(t0);
  st.objective = st.history.empty() ? 0.0 : st.history.back();
  return st;
}

template <class Data>
std::pair<RunState, KMeansDiagnostics> lloyd_restarts(const Data& data, std::size_t K,
                                                      const KMeansOptions& opts) {
  if (opts.n_init < 1) throw ParameterError("kmeans: n_init must be at least 1");
  if (data.n() == 0) throw DimensionError("kmeans: empty input");
  RunState best;
  KMeansDiagnostics diag;
  for (std::size_t r = 0; r < opts.n_init; ++r) {
    SplitMix64 rng(derive_seed(opts.seed, r));
    RunState st = lloyd_run(data, K, opts.max_iter, rng);
    diag.iterate_seconds += st.seconds;
    diag.total_iterations += st.iterations;
    if (r == 0 || st.objective < best.objective) {
      best = std::move(st);
      diag.best_restart = r;
    }
  }
  diag.iterations = best.iterations;
  diag.converged = best.converged;
  diag.objective_history = best.history;
  diag.objective = best.objective;
  return {std::move(best), std::move(diag)};
}

}  // namespace detail

/// K-means++ seeding on dense columns.
inline CenterSet kmeans_pp_init(const DenseMatrix& x, std::size_t K, std::uint64_t seed) {
  detail::DenseData data(x);
  SplitMix64 rng(seed);
  const auto seeds = detail::pp_seeds(data, K, rng);
  CenterSet c(K, x.rows());
  for (std::size_t k = 0; k < K; ++k) data.load_seed(seeds[k], c.center(k).data());
  return c;
}

/// K-means++ seeding on a sketch; centers are the chosen sparse columns with
/// zeros off their support.
inline CenterSet kmeans_pp_init(const SparseSketch& s, std::size_t K, std::uint64_t seed) {
  detail::SketchData data(s);
  SplitMix64 rng(seed);
  const auto seeds = detail::pp_seeds(data, K, rng);
  CenterSet c(K, s.p(), CenterDomain::Preconditioned);
  for (std::size_t k = 0; k < K; ++k) data.load_seed(seeds[k], c.center(k).data());
  return c;
}

/// Standard Lloyd iterations with K-means++ seeding, best of n_init restarts.
inline KMeansResult lloyd_full(const DenseMatrix& x, std::size_t K, const KMeansOptions& opts = {}) {
  if (x.cols() == 0 || x.rows() == 0) throw DimensionError("lloyd_full: empty input");
  detail::DenseData data(x);
  auto [st, diag] = detail::lloyd_restarts(data, K, opts);
  KMeansResult res;
  res.assignments.labels = std::move(st.labels);
  res.centers = CenterSet(K, x.rows());
  res.centers.data = std::move(st.centers);
  diag.passes = 1;
  res.diagnostics = std::move(diag);
  return res;
}

/// Label of sketch column i under centers mu_prime (preconditioned domain).
inline std::uint32_t sparsified_assign(const SparseSketch& s, std::size_t i, const CenterSet& mu_prime) {
  if (mu_prime.dim != s.p()) throw DimensionError("sparsified_assign: center dimension mismatch");
  if (i >= s.n()) throw DimensionError("sparsified_assign: column out of range");
  detail::SketchData data(s);
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t bl = 0;
  for (std::size_t k = 0; k < mu_prime.K; ++k) {
    const double v = data.dist(i, mu_prime.center(k).data());
    if (v < best) {
      best = v;
      bl = static_cast<std::uint32_t>(k);
    }
  }
  return bl;
}

/// Entry-wise means of the sampled coordinates per cluster. Coordinates never
/// sampled within a cluster keep their value from `previous`.
inline std::pair<CenterSet, CountDiagonal> sparsified_update_centers(const SparseSketch& s,
                                                                     const Assignments& a,
                                                                     const CenterSet& previous) {
  if (a.size() != s.n()) throw DimensionError("sparsified_update_centers: label count mismatch");
  if (previous.dim != s.p()) throw DimensionError("sparsified_update_centers: center dimension mismatch");
  for (auto l : a.labels) {
    if (l >= previous.K) throw ParameterError("sparsified_update_centers: label out of range");
  }
  detail::SketchData data(s);
  CenterSet out = previous;
  out.domain = CenterDomain::Preconditioned;
  CountDiagonal counts;
  data.update(a.labels, previous.K, out.data, &counts);
  return {std::move(out), std::move(counts)};
}

/// J' = sum_i ||w_i - R_i R_i^T mu'_{c_i}||^2 over sampled coordinates.
inline double sparsified_objective(const SparseSketch& s, const Assignments& a, const CenterSet& mu_prime) {
  detail::SketchData data(s);
  double obj = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) obj += data.dist(i, mu_prime.center(a.labels[i]).data());
  return obj;
}

/// Sparsified K-means on an existing sketch.
inline KMeansResult sparsified_kmeans(const SparseSketch& s, std::size_t K, const KMeansOptions& opts = {}) {
  detail::SketchData data(s);
  auto [st, diag] = detail::lloyd_restarts(data, K, opts);
  KMeansResult res;
  res.assignments.labels = std::move(st.labels);
  res.preconditioned_centers = CenterSet(K, s.p(), CenterDomain::Preconditioned);
  res.preconditioned_centers.data = std::move(st.centers);
  CenterSet scratch = res.preconditioned_centers;
  data.update(res.assignments.labels, K, scratch.data, &res.counts);

  res.centers = CenterSet(K, s.p_raw());
  std::vector<double> buf(s.p());
  for (std::size_t k = 0; k < K; ++k) {
    const auto src = res.preconditioned_centers.center(k);
    std::copy(src.begin(), src.end(), buf.begin());
    unprecondition_inplace(buf, s.spec());
    std::copy_n(buf.begin(), s.p_raw(), res.centers.center(k).begin());
  }
  res.diagnostics = std::move(diag);
  return res;
}

/// Sparsified K-means from a column source: one pass to precondition and
/// sample, then iterations on the sketch only.
inline KMeansResult sparsified_kmeans(ColumnSource& source, std::size_t K, double gamma,
                                      const KMeansOptions& opts = {}) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("sparsified_kmeans: gamma must be in (0, 1]");
  const auto spec = PreconditionSpec::make(opts.transform, source.rows(),
                                           derive_seed(opts.seed, detail::kSignStream));
  if (gamma * static_cast<double>(spec.p_pad) < 1.0) {
    throw ParameterError("sparsified_kmeans: gamma * p must be at least 1");
  }
  const auto plan = SamplingPlan::from_gamma(gamma, spec.p_pad, derive_seed(opts.seed, detail::kSampleStream));
  const std::size_t passes0 = source.passes();
  const auto t0 = detail::Clock::now();
  const SparseSketch s = sketch_stream(source, spec, plan, opts.chunk_cols);
  const double sketch_seconds = detail::seconds_since(t0);
  auto res = sparsified_kmeans(s, K, opts);
  res.diagnostics.passes = source.passes() - passes0;
  res.diagnostics.sketch_seconds = sketch_seconds;
  return res;
}

/// Sparsified K-means followed by one extra pass: exact means of the pass-1
/// assignments, and re-assignment of every point to the nearest pass-1
/// center. A cluster left without points keeps its pass-1 center.
inline KMeansResult sparsified_kmeans_two_pass(ColumnSource& source, std::size_t K, double gamma,
                                               const KMeansOptions& opts = {}) {
  const std::size_t passes0 = source.passes();
  KMeansResult first = sparsified_kmeans(source, K, gamma, opts);
  const std::size_t p = source.rows();
  const auto& mu_hat = first.centers;

  KMeansResult res;
  res.centers = CenterSet(K, p);
  std::vector<std::uint64_t> sizes(K, 0);
  res.assignments.labels.assign(first.assignments.size(), 0);

  source.rewind();
  DenseMatrix chunk;
  std::size_t i = 0;
  while (std::size_t got = source.read(opts.chunk_cols, chunk)) {
    if (i + got > first.assignments.size()) throw IoError("two-pass: source grew between passes");
    for (std::size_t c = 0; c < got; ++c, ++i) {
      const auto x = chunk.col(c);
      const std::uint32_t k_hat = first.assignments.labels[i];
      auto mu = res.centers.center(k_hat);
      for (std::size_t j = 0; j < p; ++j) mu[j] += x[j];
      ++sizes[k_hat];
    }
    parallel_for(got, [&](std::size_t b, std::size_t e) {
      for (std::size_t c = b; c < e; ++c) {
        const auto x = chunk.col(c);
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t bl = 0;
        for (std::size_t k = 0; k < K; ++k) {
          const auto m = mu_hat.center(k);
          double s = 0.0;
          for (std::size_t j = 0; j < p; ++j) {
            const double d = x[j] - m[j];
            s += d * d;
          }
          if (s < best) {
            best = s;
            bl = static_cast<std::uint32_t>(k);
          }
        }
        res.assignments.labels[i - got + c] = bl;
      }
    });
  }
  if (i != first.assignments.size()) throw IoError("two-pass: source shrank between passes");
  for (std::size_t k = 0; k < K; ++k) {
    auto mu = res.centers.center(k);
    if (sizes[k] == 0) {
      const auto prev = mu_hat.center(k);
      std::copy(prev.begin(), prev.end(), mu.begin());
      continue;
    }
    for (double& v : mu) v /= static_cast<double>(sizes[k]);
  }
  res.diagnostics = first.diagnostics;
  res.diagnostics.passes = source.passes() - passes0;
  res.preconditioned_centers = std::move(first.preconditioned_centers);
  res.counts = std::move(first.counts);
  return res;
}

/// ||H_k - I||_2 for the diagonal H_k = (p/m)(1/n_k) sum R_i R_i^T.
inline double hk_deviation(const CountDiagonal& counts, std::size_t k, std::size_t m) {
  if (k >= counts.K) throw ParameterError("hk_deviation: cluster out of range");
  if (counts.sizes[k] == 0) throw ParameterError("hk_deviation: empty cluster");
  const double scale = static_cast<double>(counts.p) /
                       (static_cast<double>(m) * static_cast<double>(counts.sizes[k]));
  double worst = 0.0;
  for (std::size_t j = 0; j < counts.p; ++j) {
    worst = std::max(worst, std::abs(scale * static_cast<double>(counts.at(k, j)) - 1.0));
  }
  return worst;
}

/// m x p matrix with i.i.d. +-1/sqrt(m) entries.
inline Eigen::MatrixXd random_sign_matrix(std::size_t m, std::size_t p, std::uint64_t seed) {
  Eigen::MatrixXd omega(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
  const double v = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t j = 0; j < p; ++j) {
    SplitMix64 rng(derive_seed(seed, j));
    for (std::size_t i = 0; i < m; ++i) {
      omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (rng() >> 63) ? -v : v;
    }
  }
  return omega;
}

namespace detail {

inline void exact_means(const DenseMatrix& x, const Assignments& a, CenterSet& centers) {
  std::vector<std::uint64_t> sizes(centers.K, 0);
  std::vector<double> sums(centers.data.size(), 0.0);
  for (std::size_t i = 0; i < x.cols(); ++i) {
    const auto col = x.col(i);
    double* s = sums.data() + a.labels[i] * x.rows();
    for (std::size_t j = 0; j < x.rows(); ++j) s[j] += col[j];
    ++sizes[a.labels[i]];
  }
  for (std::size_t k = 0; k < centers.K; ++k) {
    if (sizes[k] == 0) continue;
    for (std::size_t j = 0; j < x.rows(); ++j) {
      centers.data[k * x.rows() + j] = sums[k * x.rows() + j] / static_cast<double>(sizes[k]);
    }
  }
}

}  // namespace detail

/// Lloyd on Omega X with a caller-supplied m x p projection. Centers are
/// mapped back with the pseudo-inverse Omega^T (Omega Omega^T)^{-1}, or,
/// with recompute_centers, taken as exact means in a second pass.
inline KMeansResult feature_extraction_baseline(const DenseMatrix& x, std::size_t K, const Eigen::MatrixXd& omega,
                                                const KMeansOptions& opts = {}, bool recompute_centers = false) {
  if (static_cast<std::size_t>(omega.cols()) != x.rows()) {
    throw DimensionError("feature_extraction_baseline: projection width must equal p");
  }
  const auto t0 = detail::Clock::now();
  const DenseMatrix z = DenseMatrix::from_eigen(omega * x.eigen());
  const double project_seconds = detail::seconds_since(t0);
  KMeansResult low = lloyd_full(z, K, opts);

  KMeansResult res;
  res.assignments = std::move(low.assignments);
  res.centers = CenterSet(K, x.rows());
  if (recompute_centers) {
    detail::exact_means(x, res.assignments, res.centers);
  } else {
    const Eigen::MatrixXd gram = omega * omega.transpose();
    const Eigen::MatrixXd back = omega.transpose() * gram.ldlt().solve(low.centers.matrix());
    Eigen::Map<Eigen::MatrixXd>(res.centers.data.data(), back.rows(), back.cols()) = back;
  }
  res.diagnostics = std::move(low.diagnostics);
  res.diagnostics.passes = recompute_centers ? 2 : 1;
  res.diagnostics.sketch_seconds = project_seconds;
  return res;
}

inline KMeansResult feature_extraction_baseline(const DenseMatrix& x, std::size_t K, std::size_t m,
                                                const KMeansOptions& opts = {}, bool recompute_centers = false) {
  if (m < 1 || m > x.rows()) throw ParameterError("feature_extraction_baseline: need 1 <= m <= p");
  return feature_extraction_baseline(x, K, random_sign_matrix(m, x.rows(), derive_seed(opts.seed, detail::kProjectionStream)),
                                     opts, recompute_centers);
}

/// Desk-scale stand-in for leverage-score feature selection: the leverage
/// scores come from an exact eigendecomposition of X X^T instead of an
/// approximate SVD. m rows are drawn with replacement and rescaled, Lloyd
/// runs on the selected rows, and centers are exact means.
inline KMeansResult feature_selection_exact_svd(const DenseMatrix& x, std::size_t K, std::size_t m,
                                                const KMeansOptions& opts = {}) {
  const std::size_t p = x.rows();
  if (m < 1) throw ParameterError("feature_selection_exact_svd: m must be positive");
  if (K > p) throw ParameterError("feature_selection_exact_svd: K exceeds p");
  const auto xm = x.eigen();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(xm.rows(), xm.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(xm);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.selfadjointView<Eigen::Lower>());
  const Eigen::MatrixXd uk = eig.eigenvectors().rightCols(static_cast<Eigen::Index>(K));
  std::vector<double> cdf(p);
  double acc = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    acc += uk.row(static_cast<Eigen::Index>(j)).squaredNorm() / static_cast<double>(K);
    cdf[j] = acc;
  }
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
  SplitMix64 rng(derive_seed(opts.seed, detail::kProjectionStream));
  for (std::size_t r = 0; r < m; ++r) {
    const double u = uniform_unit(rng) * acc;
    const auto j = std::min<std::size_t>(p - 1, static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()));
    const double prob = (cdf[j] - (j ? cdf[j - 1] : 0.0)) / acc;
    omega(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = 1.0 / std::sqrt(static_cast<double>(m) * prob);
  }
  const DenseMatrix z = DenseMatrix::from_eigen(omega * xm);
  KMeansResult low = lloyd_full(z, K, opts);
  KMeansResult res;
  res.assignments = std::move(low.assignments);
  res.centers = CenterSet(K, p);
  detail::exact_means(x, res.assignments, res.centers);
  res.diagnostics = std::move(low.diagnostics);
  res.diagnostics.passes = 3;
  return res;
}

/// Maximum-weight assignment on a square profit matrix (Hungarian method).
/// Returns col_of_row.
inline std::vector<std::size_t> hungarian_max(const std::vector<std::vector<double>>& profit) {
  const std::size_t n = profit.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -profit[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

/// Fraction of points whose label matches the ground truth under the best
/// one-to-one relabeling.
inline double clustering_accuracy(std::span<const std::uint32_t> labels, std::span<const std::uint32_t> truth) {
  if (labels.size() != truth.size()) throw DimensionError("clustering_accuracy: length mismatch");
  if (labels.empty()) throw DimensionError("clustering_accuracy: empty labels");
  std::size_t k = 0;
  for (auto l : labels) k = std::max<std::size_t>(k, l + 1);
  for (auto l : truth) k = std::max<std::size_t>(k, l + 1);
  std::vector<std::vector<double>> conf(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < labels.size(); ++i) conf[labels[i]][truth[i]] += 1.0;
  const auto match = hungarian_max(conf);
  double hit = 0.0;
  for (std::size_t r = 0; r < k; ++r) hit += conf[r][match[r]];
  return hit / static_cast<double>(labels.size());
}

}  // namespace sketchpipe
