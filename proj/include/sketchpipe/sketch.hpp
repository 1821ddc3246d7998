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

// Uniform without-replacement entry sampling and the fused
// precondition-then-sample operator that turns raw columns into a sparse
// sketch holding exactly m entries per column.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <limits>
#include <unordered_map>
#include <vector>

#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"
#include "sketchpipe/parallel.hpp"
#include "sketchpipe/random.hpp"
#include "sketchpipe/source.hpp"
#include "sketchpipe/transform.hpp"

namespace sketchpipe {

struct SamplingPlan {
  std::uint64_t master_seed = 0;
  std::size_t p = 0;  // sampled dimension (p_pad of the preconditioner)
  std::size_t m = 0;  // kept entries per column

  void validate() const {
    if (p == 0) throw ParameterError("SamplingPlan: p must be >= 1");
    if (m == 0 || m > p) {
      throw ParameterError("SamplingPlan: need 1 <= m <= p (m=" + std::to_string(m) +
                           ", p=" + std::to_string(p) + ")");
    }
    if (p > std::numeric_limits<std::uint32_t>::max()) {
      throw ParameterError("SamplingPlan: p exceeds 32-bit index range");
    }
  }

  double gamma() const { return static_cast<double>(m) / static_cast<double>(p); }

  /// m = round(gamma * p), rejected when it would be zero.
  static SamplingPlan from_gamma(double gamma, std::size_t p, std::uint64_t seed) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("gamma must lie in (0, 1]");
    const auto m = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(p)));
    if (m < 1) throw ParameterError("gamma * p rounds to zero samples per column");
    SamplingPlan plan{seed, p, std::min(m, p)};
    plan.validate();
    return plan;
  }

  friend bool operator==(const SamplingPlan&, const SamplingPlan&) = default;
};

namespace detail {

// Dense-array partial Fisher-Yates; the scratch array holds the identity
// permutation on entry and is restored on exit.
inline void partial_fisher_yates_dense(SplitMix64& rng, std::size_t p, std::span<std::uint32_t> out,
                                       std::vector<std::uint32_t>& perm) {
  if (perm.size() != p) {
    perm.resize(p);
    for (std::size_t j = 0; j < p; ++j) perm[j] = static_cast<std::uint32_t>(j);
  }
  const std::size_t m = out.size();
  for (std::size_t t = 0; t < m; ++t) {
    const std::size_t r = t + uniform_below(rng, p - t);
    std::swap(perm[t], perm[r]);
    out[t] = perm[t];
  }
  // Restore the identity; swaps only touched positions t < m and the r's,
  // which are exactly the positions holding a non-identity value.
  for (std::size_t t = 0; t < m; ++t) {
    const std::uint32_t v = out[t];
    perm[v] = v;
    perm[t] = static_cast<std::uint32_t>(t);
  }
}

// Same swap sequence over an implicit identity array, O(m) memory.
inline void partial_fisher_yates_sparse(SplitMix64& rng, std::size_t p, std::span<std::uint32_t> out) {
  std::unordered_map<std::uint32_t, std::uint32_t> swapped;
  swapped.reserve(2 * out.size());
  auto at = [&](std::uint32_t j) {
    auto it = swapped.find(j);
    return it == swapped.end() ? j : it->second;
  };
  const std::size_t m = out.size();
  for (std::size_t t = 0; t < m; ++t) {
    const auto r = static_cast<std::uint32_t>(t + uniform_below(rng, p - t));
    const auto tt = static_cast<std::uint32_t>(t);
    const std::uint32_t vt = at(tt);
    const std::uint32_t vr = at(r);
    swapped[tt] = vr;
    swapped[r] = vt;
    out[t] = vr;
  }
}

inline constexpr std::size_t kDenseSamplingLimit = std::size_t{1} << 20;

}  // namespace detail

/// Writes the sorted index set of column `column` into out (size m).
inline void sample_indices_into(const SamplingPlan& plan, std::uint64_t column,
                                std::span<std::uint32_t> out) {
  if (out.size() != plan.m) throw DimensionError("sample_indices: output must have m slots");
  SplitMix64 rng(derive_seed(plan.master_seed, column));
  if (plan.m == plan.p) {
    for (std::size_t j = 0; j < plan.p; ++j) out[j] = static_cast<std::uint32_t>(j);
    return;
  }
  if (plan.p <= detail::kDenseSamplingLimit) {
    thread_local std::vector<std::uint32_t> perm;
    detail::partial_fisher_yates_dense(rng, plan.p, out, perm);
  } else {
    detail::partial_fisher_yates_sparse(rng, plan.p, out);
  }
  std::sort(out.begin(), out.end());
}

inline std::vector<std::uint32_t> sample_indices(const SamplingPlan& plan, std::uint64_t column) {
  plan.validate();
  std::vector<std::uint32_t> out(plan.m);
  sample_indices_into(plan, column, out);
  return out;
}

/// Sparse sketch: for each column the m sampled coordinates (ascending) of the
/// preconditioned sample and their values. Stored with a fixed stride m.
class SparseSketch {
 public:
  SparseSketch() = default;
  SparseSketch(PreconditionSpec spec, SamplingPlan plan, std::size_t n)
      : spec_(spec), plan_(plan), n_(n), indices_(n * plan.m), values_(n * plan.m) {
    if (plan.p != spec.p_pad) throw DimensionError("SparseSketch: plan.p must equal spec.p_pad");
  }

  const PreconditionSpec& spec() const { return spec_; }
  const SamplingPlan& plan() const { return plan_; }
  std::size_t n() const { return n_; }
  std::size_t m() const { return plan_.m; }
  std::size_t p() const { return plan_.p; }
  std::size_t p_raw() const { return spec_.p; }
  std::size_t nnz() const { return indices_.size(); }

  std::span<const std::uint32_t> indices(std::size_t i) const {
    return {indices_.data() + i * plan_.m, plan_.m};
  }
  std::span<const double> values(std::size_t i) const { return {values_.data() + i * plan_.m, plan_.m}; }
  std::span<std::uint32_t> indices(std::size_t i) { return {indices_.data() + i * plan_.m, plan_.m}; }
  std::span<double> values(std::size_t i) { return {values_.data() + i * plan_.m, plan_.m}; }

  const std::vector<std::uint32_t>& all_indices() const { return indices_; }
  const std::vector<double>& all_values() const { return values_; }

  void resize(std::size_t n) {
    n_ = n;
    indices_.resize(n * plan_.m);
    values_.resize(n * plan_.m);
  }

  /// Dense p_pad vector with zeros off the support of column i.
  std::vector<double> densify(std::size_t i) const {
    std::vector<double> out(p(), 0.0);
    const auto idx = indices(i);
    const auto val = values(i);
    for (std::size_t t = 0; t < idx.size(); ++t) out[idx[t]] = val[t];
    return out;
  }

  friend bool operator==(const SparseSketch&, const SparseSketch&) = default;

 private:
  PreconditionSpec spec_{};
  SamplingPlan plan_{};
  std::size_t n_ = 0;
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

/// Preconditions x into buffer (length p_pad) and keeps the sampled entries.
inline void sketch_column_into(std::span<const double> x, const PreconditionSpec& spec,
                               const SamplingPlan& plan, std::uint64_t column, std::span<double> buffer,
                               std::span<std::uint32_t> out_indices, std::span<double> out_values) {
  if (plan.p != spec.p_pad) throw DimensionError("sketch_column: plan.p must equal spec.p_pad");
  if (out_values.size() != plan.m) throw DimensionError("sketch_column: output must have m slots");
  precondition_into(x, spec, buffer);
  sample_indices_into(plan, column, out_indices);
  for (std::size_t t = 0; t < plan.m; ++t) out_values[t] = buffer[out_indices[t]];
}

struct SparseColumn {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

inline SparseColumn sketch_column(std::span<const double> x, const PreconditionSpec& spec,
                                  const SamplingPlan& plan, std::uint64_t column) {
  spec.validate();
  plan.validate();
  std::vector<double> buffer(spec.p_pad);
  SparseColumn out{std::vector<std::uint32_t>(plan.m), std::vector<double>(plan.m)};
  sketch_column_into(x, spec, plan, column, buffer, out.indices, out.values);
  return out;
}

/// Single pass over the source: preconditions and samples every column.
/// Columns inside a chunk are processed in parallel; the result does not
/// depend on the chunk size or the worker count.
inline SparseSketch sketch_stream(ColumnSource& source, const PreconditionSpec& spec,
                                  const SamplingPlan& plan, std::size_t chunk_cols = 1024) {
  spec.validate();
  plan.validate();
  if (source.rows() != spec.p) {
    throw DimensionError("sketch_stream: source has " + std::to_string(source.rows()) +
                         " rows, spec expects " + std::to_string(spec.p));
  }
  if (plan.p != spec.p_pad) throw DimensionError("sketch_stream: plan.p must equal spec.p_pad");
  SparseSketch sketch(spec, plan, source.cols().value_or(0));
  source.rewind();
  DenseMatrix chunk;
  std::size_t offset = 0;
  for (;;) {
    std::size_t k = 0;
    try {
      k = source.read(chunk_cols, chunk);
    } catch (const std::exception& e) {
      throw IoError("column source failed at column offset " + std::to_string(offset) + ": " +
                    e.what());
    }
    if (k == 0) break;
    if (offset + k > sketch.n()) sketch.resize(offset + k);
    parallel_for(k, [&](std::size_t begin, std::size_t end) {
      std::vector<double> buffer(spec.p_pad);
      for (std::size_t c = begin; c < end; ++c) {
        const std::size_t i = offset + c;
        sketch_column_into(chunk.col(c), spec, plan, i, buffer, sketch.indices(i), sketch.values(i));
      }
    }, 16);
    offset += k;
  }
  if (offset != sketch.n()) sketch.resize(offset);
  return sketch;
}

/// Norm summaries of a data matrix used by the concentration bounds.
struct DataStats {
  std::size_t p = 0;
  std::size_t n = 0;
  double max_abs = 0.0;                // max |X_ji|
  double max_row_norm = 0.0;           // max_j ||X_{j,:}||_2
  double max_col_norm = 0.0;           // max_i ||x_i||_2
  double frob_norm = 0.0;              // ||X||_F
  double max_fourth_moment_row = 0.0;  // max_j sum_i X_ji^4
};

/// Incremental accumulator so statistics can ride along any pass.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(std::size_t p) : row_sq_(p, 0.0), row_4th_(p, 0.0) {}

  void add(std::span<const double> x) {
    if (x.size() != row_sq_.size()) throw DimensionError("StatsAccumulator: column length mismatch");
    double col_sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double v = x[j];
      const double v2 = v * v;
      max_abs_ = std::max(max_abs_, std::abs(v));
      row_sq_[j] += v2;
      row_4th_[j] += v2 * v2;
      col_sq += v2;
    }
    max_col_sq_ = std::max(max_col_sq_, col_sq);
    frob_sq_ += col_sq;
    ++n_;
  }

  DataStats finish() const {
    DataStats s;
    s.p = row_sq_.size();
    s.n = n_;
    s.max_abs = max_abs_;
    s.max_row_norm = std::sqrt(*std::max_element(row_sq_.begin(), row_sq_.end()));
    s.max_col_norm = std::sqrt(max_col_sq_);
    s.frob_norm = std::sqrt(frob_sq_);
    s.max_fourth_moment_row = *std::max_element(row_4th_.begin(), row_4th_.end());
    return s;
  }

  std::size_t count() const { return n_; }

 private:
  std::vector<double> row_sq_;
  std::vector<double> row_4th_;
  double max_abs_ = 0.0;
  double max_col_sq_ = 0.0;
  double frob_sq_ = 0.0;
  std::size_t n_ = 0;
};

/// One extra pass over the source.
inline DataStats compute_stats(ColumnSource& source, std::size_t chunk_cols = 1024) {
  if (source.rows() == 0) throw DimensionError("compute_stats: source has no rows");
  StatsAccumulator acc(source.rows());
  source.rewind();
  DenseMatrix chunk;
  while (std::size_t k = source.read(chunk_cols, chunk)) {
    for (std::size_t c = 0; c < k; ++c) acc.add(chunk.col(c));
  }
  if (acc.count() == 0) throw DimensionError("compute_stats: empty source");
  return acc.finish();
}

inline DataStats compute_stats(const DenseMatrix& x) {
  if (x.cols() == 0 || x.rows() == 0) throw DimensionError("compute_stats: empty matrix");
  StatsAccumulator acc(x.rows());
  for (std::size_t i = 0; i < x.cols(); ++i) acc.add(x.col(i));
  return acc.finish();
}

/// Y = H D X column by column (p_pad x n).
inline DenseMatrix precondition_matrix(const DenseMatrix& x, const PreconditionSpec& spec) {
  DenseMatrix y(spec.p_pad, x.cols());
  parallel_for(x.cols(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) precondition_into(x.col(i), spec, y.col(i));
  }, 16);
  return y;
}

}  // namespace sketchpipe
