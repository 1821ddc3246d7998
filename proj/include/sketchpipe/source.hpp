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
#include <cstddef>
#include <optional>
#include <utility>

#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"

namespace sketchpipe {

/// Sequential reader of data columns in chunks. Every algorithm that touches
/// raw data goes through a source, which counts how many times it was read
/// from the beginning (passes).
class ColumnSource {
 public:
  virtual ~ColumnSource() = default;

  virtual std::size_t rows() const = 0;
  /// Total column count when known up front.
  virtual std::optional<std::size_t> cols() const = 0;

  /// Returns to column 0. The next successful read starts a new pass.
  void rewind() {
    do_rewind();
    position_ = 0;
  }

  /// Reads up to max_cols columns into chunk (resized to rows x k); returns k,
  /// zero at the end of the data.
  std::size_t read(std::size_t max_cols, DenseMatrix& chunk) {
    if (max_cols == 0) throw ParameterError("ColumnSource::read: max_cols must be >= 1");
    const std::size_t k = do_read(position_, max_cols, chunk);
    if (k > 0 && position_ == 0) ++passes_;
    position_ += k;
    columns_read_ += k;
    return k;
  }

  std::size_t position() const { return position_; }
  std::size_t passes() const { return passes_; }
  std::size_t columns_read() const { return columns_read_; }
  void reset_counters() {
    passes_ = 0;
    columns_read_ = 0;
  }

 protected:
  virtual std::size_t do_read(std::size_t first_col, std::size_t max_cols, DenseMatrix& chunk) = 0;
  virtual void do_rewind() {}

 private:
  std::size_t position_ = 0;
  std::size_t passes_ = 0;
  std::size_t columns_read_ = 0;
};

/// Source over an in-memory matrix (borrowed).
class MatrixSource final : public ColumnSource {
 public:
  explicit MatrixSource(const DenseMatrix& m) : m_(&m) {}

  std::size_t rows() const override { return m_->rows(); }
  std::optional<std::size_t> cols() const override { return m_->cols(); }

 protected:
  std::size_t do_read(std::size_t first, std::size_t max_cols, DenseMatrix& chunk) override {
    if (first >= m_->cols()) return 0;
    const std::size_t k = std::min(max_cols, m_->cols() - first);
    chunk.resize(m_->rows(), k);
    const auto begin = m_->data().begin() + static_cast<std::ptrdiff_t>(first * m_->rows());
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(k * m_->rows()), chunk.data().begin());
    return k;
  }

 private:
  const DenseMatrix* m_;
};

/// Reads the whole source (one pass) into memory.
inline DenseMatrix read_all(ColumnSource& source, std::size_t chunk_cols = 4096) {
  source.rewind();
  std::vector<double> data;
  if (auto n = source.cols()) data.reserve(*n * source.rows());
  DenseMatrix chunk;
  std::size_t total = 0;
  while (std::size_t k = source.read(chunk_cols, chunk)) {
    data.insert(data.end(), chunk.data().begin(),
                chunk.data().begin() + static_cast<std::ptrdiff_t>(k * source.rows()));
    total += k;
  }
  return DenseMatrix(source.rows(), total, std::move(data));
}

}  // namespace sketchpipe
