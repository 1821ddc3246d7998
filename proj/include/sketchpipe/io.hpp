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

// Binary formats. All integers and doubles are little-endian.
//
//   DNSE1: "DNSE1" | u64 p | u64 n | p*n f64, column-major
//   SKCH1: "SKCH1" | u64 p_raw | u64 p_pad | u64 n | u64 m | u64 kind
//          | u64 sign_seed | u64 master_seed
//          | per column: m x u32 sorted indices, m x f64 values

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"
#include "sketchpipe/sketch.hpp"
#include "sketchpipe/source.hpp"

namespace sketchpipe {

namespace io_detail {

inline constexpr std::array<char, 5> kDenseMagic{'D', 'N', 'S', 'E', '1'};
inline constexpr std::array<char, 5> kSketchMagic{'S', 'K', 'C', 'H', '1'};
inline constexpr std::size_t kDenseHeaderBytes = 5 + 2 * 8;

inline void put_u64(std::vector<char>& buf, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}
inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}
inline void put_f64(std::vector<char>& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}
inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}
inline double get_f64(const char* p) { return std::bit_cast<double>(get_u64(p)); }

inline void read_exact(std::istream& in, char* dst, std::size_t bytes, const std::string& what) {
  in.read(dst, static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) throw IoError(what + ": unexpected end of file");
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

inline void check_magic(std::istream& in, const std::array<char, 5>& magic, const std::string& path) {
  std::array<char, 5> got{};
  read_exact(in, got.data(), got.size(), path);
  if (got != magic) {
    throw IoError("'" + path + "' is not a " + std::string(magic.begin(), magic.end()) + " file");
  }
}

}  // namespace io_detail

inline void write_dense(const std::string& path, const DenseMatrix& x) {
  auto out = io_detail::open_out(path);
  std::vector<char> buf(io_detail::kDenseMagic.begin(), io_detail::kDenseMagic.end());
  io_detail::put_u64(buf, x.rows());
  io_detail::put_u64(buf, x.cols());
  buf.reserve(buf.size() + 8 * x.data().size());
  for (double v : x.data()) io_detail::put_f64(buf, v);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Streams a DNSE1 file chunk by chunk; never holds more than one chunk.
class DenseFileSource final : public ColumnSource {
 public:
  explicit DenseFileSource(std::string path) : path_(std::move(path)), in_(io_detail::open_in(path_)) {
    io_detail::check_magic(in_, io_detail::kDenseMagic, path_);
    std::array<char, 16> hdr{};
    io_detail::read_exact(in_, hdr.data(), hdr.size(), path_);
    p_ = io_detail::get_u64(hdr.data());
    n_ = io_detail::get_u64(hdr.data() + 8);
    if (p_ == 0) throw IoError("'" + path_ + "': p must be >= 1");
  }

  std::size_t rows() const override { return p_; }
  std::optional<std::size_t> cols() const override { return n_; }

 protected:
  std::size_t do_read(std::size_t first, std::size_t max_cols, DenseMatrix& chunk) override {
    if (first >= n_) return 0;
    const std::size_t k = std::min(max_cols, n_ - first);
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(io_detail::kDenseHeaderBytes + first * p_ * 8));
    raw_.resize(k * p_ * 8);
    io_detail::read_exact(in_, raw_.data(), raw_.size(), path_);
    chunk.resize(p_, k);
    for (std::size_t t = 0; t < k * p_; ++t) chunk.data()[t] = io_detail::get_f64(raw_.data() + 8 * t);
    return k;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t p_ = 0;
  std::size_t n_ = 0;
  std::vector<char> raw_;
};

inline DenseMatrix read_dense(const std::string& path) {
  DenseFileSource src(path);
  return read_all(src);
}

inline void write_sketch(const std::string& path, const SparseSketch& s) {
  auto out = io_detail::open_out(path);
  std::vector<char> buf(io_detail::kSketchMagic.begin(), io_detail::kSketchMagic.end());
  io_detail::put_u64(buf, s.p_raw());
  io_detail::put_u64(buf, s.p());
  io_detail::put_u64(buf, s.n());
  io_detail::put_u64(buf, s.m());
  io_detail::put_u64(buf, static_cast<std::uint64_t>(s.spec().kind));
  io_detail::put_u64(buf, s.spec().sign_seed);
  io_detail::put_u64(buf, s.plan().master_seed);
  buf.reserve(buf.size() + s.n() * s.m() * 12);
  for (std::size_t i = 0; i < s.n(); ++i) {
    for (auto j : s.indices(i)) io_detail::put_u32(buf, j);
    for (double v : s.values(i)) io_detail::put_f64(buf, v);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline SparseSketch read_sketch(const std::string& path) {
  auto in = io_detail::open_in(path);
  io_detail::check_magic(in, io_detail::kSketchMagic, path);
  std::array<char, 56> hdr{};
  io_detail::read_exact(in, hdr.data(), hdr.size(), path);
  const auto field = [&](int k) { return io_detail::get_u64(hdr.data() + 8 * k); };
  PreconditionSpec spec;
  spec.p = field(0);
  spec.p_pad = field(1);
  const std::size_t n = field(2);
  const std::size_t m = field(3);
  spec.kind = transform_kind_from_code(field(4));
  spec.sign_seed = field(5);
  SamplingPlan plan{field(6), spec.p_pad, m};
  try {
    spec.validate();
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError("'" + path + "': invalid header: " + e.what());
  }
  SparseSketch s(spec, plan, n);
  std::vector<char> raw(m * 12);
  for (std::size_t i = 0; i < n; ++i) {
    io_detail::read_exact(in, raw.data(), raw.size(), path);
    auto idx = s.indices(i);
    auto val = s.values(i);
    for (std::size_t t = 0; t < m; ++t) {
      idx[t] = io_detail::get_u32(raw.data() + 4 * t);
      if (idx[t] >= spec.p_pad || (t > 0 && idx[t] <= idx[t - 1])) {
        throw IoError("'" + path + "': column " + std::to_string(i) + " has invalid indices");
      }
    }
    for (std::size_t t = 0; t < m; ++t) val[t] = io_detail::get_f64(raw.data() + 4 * m + 8 * t);
  }
  return s;
}

}  // namespace sketchpipe
