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

// Reader for the IDX byte format used by the MNIST distribution.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"

namespace sketchpipe {

namespace detail {

inline std::uint32_t get_be32(const unsigned char* b) {
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Images as columns (rows*cols x count), pixel values scaled to [0, 1].
inline DenseMatrix read_idx_images(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() < 16) throw IoError(path + ": truncated IDX header");
  if (detail::get_be32(bytes.data()) != kIdxImageMagic) throw IoError(path + ": not an IDX image file");
  const std::size_t count = detail::get_be32(bytes.data() + 4);
  const std::size_t rows = detail::get_be32(bytes.data() + 8);
  const std::size_t cols = detail::get_be32(bytes.data() + 12);
  const std::size_t p = rows * cols;
  if (bytes.size() != 16 + count * p) throw IoError(path + ": size does not match header");
  DenseMatrix x(p, count);
  for (std::size_t i = 0; i < count; ++i) {
    auto col = x.col(i);
    const unsigned char* src = bytes.data() + 16 + i * p;
    for (std::size_t j = 0; j < p; ++j) col[j] = static_cast<double>(src[j]) / 255.0;
  }
  return x;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() < 8) throw IoError(path + ": truncated IDX header");
  if (detail::get_be32(bytes.data()) != kIdxLabelMagic) throw IoError(path + ": not an IDX label file");
  const std::size_t count = detail::get_be32(bytes.data() + 4);
  if (bytes.size() != 8 + count) throw IoError(path + ": size does not match header");
  return {bytes.begin() + 8, bytes.end()};
}

struct LabeledImages {
  DenseMatrix x;
  std::vector<std::uint32_t> labels;  // 0..digits.size()-1, in the order of `digits`
};

namespace detail {

inline std::optional<std::string> find_idx(const std::filesystem::path& dir, const std::string& stem,
                                           const std::string& kind) {
  for (const std::string& name : {stem + "-" + kind, stem + "." + kind}) {
    if (std::filesystem::exists(dir / name)) return (dir / name).string();
  }
  return std::nullopt;
}

}  // namespace detail

/// Loads the requested digits from every MNIST split found in dir (train and
/// t10k files, either "-idx3-ubyte" or ".idx3-ubyte" naming). Returns nullopt
/// when no split is present.
inline std::optional<LabeledImages> load_mnist_digits(const std::string& dir, const std::vector<int>& digits) {
  std::vector<std::pair<std::string, std::string>> splits;
  for (const std::string stem : {"train", "t10k"}) {
    auto img = detail::find_idx(dir, stem + "-images", "idx3-ubyte");
    auto lab = detail::find_idx(dir, stem + "-labels", "idx1-ubyte");
    if (img && lab) splits.emplace_back(*img, *lab);
  }
  if (splits.empty()) return std::nullopt;
  std::vector<int> map(256, -1);
  for (std::size_t t = 0; t < digits.size(); ++t) map[static_cast<std::size_t>(digits[t]) & 0xff] = static_cast<int>(t);

  std::vector<DenseMatrix> images;
  std::vector<std::vector<std::uint8_t>> labels;
  std::size_t total = 0, p = 0;
  for (const auto& [img, lab] : splits) {
    images.push_back(read_idx_images(img));
    labels.push_back(read_idx_labels(lab));
    if (images.back().cols() != labels.back().size()) throw IoError(img + ": image and label counts differ");
    if (p != 0 && images.back().rows() != p) throw IoError(img + ": image size differs between splits");
    p = images.back().rows();
    for (auto l : labels.back()) total += map[l] >= 0;
  }
  LabeledImages out;
  out.x.resize(p, total);
  out.labels.reserve(total);
  std::size_t c = 0;
  for (std::size_t s = 0; s < images.size(); ++s) {
    for (std::size_t i = 0; i < labels[s].size(); ++i) {
      const int t = map[labels[s][i]];
      if (t < 0) continue;
      const auto src = images[s].col(i);
      std::copy(src.begin(), src.end(), out.x.col(c++).begin());
      out.labels.push_back(static_cast<std::uint32_t>(t));
    }
  }
  return out;
}

}  // namespace sketchpipe
