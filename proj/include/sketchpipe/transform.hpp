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

// Randomized orthonormal preconditioning y = H D x, where D is a random
// +/-1 diagonal derived from a seed and H is an orthonormal Walsh-Hadamard
// or DCT-II matrix applied by a fast transform.

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sketchpipe/error.hpp"
#include "sketchpipe/random.hpp"

namespace sketchpipe {

enum class TransformKind : std::uint8_t { None = 0, Hadamard = 1, DCT = 2 };

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::None: return "none";
    case TransformKind::Hadamard: return "hadamard";
    case TransformKind::DCT: return "dct";
  }
  return "?";
}

inline TransformKind transform_kind_from_string(const std::string& s) {
  if (s == "none") return TransformKind::None;
  if (s == "hadamard") return TransformKind::Hadamard;
  if (s == "dct") return TransformKind::DCT;
  throw ParameterError("unknown transform '" + s + "' (expected hadamard|dct|none)");
}

inline TransformKind transform_kind_from_code(std::uint64_t code) {
  if (code > 2) throw IoError("invalid transform kind code " + std::to_string(code));
  return static_cast<TransformKind>(code);
}

inline std::size_t next_pow2(std::size_t p) { return p <= 1 ? 1 : std::bit_ceil(p); }

struct PreconditionSpec {
  TransformKind kind = TransformKind::None;
  std::uint64_t sign_seed = 0;
  std::size_t p = 0;      // original dimension
  std::size_t p_pad = 0;  // transform dimension

  static PreconditionSpec make(TransformKind kind, std::size_t p, std::uint64_t sign_seed) {
    if (p == 0) throw DimensionError("PreconditionSpec: p must be >= 1");
    PreconditionSpec s;
    s.kind = kind;
    s.sign_seed = sign_seed;
    s.p = p;
    s.p_pad = kind == TransformKind::Hadamard ? next_pow2(p) : p;
    return s;
  }

  void validate() const {
    if (p == 0 || p_pad < p) throw DimensionError("PreconditionSpec: need 1 <= p <= p_pad");
    if (kind == TransformKind::Hadamard && !std::has_single_bit(p_pad)) {
      throw DimensionError("PreconditionSpec: Hadamard p_pad must be a power of two");
    }
    if (kind != TransformKind::Hadamard && p_pad != p) {
      throw DimensionError("PreconditionSpec: only Hadamard pads");
    }
  }

  friend bool operator==(const PreconditionSpec&, const PreconditionSpec&) = default;
};

/// Coherence constant of the entry-magnitude tail bound: 1 for Hadamard, 1/2 for DCT.
/// The identity map has no such guarantee; it reports 1 so that bounds fed with
/// raw statistics stay finite.
inline double eta(const PreconditionSpec& spec) {
  return spec.kind == TransformKind::DCT ? 0.5 : 1.0;
}

/// D_jj in {+1, -1}, a pure function of (seed, j).
inline double sign_at(std::uint64_t seed, std::size_t j) {
  return (derive_seed(seed, j) >> 63) ? -1.0 : 1.0;
}

/// Orthonormal Walsh-Hadamard transform (Sylvester order), scaled by 1/sqrt(n).
inline void fwht_inplace(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0 || !std::has_single_bit(n)) {
    throw DimensionError("fwht: length " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = v[j];
        const double b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& x : v) x *= scale;
}

namespace detail {

using cplx = std::complex<double>;

// Radix-2 in-place FFT, forward sign e^{-2 pi i nk/N}; inverse is unscaled.
inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const cplx w(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
      for (std::size_t i = 0; i < n; i += len) {
        const cplx u = a[i + k];
        const cplx t = a[i + k + half] * w;
        a[i + k] = u + t;
        a[i + k + half] = u - t;
      }
    }
  }
}

// Forward DFT of any length: radix-2 when possible, Bluestein chirp-z otherwise.
inline void dft(std::vector<cplx>& x) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  if (std::has_single_bit(n)) {
    fft_pow2(x, false);
    return;
  }
  const std::size_t m = std::bit_ceil(2 * n - 1);
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    const std::uint64_t kk = (static_cast<std::uint64_t>(k) * k) % (2 * n);
    const double ang = -std::numbers::pi * static_cast<double>(kk) / static_cast<double>(n);
    chirp[k] = cplx(std::cos(ang), std::sin(ang));
  }
  std::vector<cplx> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  fft_pow2(a, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * inv_m * chirp[k];
}

inline void idft(std::vector<cplx>& x) {
  for (auto& c : x) c = std::conj(c);
  dft(x);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (auto& c : x) c = std::conj(c) * inv_n;
}

}  // namespace detail

/// Orthonormal DCT-II in place (Makhoul's even/odd reordering over one complex DFT).
inline void dct_ortho_inplace(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0) throw DimensionError("dct: empty vector");
  if (n == 1) return;
  std::vector<detail::cplx> w(n);
  for (std::size_t k = 0; 2 * k < n; ++k) w[k] = v[2 * k];
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) w[n - 1 - k] = v[2 * k + 1];
  detail::dft(w);
  const double nn = static_cast<double>(n);
  const double s0 = std::sqrt(1.0 / nn);
  const double sk = std::sqrt(2.0 / nn);
  for (std::size_t k = 0; k < n; ++k) {
    const double ang = -std::numbers::pi * static_cast<double>(k) / (2.0 * nn);
    const double y = (w[k] * detail::cplx(std::cos(ang), std::sin(ang))).real();
    v[k] = y * (k == 0 ? s0 : sk);
  }
}

/// Inverse of dct_ortho_inplace (orthonormal DCT-III).
inline void dct_ortho_inverse_inplace(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0) throw DimensionError("dct inverse: empty vector");
  if (n == 1) return;
  const double nn = static_cast<double>(n);
  std::vector<double> y(n);
  y[0] = v[0] * std::sqrt(nn);
  for (std::size_t k = 1; k < n; ++k) y[k] = v[k] * std::sqrt(nn / 2.0);
  std::vector<detail::cplx> w(n);
  w[0] = y[0];
  for (std::size_t k = 1; k < n; ++k) {
    const double ang = std::numbers::pi * static_cast<double>(k) / (2.0 * nn);
    w[k] = detail::cplx(std::cos(ang), std::sin(ang)) * detail::cplx(y[k], -y[n - k]);
  }
  detail::idft(w);
  for (std::size_t k = 0; 2 * k < n; ++k) v[2 * k] = w[k].real();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) v[2 * k + 1] = w[n - 1 - k].real();
}

inline std::vector<double> dct_ortho(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  dct_ortho_inplace(out);
  return out;
}

inline std::vector<double> dct_ortho_inverse(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  dct_ortho_inverse_inplace(out);
  return out;
}

/// Writes H D pad(x) into out (length p_pad). out must not alias x.
inline void precondition_into(std::span<const double> x, const PreconditionSpec& spec,
                              std::span<double> out) {
  if (x.size() != spec.p) {
    throw DimensionError("precondition: expected length " + std::to_string(spec.p) + ", got " +
                         std::to_string(x.size()));
  }
  if (out.size() != spec.p_pad) throw DimensionError("precondition: output length must be p_pad");
  std::copy(x.begin(), x.end(), out.begin());
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(spec.p), out.end(), 0.0);
  if (spec.kind == TransformKind::None) return;
  for (std::size_t j = 0; j < spec.p; ++j) out[j] *= sign_at(spec.sign_seed, j);
  if (spec.kind == TransformKind::Hadamard) {
    fwht_inplace(out);
  } else {
    dct_ortho_inplace(out);
  }
}

inline std::vector<double> precondition(std::span<const double> x, const PreconditionSpec& spec) {
  std::vector<double> out(spec.p_pad);
  precondition_into(x, spec, out);
  return out;
}

/// Applies (H D)^T in place on a length-p_pad vector.
inline void unprecondition_inplace(std::span<double> y, const PreconditionSpec& spec) {
  if (y.size() != spec.p_pad) {
    throw DimensionError("unprecondition: expected length " + std::to_string(spec.p_pad) +
                         ", got " + std::to_string(y.size()));
  }
  switch (spec.kind) {
    case TransformKind::None: return;
    case TransformKind::Hadamard: fwht_inplace(y); break;
    case TransformKind::DCT: dct_ortho_inverse_inplace(y); break;
  }
  for (std::size_t j = 0; j < y.size(); ++j) y[j] *= sign_at(spec.sign_seed, j);
}

inline std::vector<double> unprecondition(std::span<const double> y, const PreconditionSpec& spec) {
  std::vector<double> out(y.begin(), y.end());
  unprecondition_inplace(out, spec);
  return out;
}

}  // namespace sketchpipe
