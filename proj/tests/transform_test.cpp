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


#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sketchpipe/transform.hpp"

namespace sp = sketchpipe;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(g);
  return v;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Eigen::VectorXd as_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST(Fwht, MatchesExplicitHadamardMatrix) {
  for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 256u}) {
    auto v = random_vector(n, 7 + static_cast<unsigned>(n));
    const Eigen::VectorXd expect = oracle::hadamard(n) * as_eigen(v);
    sp::fwht_inplace(v);
    EXPECT_LT((as_eigen(v) - expect).cwiseAbs().maxCoeff(), 1e-12) << n;
  }
}

TEST(Fwht, SelfInverse) {
  auto v = random_vector(512, 3);
  const auto orig = v;
  sp::fwht_inplace(v);
  sp::fwht_inplace(v);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], orig[i], 1e-12);
}

TEST(Fwht, RejectsNonPowerOfTwo) {
  std::vector<double> v(6, 1.0);
  EXPECT_THROW(sp::fwht_inplace(v), sp::DimensionError);
  std::vector<double> e;
  EXPECT_THROW(sp::fwht_inplace(e), sp::DimensionError);
}

TEST(Dct, OnePointIsIdentity) {
  EXPECT_EQ(sp::dct_ortho(std::vector<double>{1.0}), std::vector<double>{1.0});
}

TEST(Dct, ConstantVectorConcentratesInDc) {
  const auto y = sp::dct_ortho(std::vector<double>{1, 1, 1, 1});
  const Eigen::VectorXd expect = oracle::dct2(4) * Eigen::VectorXd::Ones(4);
  ASSERT_EQ(y.size(), 4u);
  EXPECT_NEAR(y[0], 2.0, 1e-12);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(y[k], expect(static_cast<Eigen::Index>(k)), 1e-12);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_NEAR(y[k], 0.0, 1e-12);
}

TEST(Dct, MatchesExplicitMatrixAllSizes) {
  for (std::size_t n = 1; n <= 40; ++n) {
    const auto v = random_vector(n, static_cast<unsigned>(n));
    const Eigen::VectorXd expect = oracle::dct2(n) * as_eigen(v);
    const auto y = sp::dct_ortho(v);
    EXPECT_LT((as_eigen(y) - expect).cwiseAbs().maxCoeff(), 1e-10) << n;
  }
}

TEST(Dct, RoundTripAndNormPreserving) {
  for (std::size_t n : {1u, 2u, 3u, 17u, 100u, 128u, 1000u}) {
    const auto v = random_vector(n, 11);
    const auto y = sp::dct_ortho(v);
    EXPECT_NEAR(norm(y), norm(v), 1e-10 * std::max(1.0, norm(v)));
    const auto back = sp::dct_ortho_inverse(y);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(back[i], v[i], 1e-10);
  }
}

TEST(Dct, EmptyInputRejected) {
  EXPECT_THROW(sp::dct_ortho(std::vector<double>{}), sp::DimensionError);
  EXPECT_THROW(sp::dct_ortho_inverse(std::vector<double>{}), sp::DimensionError);
}

TEST(PreconditionSpec, PadsOnlyForHadamard) {
  EXPECT_EQ(sp::PreconditionSpec::make(sp::TransformKind::Hadamard, 784, 1).p_pad, 1024u);
  EXPECT_EQ(sp::PreconditionSpec::make(sp::TransformKind::Hadamard, 512, 1).p_pad, 512u);
  EXPECT_EQ(sp::PreconditionSpec::make(sp::TransformKind::DCT, 784, 1).p_pad, 784u);
  EXPECT_EQ(sp::PreconditionSpec::make(sp::TransformKind::None, 5, 1).p_pad, 5u);
  EXPECT_THROW(sp::PreconditionSpec::make(sp::TransformKind::None, 0, 1), sp::DimensionError);
  EXPECT_DOUBLE_EQ(sp::eta(sp::PreconditionSpec::make(sp::TransformKind::Hadamard, 4, 0)), 1.0);
  EXPECT_DOUBLE_EQ(sp::eta(sp::PreconditionSpec::make(sp::TransformKind::DCT, 4, 0)), 0.5);
}

TEST(TransformKind, StringRoundTrip) {
  for (auto k : {sp::TransformKind::None, sp::TransformKind::Hadamard, sp::TransformKind::DCT}) {
    EXPECT_EQ(sp::transform_kind_from_string(sp::to_string(k)), k);
  }
  EXPECT_THROW(sp::transform_kind_from_string("fft"), sp::ParameterError);
  EXPECT_THROW(sp::transform_kind_from_code(3), sp::IoError);
}

TEST(Precondition, NoneIsExactIdentity) {
  const auto x = random_vector(37, 5);
  const auto spec = sp::PreconditionSpec::make(sp::TransformKind::None, 37, 99);
  EXPECT_EQ(sp::precondition(x, spec), x);
}

TEST(Precondition, MatchesHDOnPaddedInput) {
  const std::size_t p = 13;
  const auto x = random_vector(p, 8);
  const auto spec = sp::PreconditionSpec::make(sp::TransformKind::Hadamard, p, 1234);
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(16);
  for (std::size_t j = 0; j < p; ++j) dx(static_cast<Eigen::Index>(j)) = sp::sign_at(1234, j) * x[j];
  const Eigen::VectorXd expect = oracle::hadamard(16) * dx;
  const auto y = sp::precondition(x, spec);
  ASSERT_EQ(y.size(), 16u);
  EXPECT_LT((as_eigen(y) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Precondition, DctVariantMatchesExplicitMatrix) {
  const std::size_t p = 21;
  const auto x = random_vector(p, 18);
  const auto spec = sp::PreconditionSpec::make(sp::TransformKind::DCT, p, 77);
  Eigen::VectorXd dx(p);
  for (std::size_t j = 0; j < p; ++j) dx(static_cast<Eigen::Index>(j)) = sp::sign_at(77, j) * x[j];
  const Eigen::VectorXd expect = oracle::dct2(p) * dx;
  EXPECT_LT((as_eigen(sp::precondition(x, spec)) - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Precondition, NormPreservedAndInvertible) {
  for (auto kind : {sp::TransformKind::None, sp::TransformKind::Hadamard, sp::TransformKind::DCT}) {
    for (std::size_t p : {1u, 5u, 64u, 100u, 784u}) {
      const auto x = random_vector(p, static_cast<unsigned>(p) * 3);
      const auto spec = sp::PreconditionSpec::make(kind, p, 42);
      const auto y = sp::precondition(x, spec);
      EXPECT_LE(std::abs(norm(y) - norm(x)), 1e-10 * norm(x));
      const auto back = sp::unprecondition(y, spec);
      ASSERT_EQ(back.size(), spec.p_pad);
      for (std::size_t j = 0; j < spec.p_pad; ++j) EXPECT_NEAR(back[j], j < p ? x[j] : 0.0, 1e-10);
    }
  }
}

TEST(Precondition, DeterministicPerSeed) {
  const auto x = random_vector(300, 1);
  const auto spec = sp::PreconditionSpec::make(sp::TransformKind::Hadamard, 300, 5);
  EXPECT_EQ(sp::precondition(x, spec), sp::precondition(x, spec));
  const auto other = sp::PreconditionSpec::make(sp::TransformKind::Hadamard, 300, 6);
  EXPECT_NE(sp::precondition(x, spec), sp::precondition(x, other));
}

TEST(Precondition, WrongLengthRejected) {
  const auto spec = sp::PreconditionSpec::make(sp::TransformKind::Hadamard, 10, 5);
  EXPECT_THROW(sp::precondition(std::vector<double>(9), spec), sp::DimensionError);
  EXPECT_THROW(sp::unprecondition(std::vector<double>(10), spec), sp::DimensionError);
}

TEST(Precondition, SignsAreBalanced) {
  std::size_t neg = 0;
  const std::size_t n = 100000;
  for (std::size_t j = 0; j < n; ++j) neg += sp::sign_at(2024, j) < 0;
  EXPECT_NEAR(static_cast<double>(neg) / n, 0.5, 3 * 0.5 / std::sqrt(static_cast<double>(n)));
}

// Unit x spread by H D: max |y_j| stays under the incoherence bound for all
// but about 1% of sign draws.
TEST(Precondition, MaxEntryBoundHoldsForUnitVector) {
  const std::size_t p = 512;
  auto spiky = random_vector(p, 4);
  for (double& v : spiky) v = v * v * v;
  const double nrm = norm(spiky);
  for (double& v : spiky) v /= nrm;
  const double bound = std::sqrt(2.0 * std::log(2.0 * p / 0.01)) / std::sqrt(static_cast<double>(p));
  const std::size_t trials = 10000;
  std::size_t fail = 0;
  for (std::size_t s = 0; s < trials; ++s) {
    const auto spec = sp::PreconditionSpec::make(sp::TransformKind::Hadamard, p, s);
    const auto y = sp::precondition(spiky, spec);
    double mx = 0;
    for (double v : y) mx = std::max(mx, std::abs(v));
    fail += mx > bound;
  }
  EXPECT_LE(static_cast<double>(fail) / trials, 0.01);
}

TEST(Precondition, CoordinateTailFollowsSubgaussianBound) {
  const std::size_t p = 64;
  auto x = random_vector(p, 12);
  for (std::size_t j = 0; j < p; ++j) x[j] *= (j < 4 ? 20.0 : 1.0);
  const double nrm = norm(x);
  for (double& v : x) v /= nrm;
  for (auto kind : {sp::TransformKind::Hadamard, sp::TransformKind::DCT}) {
    const std::size_t seeds = 100000;
    std::vector<std::size_t> exceed(3, 0);
    const double ts[3] = {2.0, 3.0, 4.0};
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto spec = sp::PreconditionSpec::make(kind, p, s * 7919 + 1);
      const auto y = sp::precondition(x, spec);
      for (int k = 0; k < 3; ++k) exceed[k] += std::abs(y[0]) * std::sqrt(static_cast<double>(p)) >= ts[k];
    }
    const double e = sp::eta(sp::PreconditionSpec::make(kind, p, 0));
    for (int k = 0; k < 3; ++k) {
      const double bound = 2.0 * std::exp(-e * ts[k] * ts[k] / 2.0);
      const double slack = 3.0 * std::sqrt(bound * (1 - std::min(bound, 1.0)) / seeds);
      EXPECT_LE(static_cast<double>(exceed[k]) / seeds, bound + slack) << sp::to_string(kind) << " t=" << ts[k];
    }
  }
}

TEST(Precondition, FlatSecondMoment) {
  const std::size_t p = 128;
  std::vector<double> x(p, 0.0);
  x[17] = 0.6;
  x[90] = 0.8;
  const std::size_t seeds = 20000;
  double acc = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto y = sp::precondition(x, sp::PreconditionSpec::make(sp::TransformKind::Hadamard, p, s));
    acc += y[0] * y[0];
  }
  const double mean = acc / seeds;
  EXPECT_NEAR(mean, 1.0 / p, 5.0 * (1.0 / p) / std::sqrt(static_cast<double>(seeds)) * 2.0);
}
