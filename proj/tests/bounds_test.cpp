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

#include "sketchpipe/bounds.hpp"
#include "sketchpipe/datagen.hpp"
#include "sketchpipe/estimators.hpp"

namespace sp = sketchpipe;

namespace {

sp::BoundInputs mean_inputs(std::size_t p, std::size_t m, std::size_t n, double row, double mx) {
  sp::BoundInputs in;
  in.p = p;
  in.m = m;
  in.n = n;
  in.stats.max_row_norm = row;
  in.stats.max_abs = mx;
  return in;
}

}  // namespace

TEST(Tau, Cases) {
  EXPECT_DOUBLE_EQ(sp::tau(100, 100), 1.0);
  EXPECT_DOUBLE_EQ(sp::tau(50, 100), 1.0);
  EXPECT_DOUBLE_EQ(sp::tau(10, 100), 9.0);
  EXPECT_THROW(sp::tau(0, 10), sp::ParameterError);
  EXPECT_THROW(sp::tau(11, 10), sp::ParameterError);
}

TEST(MeanBound, ClosedFormReferenceValue) {
  const auto in = mean_inputs(100, 30, 100, 3.0, 2.0);
  EXPECT_NEAR(sp::mean_t_for_delta1(0.001, in), 0.4853666963825192, 1e-12);
}

TEST(MeanBound, RoundTrip) {
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const auto in = mean_inputs(100, 30, n, std::sqrt(2.0 * n), 4.5);
    for (double d : {0.5, 0.01, 0.001, 1e-6}) {
      const double t = sp::mean_t_for_delta1(d, in);
      EXPECT_NEAR(sp::mean_delta1(t, in), d, 1e-10 * std::max(1.0, d));
    }
  }
}

TEST(MeanBound, SmallErrorGivesTrivialProbability) {
  const auto in = mean_inputs(100, 30, 1000, 40.0, 4.0);
  EXPECT_NEAR(sp::mean_delta1(1e-12, in), 200.0, 1e-6);
  EXPECT_DOUBLE_EQ(sp::clamp_probability(sp::mean_delta1(1e-12, in)), 1.0);
}

TEST(MeanBound, MonotoneInTNAndP) {
  double prev = 1e300;
  for (double t = 0.01; t < 2; t *= 1.5) {
    const double d = sp::mean_delta1(t, mean_inputs(100, 30, 1000, 40, 4));
    EXPECT_LT(d, prev);
    prev = d;
  }
  prev = 1e300;
  for (std::size_t n = 100; n < 100000; n *= 2) {
    const double d = sp::mean_delta1(0.2, mean_inputs(100, 30, n, std::sqrt(static_cast<double>(n)), 4));
    EXPECT_LT(d, prev);
    prev = d;
  }
  prev = 0;
  for (std::size_t p = 100; p < 5000; p *= 2) {
    const double d = sp::mean_delta1(0.2, mean_inputs(p, 30, 1000, 30, 4));
    EXPECT_GT(d, prev);
    prev = d;
  }
}

TEST(Cor4, TabulatedValues) {
  EXPECT_NEAR(sp::cor4_min_m(512, 1e5, 0.01, 1), 137.2, 0.1);
  EXPECT_NEAR(sp::cor4_min_m(512, 1e6, 0.01, 1), 15.1, 0.1);
  EXPECT_NEAR(sp::cor4_min_m(512, 1e7, 0.01, 1), 1.6, 0.1);
  EXPECT_NEAR(sp::cor4_min_m(512, 1e5, 0.01, 0.5), 2 * sp::cor4_min_m(512, 1e5, 0.01, 1), 1e-9);
}

TEST(CovConstants, MatchesDirectEvaluation) {
  sp::DenseMatrix x(4, 3);
  const double vals[4][3] = {{1.0, -2.0, 0.5}, {0.3, 0.7, -1.1}, {2.0, 0.0, 0.4}, {-0.6, 1.5, 0.9}};
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 3; ++i) x(j, i) = vals[j][i];
  sp::BoundInputs in;
  in.p = 4;
  in.m = 2;
  in.n = 3;
  in.stats = sp::compute_stats(x);
  in.rho = 0.8;
  const auto c = sp::sample_covariance(x);
  const double cn = sp::spectral_norm_symmetric(c);
  const double dn = c.diagonal().cwiseAbs().maxCoeff();
  EXPECT_NEAR(cn, 2.9720109620142603, 1e-12);
  EXPECT_NEAR(dn, 1.75, 1e-14);
  const auto k = sp::cov_constants(in, cn, dn);
  EXPECT_NEAR(k.L, 18.364, 1e-10);
  EXPECT_NEAR(k.sigma_sq, 234.23038158636973, 1e-9);
}

TEST(CovConstants, FullSamplingCollapses) {
  sp::BoundInputs in;
  in.p = 8;
  in.m = 8;
  in.n = 50;
  in.stats.max_col_norm = 3.0;
  in.stats.max_abs = 1.7;
  in.stats.frob_norm = 12.0;
  in.stats.max_fourth_moment_row = 40.0;
  in.rho = 1.0;
  const auto k = sp::cov_constants(in, 2.5, 0.9);
  EXPECT_NEAR(k.L, 2.0 * 9.0 / 50.0, 1e-14);
  EXPECT_NEAR(k.sigma_sq, 0.0, 1e-14);
  in.m = 1;
  EXPECT_THROW(sp::cov_constants(in, 2.5, 0.9), sp::ParameterError);
}

TEST(CovDelta2, LimitsMonotoneAndInverse) {
  EXPECT_DOUBLE_EQ(sp::cov_delta2(0.0, 200, 0.3, 0.05), 200.0);
  double prev = 1e300;
  for (double t = 0.01; t < 10; t *= 1.7) {
    const double d = sp::cov_delta2(t, 200, 0.3, 0.05);
    EXPECT_LT(d, prev);
    prev = d;
  }
  for (double d : {0.1, 0.01, 1e-5}) {
    const double t = sp::cov_t_for_delta2(d, 200, 0.3, 0.05);
    EXPECT_NEAR(sp::cov_delta2(t, 200, 0.3, 0.05), d, 1e-10);
  }
}

TEST(Hk, LimitsMonotoneAndInverse) {
  EXPECT_DOUBLE_EQ(sp::hk_delta3(0.0, 100, 100, 30), 100.0);
  const double t = 0.7;
  EXPECT_NEAR(sp::hk_delta3(t, 50, 64, 64), 64 * std::exp(-(50 * t * t / 2) / (2 * t / 3)), 1e-12);
  double prev = 1e300;
  for (double tt = 0.01; tt < 5; tt *= 1.5) {
    const double d = sp::hk_delta3(tt, 1000, 100, 30);
    EXPECT_LT(d, prev);
    prev = d;
  }
  prev = 1e300;
  for (std::size_t nk = 10; nk < 100000; nk *= 3) {
    const double d = sp::hk_delta3(0.3, nk, 100, 30);
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(sp::hk_delta3(0.3, 1000, 100, 30), sp::hk_delta3(0.3, 1000, 200, 60));
  for (std::size_t nk : {100u, 1000u, 10000u}) {
    const double tt = sp::hk_t_for_delta3(0.001, nk, 100, 30);
    EXPECT_NEAR(sp::hk_delta3(tt, nk, 100, 30), 0.001, 1e-10);
  }
}

TEST(RosRho, FormAndFloor) {
  const double p = 512, n = 1024, m = 51;
  EXPECT_NEAR(sp::ros_rho(0.01, p, n, m, 1.0), (m / p) * 2.0 * std::log(200.0 * n * p), 1e-12);
  EXPECT_NEAR(sp::ros_rho_single(0.01, p, m, 0.5), (m / p) * 4.0 * std::log(200.0 * p), 1e-12);
  for (double nn : {1.0, 2.0, 100.0})
    for (double a : {1.0, 0.5, 0.01}) EXPECT_GE(sp::ros_rho(a, 4, nn, 2, 1.0), 2.0 / 4.0);
  EXPECT_THROW(sp::ros_rho(0.0, p, n, m, 1.0), sp::ParameterError);
}

TEST(RosRho, EmpiricalViolationRateBelowAlpha) {
  const std::size_t p = 128, m = 16;
  const double alpha = 0.05;
  const double rho = sp::ros_rho_single(alpha, p, m, 1.0);
  std::vector<double> x(p, 0.0);
  x[0] = 1.0;
  std::size_t bad = 0;
  const std::size_t trials = 10000;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto spec = sp::PreconditionSpec::make(sp::TransformKind::Hadamard, p, 1000 + t);
    const auto col = sp::sketch_column(x, spec, sp::SamplingPlan{t, p, m}, t);
    double w2 = 0;
    for (double v : col.values) w2 += v * v;
    bad += w2 > rho;
  }
  EXPECT_LE(static_cast<double>(bad) / trials, alpha);
}

TEST(Jl, ValueAndMonotone) {
  EXPECT_NEAR(sp::jl_min_m(2, 512), 217.68682362223961, 1e-9);
  double prev = 0;
  for (double b = 1.5; b < 50; b *= 1.4) {
    const double v = sp::jl_min_m(b, 512);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_THROW(sp::jl_min_m(1.0, 512), sp::ParameterError);
}

TEST(BoundInputs, Validation) {
  sp::BoundInputs in;
  in.p = 10;
  in.m = 11;
  in.n = 5;
  EXPECT_THROW(in.validate(), sp::ParameterError);
  in.m = 5;
  in.eta = 0.7;
  EXPECT_THROW(in.validate(), sp::ParameterError);
  in.eta = 1.0;
  in.rho = 1.5;
  EXPECT_THROW(in.validate(), sp::ParameterError);
}

// Canonical-basis spikes are the adversarial case for plain sampling; the
// same bounds evaluated on the preconditioned matrix must not be larger.
TEST(Bounds, PreconditioningNeverHurtsOnCanonicalSpikes) {
  const std::size_t p = 128, n = 512;
  const auto data = sp::gen_spiked(p, n, 5, {10, 8, 6, 4, 2}, 3, true);
  const auto spec = sp::PreconditionSpec::make(sp::TransformKind::Hadamard, p, 9);
  const auto y = sp::precondition_matrix(data.x, spec);
  const auto raw = sp::compute_stats(data.x);
  const auto pre = sp::compute_stats(y);
  const auto c_raw = sp::sample_covariance(data.x);
  const auto c_pre = sp::sample_covariance(y);
  for (double gamma : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    const auto m = static_cast<std::size_t>(std::llround(gamma * p));
    sp::BoundInputs a;
    a.p = p;
    a.m = m;
    a.n = n;
    a.stats = raw;
    a.rho = 1.0;
    sp::BoundInputs b = a;
    b.stats = pre;
    EXPECT_LE(sp::mean_t_for_delta1(0.001, b), sp::mean_t_for_delta1(0.001, a)) << gamma;
    const auto ka = sp::cov_constants(a, sp::spectral_norm_symmetric(c_raw), c_raw.diagonal().maxCoeff());
    const auto kb = sp::cov_constants(b, sp::spectral_norm_symmetric(c_pre), c_pre.diagonal().maxCoeff());
    EXPECT_LE(sp::cov_t_for_delta2(0.01, p, kb.L, kb.sigma_sq), sp::cov_t_for_delta2(0.01, p, ka.L, ka.sigma_sq))
        << gamma;
  }
}
