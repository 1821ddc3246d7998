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


#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "sketchpipe.hpp"

namespace sp = sketchpipe;
namespace ex = sketchpipe::experiments;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("sketchpipe_exp_" + name);
  std::filesystem::remove_all(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find("\r\n")); }

}  // namespace

TEST(Csv, EscapesOnlyWhenNeeded) {
  EXPECT_EQ(ex::csv_escape("plain"), "plain");
  EXPECT_EQ(ex::csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(ex::csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(ex::csv_escape("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, NumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.0, 0.0}) {
    const std::string s = ex::csv_number(v);
    EXPECT_EQ(s.find(','), std::string::npos);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
}

TEST(Csv, TableUsesCrlfAndHeader) {
  ex::CsvTable t({"name", "value"});
  t.add_row("x,y", 1.5);
  t.add_row(std::string("z"), std::size_t{7});
  EXPECT_EQ(t.str(), "name,value\r\n\"x,y\",1.5\r\nz,7\r\n");
  EXPECT_THROW(t.add({"only one"}), sp::DimensionError);
}

TEST(Csv, WriteCreatesDirectories) {
  const auto d = scratch_dir("write");
  ex::CsvTable t({"a"});
  t.add_row(true);
  t.write(d / "nested" / "t.csv");
  EXPECT_EQ(slurp(d / "nested" / "t.csv"), "a\r\n1\r\n");
  std::filesystem::remove_all(d);
}

TEST(Helpers, Moments) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(ex::mean_of(v), 2.5);
  EXPECT_DOUBLE_EQ(ex::std_of(v), std::sqrt(5.0 / 3.0));
  EXPECT_DOUBLE_EQ(ex::max_of(v), 4);
  EXPECT_DOUBLE_EQ(ex::min_of(v), 1);
  EXPECT_EQ(ex::scaled(1000, 0.0001), 1u);
  EXPECT_EQ(ex::scaled(1000, 0.25), 250u);
}

TEST(Helpers, TrialSeedsDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t n : {10, 100, 1000}) {
    for (std::uint64_t r = 0; r < 100; ++r) seen.insert(ex::trial_seed(5, n, r));
  }
  EXPECT_EQ(seen.size(), 300u);
}

TEST(MeanError, ShrinksWithNAndStaysUnderBound) {
  ex::MeanErrorParams prm;
  prm.p = 16;
  prm.ns = {50, 800};
  prm.trials = 30;
  const auto rows = ex::run_mean_error(prm);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.m, 5u);
    EXPECT_LE(r.mean_err, r.max_err);
    EXPECT_LE(r.bound_t_min, r.bound_t);
    EXPECT_EQ(r.exceed, 0u);
  }
  EXPECT_LT(rows[1].mean_err, rows[0].mean_err);
  EXPECT_LT(rows[1].bound_t, rows[0].bound_t);
}

TEST(MeanError, CsvSchemaAndDeterminism) {
  ex::MeanErrorParams prm;
  prm.p = 8;
  prm.ns = {20};
  prm.trials = 5;
  const auto a = ex::mean_error_csv(ex::run_mean_error(prm)).str();
  const auto b = ex::mean_error_csv(ex::run_mean_error(prm)).str();
  EXPECT_EQ(a, b);
  EXPECT_EQ(first_line(a), "n,m,mean_err,max_err,bound_t,bound_t_min,exceed_count");
  prm.seed = 2;
  EXPECT_NE(ex::mean_error_csv(ex::run_mean_error(prm)).str(), a);
}

TEST(CovError, RowsFollowPointsAndBoundHolds) {
  ex::CovErrorParams prm;
  prm.p = 16;
  prm.k = 2;
  prm.lambdas = {3, 1};
  prm.trials = 4;
  prm.points = {{64, 0.5, sp::TransformKind::DCT}, {128, 0.5, sp::TransformKind::None},
                {64, 0.25, sp::TransformKind::Hadamard}};
  const auto rows = ex::run_cov_error(prm);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].point.n, 128u);
  EXPECT_EQ(rows[1].point.kind, sp::TransformKind::None);
  EXPECT_EQ(rows[0].m, 8u);
  EXPECT_EQ(rows[2].m, 4u);
  for (const auto& r : rows) {
    EXPECT_GT(r.mean_err, 0.0);
    EXPECT_LE(r.mean_err, r.max_err);
    EXPECT_LE(r.max_err, r.bound_t_min);
  }
  const auto csv = ex::cov_error_csv(rows).str();
  EXPECT_EQ(csv, ex::cov_error_csv(ex::run_cov_error(prm)).str());
  EXPECT_NE(first_line(csv).find("bound_t"), std::string::npos);
}

TEST(CovError, PresetsMatchFigureSetups) {
  const auto a = ex::fig3a_params();
  EXPECT_EQ(a.p, 200u);
  EXPECT_EQ(a.lambdas, (std::vector<double>{10, 8, 6, 4, 2}));
  for (const auto& pt : a.points) EXPECT_DOUBLE_EQ(pt.gamma, 0.3);
  const auto b = ex::fig3b_params();
  for (const auto& pt : b.points) EXPECT_EQ(pt.n, 10 * b.p);
  const auto c = ex::fig4_params();
  EXPECT_TRUE(c.canonical_basis);
  EXPECT_EQ(c.p, 512u);
}

TEST(PcRecovery, FullSamplingRecoversSeparatedSpikes) {
  ex::PcRecoveryParams prm;
  prm.p = 32;
  prm.n = 4000;
  prm.lambdas = {10, 5, 2};
  prm.gammas = {1.0};
  prm.trials = 3;
  const auto rows = ex::run_pc_recovery(prm);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.m, 32u);
    EXPECT_DOUBLE_EQ(r.mean_recovered, 3.0);
    EXPECT_DOUBLE_EQ(r.std_recovered, 0.0);
  }
}

TEST(PcRecovery, TableHasEveryGammaWithAndWithout) {
  ex::PcRecoveryParams prm;
  prm.p = 32;
  prm.n = 64;
  prm.lambdas = {3, 2, 1};
  prm.trials = 2;
  const auto csv = ex::pc_recovery_csv(ex::run_pc_recovery(prm));
  ASSERT_EQ(csv.rows().size(), 10u);
  for (std::size_t q = 0; q < 10; ++q) {
    EXPECT_EQ(csv.rows()[q][0], ex::csv_number(prm.gammas[q / 2]));
    EXPECT_EQ(csv.rows()[q][2], q % 2 == 0 ? "1" : "0");
  }
}

TEST(ExplainedVariance, BothMethodsInUnitInterval) {
  ex::ExplainedVarianceParams prm;
  prm.p = 32;
  prm.n = 64;
  prm.k = 3;
  prm.gammas = {0.25, 0.5};
  prm.trials = 4;
  prm.dof = 5;
  const auto rows = ex::run_explained_variance(prm);
  ASSERT_EQ(rows.size(), 4u);
  std::set<std::string> methods;
  for (const auto& r : rows) {
    methods.insert(r.method);
    EXPECT_GT(r.min_ev, 0.0);
    EXPECT_LE(r.mean_ev, 1.0 + 1e-12);
    EXPECT_GE(r.std_ev, 0.0);
  }
  EXPECT_EQ(methods, (std::set<std::string>{ex::kPreconditionSample, ex::kUniformColumns}));
}

TEST(ExplainedVariance, ColumnSamplingAtFullBudgetMatchesExactPcs) {
  const auto x = sp::gen_multivariate_t(16, 40, 5.0, 3);
  const auto u = ex::column_sample_pcs(x, 40, 2, 1);
  const auto exact = sp::top_eigen(sp::sample_covariance(x), 2).vectors;
  for (Eigen::Index c = 0; c < 2; ++c) EXPECT_NEAR(std::abs(u.col(c).dot(exact.col(c))), 1.0, 1e-8);
}

TEST(Hk, FullSamplingHasNoDeviation) {
  EXPECT_DOUBLE_EQ(ex::hk_deviation_sampled(sp::SamplingPlan{1, 10, 10}, 37), 0.0);
  ex::HkParams prm;
  prm.ns = {50, 500};
  prm.trials = 40;
  const auto rows = ex::run_hk(prm);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.m, 30u);
    EXPECT_LE(r.max_dev, r.bound_t);
  }
  EXPECT_LT(rows[1].mean_dev, rows[0].mean_dev);
  EXPECT_EQ(ex::hk_csv(rows).str(), ex::hk_csv(ex::run_hk(prm)).str());
}

TEST(ClusterSpeed, SmallInstanceAgrees) {
  ex::ClusterSpeedParams prm;
  prm.p = 64;
  prm.n = 3000;
  prm.K = 3;
  prm.gamma = 0.2;
  const auto r = ex::run_cluster_speed(prm);
  EXPECT_EQ(r.m, 13u);
  EXPECT_GE(r.agreement, 0.95);
  EXPECT_GE(r.accuracy_full, 0.95);
  EXPECT_GT(r.seconds_per_iteration_full, 0.0);
  const auto csv = ex::cluster_speed_csv(r);
  const auto& h = csv.header();
  EXPECT_NE(std::find(h.begin(), h.end(), "agreement"), h.end());
  EXPECT_NE(std::find(h.begin(), h.end(), "speedup"), h.end());
}

TEST(Methods, NamesAndPassCounts) {
  std::set<std::string> names;
  for (auto m : ex::all_methods()) names.insert(ex::to_string(m));
  EXPECT_EQ(names.size(), ex::all_methods().size());
  EXPECT_TRUE(names.count("feature_selection_exact_svd"));

  const auto d = sp::gen_clusters(32, 300, 3, 2.0, 0.3, 4);
  sp::KMeansOptions o;
  o.n_init = 2;
  o.seed = 9;
  for (auto m : ex::all_methods()) {
    const auto res = ex::run_method(m, d.x, 3, 0.25, o);
    EXPECT_EQ(res.assignments.size(), 300u) << ex::to_string(m);
    EXPECT_GE(sp::clustering_accuracy(res.assignments.labels, d.labels), 0.9) << ex::to_string(m);
  }
  EXPECT_EQ(ex::run_method(ex::Method::Sparsified, d.x, 3, 0.25, o).diagnostics.passes, 1u);
  EXPECT_EQ(ex::run_method(ex::Method::TwoPass, d.x, 3, 0.25, o).diagnostics.passes, 2u);
  EXPECT_EQ(ex::run_method(ex::Method::FeatureSelection, d.x, 3, 0.25, o).diagnostics.passes, 3u);
}

TEST(Accuracy, RecordsAndSummary) {
  const auto d = sp::gen_clusters(32, 300, 3, 2.0, 0.3, 5);
  ex::AccuracyParams prm;
  prm.methods = {ex::Method::Full, ex::Method::Sparsified};
  prm.gammas = {0.3};
  prm.replicates = 3;
  prm.n_init = 2;
  const auto recs = ex::run_accuracy(d.x, d.labels, prm);
  ASSERT_EQ(recs.size(), 6u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(recs[2 * r].method, ex::Method::Full);
    EXPECT_EQ(recs[2 * r].replicate, r);
    EXPECT_DOUBLE_EQ(recs[2 * r].gamma, 1.0);
  }
  const auto sum = ex::summarize(recs);
  ASSERT_EQ(sum.size(), 2u);
  const auto* s = ex::find_summary(sum, ex::Method::Sparsified, 0.3);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->replicates, 3u);
  EXPECT_EQ(ex::find_summary(sum, ex::Method::TwoPass, 0.3), nullptr);
  EXPECT_EQ(ex::accuracy_csv(recs).rows().size(), 6u);
  EXPECT_EQ(ex::accuracy_summary_csv(sum).rows().size(), 2u);
}

TEST(Registry, KnownNames) {
  std::set<std::string> names;
  for (const auto& e : ex::experiment_registry()) {
    names.insert(e.name);
    EXPECT_FALSE(e.description.empty());
  }
  for (const char* n : {"fig2", "fig3a", "fig3b", "fig4", "fig5", "fig7", "table1", "mnist-accuracy"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
}

TEST(Registry, UnknownNameListsChoices) {
  try {
    ex::run_experiment("fig99", {});
    FAIL() << "expected ParameterError";
  } catch (const sp::ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("fig2"), std::string::npos);
  }
}

TEST(Registry, MissingMnistIsActionable) {
  const auto d = scratch_dir("nomnist");
  std::filesystem::create_directories(d);
  ex::RunContext ctx;
  ctx.mnist_dir = d.string();
  ctx.out_dir = d / "out";
  try {
    ex::run_experiment("mnist-accuracy", ctx);
    FAIL() << "expected IoError";
  } catch (const sp::IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("train-images-idx3-ubyte"), std::string::npos);
    EXPECT_NE(msg.find("--mnist-dir"), std::string::npos);
  }
  EXPECT_FALSE(std::filesystem::exists(ctx.out_dir / "mnist_accuracy.csv"));
  std::filesystem::remove_all(d);
}

TEST(Registry, TinyScaleRunsWriteDeterministicCsv) {
  const auto d = scratch_dir("tiny");
  ex::RunContext ctx;
  ctx.scale = 0.01;
  ctx.seed = 3;
  for (const char* name : {"fig2", "fig7"}) {
    ctx.out_dir = d / "a";
    const auto a = ex::run_experiment(name, ctx);
    ctx.out_dir = d / "b";
    const auto b = ex::run_experiment(name, ctx);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].filename().string(), std::string(name) + ".csv");
    EXPECT_EQ(slurp(a[0]), slurp(b[0]));
  }
  const std::string fig2 = first_line(slurp(d / "a" / "fig2.csv"));
  for (const char* col : {"n", "mean_err", "max_err", "bound_t"}) {
    EXPECT_NE(fig2.find(col), std::string::npos) << col;
  }
  std::filesystem::remove_all(d);
}
