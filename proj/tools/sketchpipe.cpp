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


// sketchpipe command-line tool: generate data, sketch it, estimate PCA,
// cluster, evaluate bounds and regenerate the experiments as CSV.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sketchpipe.hpp"

namespace sp = sketchpipe;
namespace ex = sketchpipe::experiments;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

sp::PreconditionSpec make_spec(sp::TransformKind kind, std::size_t p, std::uint64_t seed) {
  return sp::PreconditionSpec::make(kind, p, sp::derive_seed(seed, ex::detail::kSignSalt));
}

sp::SamplingPlan make_plan(double gamma, std::size_t p_pad, std::uint64_t seed) {
  return sp::SamplingPlan::from_gamma(gamma, p_pad, sp::derive_seed(seed, ex::detail::kSampleSalt));
}

bool is_sketch_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw sp::IoError("cannot open '" + path + "'");
  std::array<char, 5> magic{};
  f.read(magic.data(), magic.size());
  return f && magic == sp::io_detail::kSketchMagic;
}

std::vector<std::uint32_t> read_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw sp::IoError("cannot open labels file '" + path + "'");
  std::vector<std::uint32_t> out;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "label") continue;
    out.push_back(static_cast<std::uint32_t>(std::stoul(line)));
  }
  return out;
}

void write_labels(const std::string& path, const std::vector<std::uint32_t>& labels) {
  ex::CsvTable t({"label"});
  for (auto l : labels) t.add_row(l);
  t.write(path);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const std::string& prefix) {
  std::vector<std::string> header{"row"};
  for (Eigen::Index c = 0; c < m.cols(); ++c) header.push_back(prefix + std::to_string(c + 1));
  ex::CsvTable t(header);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row{std::to_string(r)};
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(ex::csv_number(m(r, c)));
    t.add(std::move(row));
  }
  t.write(path);
}

void emit(const ex::CsvTable& t, const std::string& out_csv) {
  if (out_csv.empty() || out_csv == "-") {
    std::cout << t.str();
  } else {
    t.write(out_csv);
    std::cout << "wrote " << out_csv << "\n";
  }
}

// ------------------------------------------------------------------ generate

struct GenerateArgs {
  std::string out;
  std::string kind = "clusters";
  std::size_t p = 64, n = 1000, k = 5;
  double separation = 1.0, noise = 0.5, dof = 1.0;
  bool canonical = false;
  std::uint64_t seed = 1;
  std::string labels_out, pcs_out;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.kind == "clusters") {
    auto d = sp::gen_clusters(a.p, a.n, a.k, a.separation, a.noise, a.seed);
    sp::write_dense(a.out, d.x);
    if (!a.labels_out.empty()) write_labels(a.labels_out, d.labels);
  } else if (a.kind == "spiked") {
    std::vector<double> lam(a.k);
    for (std::size_t j = 0; j < a.k; ++j) lam[j] = static_cast<double>(a.k - j);
    auto d = sp::gen_spiked(a.p, a.n, a.k, lam, a.seed, a.canonical);
    sp::write_dense(a.out, d.x);
    if (!a.pcs_out.empty()) write_matrix_csv(a.pcs_out, d.u, "pc");
  } else if (a.kind == "t") {
    sp::write_dense(a.out, sp::gen_multivariate_t(a.p, a.n, a.dof, a.seed));
  } else if (a.kind == "mean-noise") {
    sp::write_dense(a.out, sp::gen_mean_plus_noise(a.p, a.n, a.seed).x);
  } else {
    throw sp::ParameterError("unknown --kind '" + a.kind + "'");
  }
  std::cout << "wrote " << a.out << " (p=" << a.p << ", n=" << a.n << ")\n";
  return 0;
}

// -------------------------------------------------------------------- sketch

struct SketchArgs {
  std::string in, out;
  double gamma = 0.1;
  std::string transform = "hadamard";
  std::uint64_t seed = 1;
  std::size_t chunk_cols = 1024;
};

int cmd_sketch(const SketchArgs& a) {
  sp::DenseFileSource src(a.in);
  const auto spec = make_spec(sp::transform_kind_from_string(a.transform), src.rows(), a.seed);
  const auto plan = make_plan(a.gamma, spec.p_pad, a.seed);
  const auto t0 = Clock::now();
  const auto s = sp::sketch_stream(src, spec, plan, a.chunk_cols);
  const double sketch_s = since(t0);
  const auto t1 = Clock::now();
  sp::write_sketch(a.out, s);
  const double write_s = since(t1);
  std::cout << "passes " << src.passes() << "\n"
            << "p " << s.p_raw() << " p_pad " << s.p() << " n " << s.n() << " m " << s.m() << "\n"
            << "nnz " << s.nnz() << "\n"
            << "sketch_seconds " << sketch_s << "\n"
            << "write_seconds " << write_s << "\n";
  return 0;
}

// ----------------------------------------------------------------------- pca

struct PcaArgs {
  std::string sketch;
  std::size_t k = 5;
  std::string out_csv, reference, mean_csv, pcs_csv;
};

int cmd_pca(const PcaArgs& a) {
  const auto s = sp::read_sketch(a.sketch);
  if (a.k < 1 || a.k > s.p_raw()) throw sp::ParameterError("-k must lie in [1, p]");
  const auto cov = sp::estimate_covariance(s);
  const auto top = sp::top_eigen(cov.matrix, a.k);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(s.p_raw()), static_cast<Eigen::Index>(a.k));
  std::vector<double> buf(s.p());
  for (std::size_t t = 0; t < a.k; ++t) {
    for (std::size_t j = 0; j < s.p(); ++j) buf[j] = top.vectors(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t));
    sp::unprecondition_inplace(buf, s.spec());
    for (std::size_t j = 0; j < s.p_raw(); ++j) u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = buf[j];
  }

  std::optional<sp::DenseMatrix> ref;
  if (!a.reference.empty()) {
    ref = sp::read_dense(a.reference);
    if (ref->rows() != s.p_raw()) throw sp::DimensionError("reference matrix has the wrong number of rows");
  }
  ex::CsvTable t({"component", "eigenvalue", "explained_variance", "reference_explained_variance"});
  const double trace = cov.matrix.trace();
  std::optional<Eigen::MatrixXd> ref_u;
  if (ref) ref_u = sp::top_eigen(sp::sample_covariance(*ref), a.k).vectors;
  for (std::size_t c = 1; c <= a.k; ++c) {
    const double ev = top.values(static_cast<Eigen::Index>(c - 1));
    std::string cum = "", ref_cum = "";
    if (ref) {
      cum = ex::csv_number(sp::explained_variance(u.leftCols(static_cast<Eigen::Index>(c)), *ref));
      ref_cum = ex::csv_number(sp::explained_variance(ref_u->leftCols(static_cast<Eigen::Index>(c)), *ref));
    } else {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += top.values(static_cast<Eigen::Index>(j));
      cum = ex::csv_number(acc / trace);
    }
    t.add({std::to_string(c), ex::csv_number(ev), cum, ref_cum});
  }
  emit(t, a.out_csv);
  if (!a.mean_csv.empty()) {
    const auto mu = sp::estimate_mean(s);
    ex::CsvTable m({"coordinate", "mean"});
    for (std::size_t j = 0; j < mu.size(); ++j) m.add_row(j, mu[j]);
    m.write(a.mean_csv);
  }
  if (!a.pcs_csv.empty()) write_matrix_csv(a.pcs_csv, u, "pc");
  return 0;
}

// -------------------------------------------------------------------- kmeans

struct KmeansArgs {
  std::string input;
  std::size_t K = 3;
  double gamma = 0.1;
  int passes = 1;
  std::string baseline = "none";
  std::string transform = "hadamard";
  bool full = false;
  std::size_t replicates = 1, n_init = 5, max_iter = 100;
  std::uint64_t seed = 1;
  std::string labels, out_csv, assignments_out;
};

int cmd_kmeans(const KmeansArgs& a) {
  const bool sketch_in = is_sketch_file(a.input);
  const bool baseline = a.baseline != "none";
  if (baseline && a.baseline != "feature-extraction" && a.baseline != "feature-selection-exact-svd") {
    throw sp::ParameterError("unknown --baseline '" + a.baseline + "'");
  }
  if (a.passes != 1 && a.passes != 2) throw sp::ParameterError("--passes must be 1 or 2");
  if (sketch_in && (baseline || a.full || a.passes == 2)) {
    throw sp::ParameterError("a sketch input supports only single-pass sparsified K-means");
  }
  std::optional<std::vector<std::uint32_t>> truth;
  if (!a.labels.empty()) truth = read_labels(a.labels);

  std::optional<sp::SparseSketch> sketch;
  std::optional<sp::DenseMatrix> dense;
  if (sketch_in) sketch = sp::read_sketch(a.input);
  if (baseline || a.full) dense = sp::read_dense(a.input);

  const std::string method = a.full ? "kmeans"
                             : baseline ? (a.baseline == "feature-extraction" ? "feature_extraction"
                                                                              : "feature_selection_exact_svd")
                             : a.passes == 2 ? "sparsified_2pass"
                                             : "sparsified";
  ex::CsvTable t({"replicate", "method", "gamma", "accuracy", "objective", "iterations", "passes",
                  "sketch_seconds", "iterate_seconds", "seconds_per_iteration"});
  std::vector<double> accs, objs, secs;
  sp::KMeansResult last;
  for (std::size_t r = 0; r < a.replicates; ++r) {
    sp::KMeansOptions o;
    o.n_init = a.n_init;
    o.max_iter = a.max_iter;
    o.seed = sp::derive_seed(a.seed, r);
    o.transform = sp::transform_kind_from_string(a.transform);
    sp::KMeansResult res;
    if (a.full) {
      res = sp::lloyd_full(*dense, a.K, o);
      res.diagnostics.passes = 1;
    } else if (baseline) {
      const auto m = static_cast<std::size_t>(std::max<long long>(1, std::llround(a.gamma * static_cast<double>(dense->rows()))));
      res = a.baseline == "feature-extraction" ? sp::feature_extraction_baseline(*dense, a.K, m, o)
                                               : sp::feature_selection_exact_svd(*dense, a.K, m, o);
    } else if (sketch_in) {
      res = sp::sparsified_kmeans(*sketch, a.K, o);
      res.diagnostics.passes = 0;
    } else {
      sp::DenseFileSource src(a.input);
      res = a.passes == 2 ? sp::sparsified_kmeans_two_pass(src, a.K, a.gamma, o)
                          : sp::sparsified_kmeans(src, a.K, a.gamma, o);
    }
    const double gamma = a.full ? 1.0 : sketch_in ? sketch->plan().gamma() : a.gamma;
    std::string acc;
    if (truth) {
      if (truth->size() != res.assignments.size()) throw sp::DimensionError("labels file length does not match n");
      const double v = sp::clustering_accuracy(res.assignments.labels, *truth);
      accs.push_back(v);
      acc = ex::csv_number(v);
    }
    objs.push_back(res.diagnostics.objective);
    secs.push_back(res.diagnostics.seconds_per_iteration());
    t.add({std::to_string(r), method, ex::csv_number(gamma), acc, ex::csv_number(res.diagnostics.objective),
           std::to_string(res.diagnostics.iterations), std::to_string(res.diagnostics.passes),
           ex::csv_number(res.diagnostics.sketch_seconds), ex::csv_number(res.diagnostics.iterate_seconds),
           ex::csv_number(res.diagnostics.seconds_per_iteration())});
    last = std::move(res);
  }
  const double gamma = a.full ? 1.0 : sketch_in ? sketch->plan().gamma() : a.gamma;
  auto agg = [&](const std::string& name, double (*f)(const std::vector<double>&)) {
    const bool have_std = name != "std" || a.replicates > 1;
    auto val = [&](const std::vector<double>& v) { return v.empty() || !have_std ? std::string() : ex::csv_number(f(v)); };
    t.add({name, method, ex::csv_number(gamma), val(accs), val(objs), "", "", "", "", val(secs)});
  };
  agg("mean", ex::mean_of);
  agg("std", ex::std_of);
  emit(t, a.out_csv);
  if (!a.assignments_out.empty()) write_labels(a.assignments_out, last.assignments.labels);
  return 0;
}

// -------------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string which;
  std::string data, transform = "hadamard";
  std::size_t p = 100, n = 1000, m = 0, n_k = 1000;
  double gamma = 0.3, delta = 1e-3, t = 0.1, eta = 1.0, beta = 8.0, alpha = 0.01;
  std::uint64_t seed = 1;
  std::string out_csv;
};

int cmd_bounds(const BoundsArgs& a) {
  ex::CsvTable t({"quantity", "value"});
  auto sampled = [&](std::size_t p) {
    return a.m ? a.m : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(a.gamma * static_cast<double>(p))));
  };
  if (a.which == "mean" || a.which == "cov") {
    if (a.data.empty()) throw sp::ParameterError("--which " + a.which + " needs --data (a DNSE1 matrix)");
    const auto x = sp::read_dense(a.data);
    const auto spec = make_spec(sp::transform_kind_from_string(a.transform), x.rows(), a.seed);
    const auto y = sp::precondition_matrix(x, spec);
    sp::BoundInputs in;
    in.p = spec.p_pad;
    in.m = sampled(spec.p_pad);
    in.n = y.cols();
    in.eta = sp::eta(spec);
    in.stats = sp::compute_stats(y);
    t.add_row("p", in.p);
    t.add_row("m", in.m);
    t.add_row("n", in.n);
    t.add_row("delta", a.delta);
    if (a.which == "mean") {
      t.add_row("tau", sp::tau(in.m, in.p));
      t.add_row("t", sp::mean_t_for_delta1(a.delta, in));
    } else {
      const auto c = sp::sample_covariance(y);
      const double cov_norm = sp::spectral_norm_symmetric(c);
      const double diag_norm = c.diagonal().cwiseAbs().maxCoeff();
      const auto k = sp::cov_constants(in, cov_norm, diag_norm);
      t.add_row("L", k.L);
      t.add_row("sigma_sq", k.sigma_sq);
      t.add_row("t", sp::cov_t_for_delta2(a.delta, static_cast<double>(in.p), k.L, k.sigma_sq));
    }
  } else if (a.which == "hk") {
    const std::size_t m = sampled(a.p);
    t.add_row("p", a.p);
    t.add_row("m", m);
    t.add_row("n_k", a.n_k);
    t.add_row("delta", a.delta);
    t.add_row("t", sp::hk_t_for_delta3(a.delta, a.n_k, a.p, m));
  } else if (a.which == "jl") {
    const double need = sp::jl_min_m(a.beta, static_cast<double>(a.p));
    t.add_row("beta", a.beta);
    t.add_row("p", a.p);
    t.add_row("min_m", need);
    t.add_row("feasible", need <= static_cast<double>(a.p));
    t.add_row("lower", sp::kJlLower);
    t.add_row("upper", sp::kJlUpper);
    t.add_row("failure_probability", 3.0 / a.beta);
  } else if (a.which == "cor4") {
    t.add_row("p", a.p);
    t.add_row("n", a.n);
    t.add_row("t", a.t);
    t.add_row("eta", a.eta);
    t.add_row("min_m", sp::cor4_min_m(static_cast<double>(a.p), static_cast<double>(a.n), a.t, a.eta));
    const std::size_t m = sampled(a.p);
    t.add_row("rho_at_m", sp::ros_rho(a.alpha, static_cast<double>(a.p), static_cast<double>(a.n),
                                      static_cast<double>(m), a.eta));
  } else {
    throw sp::ParameterError("--which must be one of mean, cov, hk, jl, cor4");
  }
  emit(t, a.out_csv);
  return 0;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
  std::string name;
  bool list = false;
  ex::RunContext ctx;
  std::string out_dir = "results";
};

int cmd_experiment(ExperimentArgs a) {
  if (a.list) {
    for (const auto& e : ex::experiment_registry()) std::cout << e.name << "\t" << e.description << "\n";
    return 0;
  }
  if (a.name.empty()) throw sp::ParameterError("--name is required (use --list to see experiments)");
  if (!(a.ctx.scale > 0.0)) throw sp::ParameterError("--scale must be positive");
  a.ctx.out_dir = a.out_dir;
  const auto t0 = Clock::now();
  for (const auto& path : ex::run_experiment(a.name, a.ctx)) std::cout << "wrote " << path.string() << "\n";
  std::cout << "seconds " << since(t0) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketchpipe: preconditioned sparse sketches for PCA and K-means"};
  app.require_subcommand(1);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "write a synthetic DNSE1 matrix");
  gen->add_option("out", ga.out, "output DNSE1 file")->required();
  gen->add_option("--kind", ga.kind, "clusters | spiked | t | mean-noise")
      ->check(CLI::IsMember({"clusters", "spiked", "t", "mean-noise"}));
  gen->add_option("-p", ga.p, "dimension");
  gen->add_option("-n", ga.n, "number of columns");
  gen->add_option("-k,-K", ga.k, "clusters or spikes");
  gen->add_option("--separation", ga.separation, "cluster center scale");
  gen->add_option("--noise", ga.noise, "cluster noise sigma");
  gen->add_option("--dof", ga.dof, "degrees of freedom for --kind t");
  gen->add_flag("--canonical", ga.canonical, "spiked PCs on canonical basis vectors");
  gen->add_option("--seed", ga.seed);
  gen->add_option("--labels-out", ga.labels_out, "cluster labels CSV");
  gen->add_option("--pcs-out", ga.pcs_out, "true principal components CSV");

  SketchArgs sa;
  auto* sk = app.add_subcommand("sketch", "precondition and sample a DNSE1 matrix into an SKCH1 sketch");
  sk->add_option("in", sa.in, "input DNSE1 file")->required()->check(CLI::ExistingFile);
  sk->add_option("out", sa.out, "output SKCH1 file")->required();
  sk->add_option("--gamma", sa.gamma, "kept fraction m/p")->check(CLI::Range(0.0, 1.0));
  sk->add_option("--transform", sa.transform)->check(CLI::IsMember({"hadamard", "dct", "none"}));
  sk->add_option("--seed", sa.seed);
  sk->add_option("--chunk-cols", sa.chunk_cols)->check(CLI::PositiveNumber);

  PcaArgs pa;
  auto* pca = app.add_subcommand("pca", "mean, covariance spectrum and top-k PCs from a sketch");
  pca->add_option("sketch", pa.sketch, "SKCH1 file")->required()->check(CLI::ExistingFile);
  pca->add_option("-k", pa.k, "number of components");
  pca->add_option("--out-csv", pa.out_csv, "per-component CSV ('-' for stdout)");
  pca->add_option("--reference", pa.reference, "DNSE1 matrix for explained variance")->check(CLI::ExistingFile);
  pca->add_option("--mean-csv", pa.mean_csv, "estimated mean CSV");
  pca->add_option("--pcs-csv", pa.pcs_csv, "estimated PCs CSV");

  KmeansArgs ka;
  auto* km = app.add_subcommand("kmeans", "sparsified K-means (or a baseline) with replicates");
  km->add_option("input", ka.input, "DNSE1 matrix or SKCH1 sketch")->required()->check(CLI::ExistingFile);
  km->add_option("-K", ka.K, "clusters")->check(CLI::PositiveNumber);
  km->add_option("--gamma", ka.gamma)->check(CLI::Range(0.0, 1.0));
  km->add_option("--passes", ka.passes, "1 or 2")->check(CLI::IsMember({1, 2}));
  km->add_option("--baseline", ka.baseline)
      ->check(CLI::IsMember({"none", "feature-extraction", "feature-selection-exact-svd"}));
  km->add_option("--transform", ka.transform)->check(CLI::IsMember({"hadamard", "dct", "none"}));
  km->add_flag("--full", ka.full, "plain K-means on the dense data");
  km->add_option("--replicates", ka.replicates)->check(CLI::PositiveNumber);
  km->add_option("--n-init", ka.n_init)->check(CLI::PositiveNumber);
  km->add_option("--max-iter", ka.max_iter)->check(CLI::PositiveNumber);
  km->add_option("--seed", ka.seed);
  km->add_option("--labels", ka.labels, "ground-truth labels CSV for accuracy")->check(CLI::ExistingFile);
  km->add_option("--out-csv", ka.out_csv, "per-replicate CSV ('-' for stdout)");
  km->add_option("--assignments-out", ka.assignments_out, "labels of the last replicate");

  BoundsArgs ba;
  auto* bd = app.add_subcommand("bounds", "evaluate a concentration bound");
  bd->add_option("--which", ba.which)->required()->check(CLI::IsMember({"mean", "cov", "hk", "jl", "cor4"}));
  bd->add_option("--data", ba.data, "DNSE1 matrix (mean, cov)")->check(CLI::ExistingFile);
  bd->add_option("--transform", ba.transform)->check(CLI::IsMember({"hadamard", "dct", "none"}));
  bd->add_option("-p", ba.p);
  bd->add_option("-n", ba.n);
  bd->add_option("-m", ba.m, "samples per column (overrides --gamma)");
  bd->add_option("--gamma", ba.gamma);
  bd->add_option("--n-k", ba.n_k, "cluster size (hk)");
  bd->add_option("--delta", ba.delta, "failure probability");
  bd->add_option("-t", ba.t, "target error (cor4)");
  bd->add_option("--eta", ba.eta, "1 for Hadamard, 0.5 for DCT (cor4)");
  bd->add_option("--beta", ba.beta, "jl parameter");
  bd->add_option("--alpha", ba.alpha, "failure probability of the norm bound (cor4)");
  bd->add_option("--seed", ba.seed);
  bd->add_option("--out-csv", ba.out_csv);

  ExperimentArgs ea;
  auto* xp = app.add_subcommand("experiment", "regenerate a named experiment as CSV");
  xp->add_option("--name", ea.name);
  xp->add_flag("--list", ea.list, "list experiment names");
  xp->add_option("--scale", ea.ctx.scale, "multiplies n and trial counts");
  xp->add_option("--out-dir", ea.out_dir);
  xp->add_option("--seed", ea.ctx.seed);
  xp->add_option("--mnist-dir", ea.ctx.mnist_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(ga);
    if (*sk) return cmd_sketch(sa);
    if (*pca) return cmd_pca(pa);
    if (*km) return cmd_kmeans(ka);
    if (*bd) return cmd_bounds(ba);
    if (*xp) return cmd_experiment(ea);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
