// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion N   run criterion N only (exit status 1 on failure)
//
// All randomness is seeded with 42.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <fmt/format.h>

#include "numberline/errors.hpp"
#include "numberline/metrics.hpp"
#include "numberline/projection.hpp"
#include "numberline/sweep.hpp"
#include "numberline/synth.hpp"
#include "oracles.hpp"

using namespace numberline;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = false;
  std::string detail;
};

SynthSpec synthetic(SynthLaw law, double noise = 0.01) {
  SynthSpec spec;
  spec.law = law;
  spec.dim = 64;
  spec.layers = 4;
  spec.signal_layer = 2;
  spec.noise_sigma = noise;
  spec.groups = GroupSpec{6, 20, kSeed};
  spec.seed = kSeed;
  return spec;
}

LayerReport pca_at_signal(const SynthSpec& spec) {
  SweepConfig config;
  config.method = ProjectionMethod::pca;
  config.components = 1;
  config.seed = kSeed;
  return run_sweep(generate(spec), config).per_layer.at(spec.signal_layer);
}

std::string regime_name(const LayerReport& r) {
  return r.regime ? std::string(to_string(r.regime->regime)) : "none";
}

// 1. Log law recovers a logarithmic regime.
Outcome log_law() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = pca_at_signal(synthetic(SynthLaw::log10));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = r.rho >= 0.95 && r.quality >= 0.90 && r.beta >= 0.85 && r.beta <= 1.15 &&
                    r.regime && r.regime->regime == Regime::logarithmic && seconds < 10.0;
  return {pass, fmt::format("rho={:.4f} (>=0.95) quality={:.4f} (>=0.90) beta={:.4f} "
                            "([0.85,1.15]) regime={} runtime={:.3f}s (<10s)",
                            r.rho, r.quality, r.beta, regime_name(r), seconds)};
}

// 2. Linear law is superlinear; noiseless beta is 10.
Outcome linear_law() {
  const auto r = pca_at_signal(synthetic(SynthLaw::linear));
  const auto exact = pca_at_signal(synthetic(SynthLaw::linear, 0.0));
  const bool pass = r.beta >= 8.0 && r.beta <= 12.0 && r.regime &&
                    r.regime->regime == Regime::superlinear &&
                    std::abs(exact.beta - 10.0) <= 1e-3;
  return {pass, fmt::format("beta={:.6f} ([8,12]) regime={} noiseless beta={:.6f} (10 +/- 1e-3)",
                            r.beta, regime_name(r), exact.beta)};
}

// 3. Reciprocal law is sublogarithmic with beta near 1/10.
Outcome reciprocal_law() {
  const auto r = pca_at_signal(synthetic(SynthLaw::reciprocal));
  const bool pass = r.beta >= 0.05 && r.beta <= 0.2 && r.regime &&
                    r.regime->regime == Regime::sublogarithmic;
  return {pass, fmt::format("beta={:.4f} ([0.05,0.2]) regime={} rho={:.4f} flags={}", r.beta,
                            regime_name(r), r.rho, r.flags)};
}

// 4. Shuffled codes: no monotonicity, beta unreliable.
Outcome null_control() {
  const auto r = pca_at_signal(synthetic(SynthLaw::shuffled));
  const bool pass = std::abs(r.rho) <= 0.3 && !r.beta_reliable();
  return {pass, fmt::format("|rho|={:.4f} (<=0.3) beta_reliable={} flags={}", std::abs(r.rho),
                            r.beta_reliable(), r.flags)};
}

// 5. Spearman against rank-then-Pearson brute force.
Outcome spearman_oracle() {
  std::mt19937_64 gen(kSeed);
  std::uniform_int_distribution<int> size(2, 30);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  int shortcut_mismatches = 0;
  int no_tie_cases = 0;
  int cases = 0;
  while (cases < 1000) {
    const auto n = static_cast<std::size_t>(size(gen));
    // Every other pair draws from a small integer range so ties are common.
    const bool tied = cases % 2 == 0;
    std::uniform_int_distribution<int> small(0, static_cast<int>(n / 2));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = tied ? small(gen) : normal(gen);
      y[i] = tied ? small(gen) : normal(gen);
    }
    const auto rx = oracle::count_ranks(x);
    const auto ry = oracle::count_ranks(y);
    const auto constant = [](const std::vector<double>& r) {
      return std::all_of(r.begin(), r.end(), [&](double v) { return v == r.front(); });
    };
    if (constant(rx) || constant(ry)) continue;
    ++cases;
    const double got = spearman(std::span<const double>(x), std::span<const double>(y));
    worst = std::max(worst, std::abs(got - oracle::spearman(x, y)));

    std::vector<double> sx = x, sy = y;
    std::sort(sx.begin(), sx.end());
    std::sort(sy.begin(), sy.end());
    const bool ties = std::adjacent_find(sx.begin(), sx.end()) != sx.end() ||
                      std::adjacent_find(sy.begin(), sy.end()) != sy.end();
    if (!ties) {
      ++no_tie_cases;
      if (got != oracle::spearman_no_ties(x, y)) ++shortcut_mismatches;
    }
  }
  const bool pass = worst <= 1e-12 && shortcut_mismatches == 0;
  return {pass, fmt::format("1000 pairs, max |diff|={:.3g} (<=1e-12); {} tie-free pairs vs "
                            "1-6sum(d^2)/(n(n^2-1)): {} not bitwise equal (0 allowed)",
                            worst, no_tie_cases, shortcut_mismatches)};
}

// 6. Noiseless SRI recovery.
Outcome sri_exactness() {
  std::mt19937_64 gen(kSeed);
  std::uniform_real_distribution<double> alpha_dist(0.1, 100.0), beta_dist(0.1, 15.0);
  std::uniform_int_distribution<int> k_dist(4, 8);
  double worst_alpha = 0.0, worst_beta = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const double alpha = alpha_dist(gen), beta = beta_dist(gen);
    const int k = k_dist(gen);
    std::vector<double> centers{0.0};
    for (int i = 1; i < k; ++i) centers.push_back(centers.back() + alpha * std::pow(beta, i));
    const auto fit = fit_sri(centers);
    worst_alpha = std::max(worst_alpha, std::abs(fit.alpha - alpha) / alpha);
    worst_beta = std::max(worst_beta, std::abs(fit.beta - beta) / beta);
  }
  const bool pass = worst_alpha <= 1e-6 && worst_beta <= 1e-6;
  return {pass, fmt::format("500 series, max rel err alpha={:.3g} beta={:.3g} (<=1e-6)",
                            worst_alpha, worst_beta)};
}

// 7. PCA against a Jacobi eigen-decomposition of the covariance.
Outcome pca_oracle() {
  std::mt19937_64 gen(kSeed);
  std::uniform_int_distribution<int> d_dist(1, 6), n_dist(3, 40);
  std::normal_distribution<double> normal;
  double worst_quality = 0.0, worst_ortho = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = d_dist(gen), n = n_dist(gen);
    Eigen::MatrixXd x(n, d);
    oracle::Matrix rows(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) {
        x(i, j) = normal(gen) * (1.0 + j);
        rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = x(i, j);
      }
    }
    const auto eig = oracle::jacobi_eigen(oracle::covariance(rows));
    double total = 0.0;
    for (const double v : eig.first) total += v;
    for (int p = 1; p <= std::min(2, d); ++p) {
      const auto out = fit_pca(x, p);
      double top = 0.0;
      for (int k = 0; k < p; ++k) top += eig.first[static_cast<std::size_t>(k)];
      worst_quality = std::max(worst_quality, std::abs(out.quality - top / total));
      const Eigen::MatrixXd gram = out.loadings * out.loadings.transpose();
      worst_ortho = std::max(worst_ortho,
                             (gram - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff());
    }
  }
  const bool pass = worst_quality <= 1e-8 && worst_ortho <= 1e-8;
  return {pass, fmt::format("100 matrices, max |quality diff|={:.3g} (<=1e-8), max "
                            "orthonormality error={:.3g} (<=1e-8)",
                            worst_quality, worst_ortho)};
}

// 8. PLS sanity on rank-one data and the single-feature case.
Outcome pls_sanity() {
  std::mt19937_64 gen(kSeed);
  std::normal_distribution<double> normal;
  double min_r2 = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd t(50), p(8);
    for (auto& v : t) v = normal(gen);
    for (auto& v : p) v = normal(gen);
    min_r2 = std::min(min_r2, fit_pls(t * p.transpose(), 2.0 * t, 1).quality);
  }
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + trial % 40;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    std::vector<double> xs, ys;
    for (int i = 0; i < n; ++i) {
      x(i, 0) = normal(gen);
      y(i) = 0.5 * x(i, 0) + normal(gen);
      xs.push_back(x(i, 0));
      ys.push_back(y(i));
    }
    const double r = oracle::pearson(xs, ys);
    worst = std::max(worst, std::abs(fit_pls(x, y, 1).quality - r * r));
  }
  const bool pass = min_r2 >= 1.0 - 1e-8 && worst <= 1e-10;
  return {pass, fmt::format("rank-one min R2={:.12f} (>=1-1e-8); D=1 max |R2 - r^2|={:.3g} "
                            "(<=1e-10)",
                            min_r2, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. The CLI is byte-for-byte deterministic.
Outcome determinism() {
#ifndef NUMBERLINE_CLI
  return {false, "CLI not built"};
#else
  oracle::TempDir dir;
  const auto run = [&](const std::string& args) {
    const std::string command = std::string("\"") + NUMBERLINE_CLI + "\" " + args + " >\"" +
                                (dir / "log.txt").string() + "\" 2>&1";
    const int raw = std::system(command.c_str());
    return WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
  };
  const auto data = (dir / "data").string();
  if (!run(fmt::format("generate-synthetic --law log10 --seed {} --out {}", kSeed, data))) {
    return {false, "generate-synthetic failed: " + slurp(dir / "log.txt")};
  }
  for (const char* out : {"a", "b"}) {
    if (!run(fmt::format("analyze {} --method pca --components 1 --runs 3 --seed {} --out {}",
                         data, kSeed, (dir / out).string()))) {
      return {false, "analyze failed: " + slurp(dir / "log.txt")};
    }
  }
  int compared = 0;
  for (const char* name :
       {"sweep.json", "summary.csv", "summary.md", "layer_curves.txt", "scatter.txt"}) {
    const auto a = slurp(dir / "a" / name);
    const auto b = slurp(dir / "b" / name);
    if (a.empty() || a != b) return {false, fmt::format("{} differs between runs", name)};
    ++compared;
  }
  return {true, fmt::format("{} files byte-identical across two analyze runs (runs=3)", compared)};
#endif
}

// 10. PCA keeps beta near 1 while the PLS prediction of raw values looks
// linear in value.
Outcome pca_vs_pls() {
  const auto spec = synthetic(SynthLaw::log10);
  const auto ds = generate(spec);
  const auto pca = pca_at_signal(spec);

  const auto values = ds.values();
  const auto pls = orient(fit_pls(ds.layer_matrix(spec.signal_layer), values, 1), values);
  const Eigen::VectorXd predicted = pls.predicted_target();
  const auto centers = group_centers(predicted, ds.labels());
  const auto direct = fit_sri(centers.centers, SriVariant::direct);

  const bool pass = pca.beta >= 0.85 && pca.beta <= 1.15 && direct.beta >= 5.0;
  return {pass, fmt::format("PCA beta={:.4f} ([0.85,1.15]); PLS R2={:.4f}, direct-fit beta on "
                            "predicted-value centers={:.4f} (>=5)",
                            pca.beta, pls.quality, direct.beta)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "log-law regime recovery", log_law},
      {2, "linear-law regime recovery", linear_law},
      {3, "reciprocal-law regime recovery", reciprocal_law},
      {4, "shuffled null control", null_control},
      {5, "Spearman oracle", spearman_oracle},
      {6, "SRI exactness", sri_exactness},
      {7, "PCA oracle", pca_oracle},
      {8, "PLS sanity", pls_sanity},
      {9, "CLI determinism", determinism},
      {10, "PCA vs PLS divergence", pca_vs_pls},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      fmt::print(stderr, "usage: acceptance [--criterion N]\n");
      return 2;
    }
  }
  if (only < 0 || only > static_cast<int>(criteria().size())) {
    fmt::print(stderr, "no criterion {}\n", only);
    return 2;
  }

  int failures = 0;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, fmt::format("error: {}", e.what())};
    }
    fmt::print("[{}] criterion {:>2} {}: {}\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name,
               outcome.detail);
    if (!outcome.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
