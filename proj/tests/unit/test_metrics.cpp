#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "numberline/errors.hpp"
#include "numberline/metrics.hpp"
#include "oracles.hpp"

using namespace numberline;

namespace {

double sp(const std::vector<double>& x, const std::vector<double>& y) {
  return spearman(std::span<const double>(x), std::span<const double>(y));
}

std::vector<Sample> grouped(const std::vector<int>& groups) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    out.push_back(Sample{i, 0, groups[i], SampleKind::numbers, true});
  return out;
}

}  // namespace

TEST_CASE("spearman small cases") {
  CHECK(sp({1, 2, 3}, {10, 20, 30}) == 1.0);
  CHECK(sp({1, 2, 3}, {3, 2, 1}) == -1.0);
  CHECK(sp({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(sp({1, 1, 1}, {1, 2, 3}), DegenerateError);
  CHECK_THROWS_AS(sp({1}, {1}), DegenerateError);
  CHECK_THROWS_AS(sp({1, 2}, {1, 2, 3}), DegenerateError);
}

TEST_CASE("average ranks share tied positions") {
  Eigen::VectorXd v(6);
  v << 3, 1, 3, 2, 3, 0;
  const auto r = average_ranks(v);
  Eigen::VectorXd expected(6);
  expected << 5, 2, 5, 3, 5, 1;
  CHECK(r == expected);
}

TEST_CASE("spearman matches brute force with ties") {
  std::mt19937_64 gen(31);
  std::uniform_int_distribution<int> size(2, 30), small(0, 5);
  std::normal_distribution<double> normal;
  int checked = 0;
  while (checked < 300) {
    const auto n = static_cast<std::size_t>(size(gen));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = small(gen);
      y[i] = checked % 2 ? normal(gen) : small(gen);
    }
    const auto rx = oracle::count_ranks(x), ry = oracle::count_ranks(y);
    if (std::adjacent_find(rx.begin(), rx.end(), std::not_equal_to<>()) == rx.end() ||
        std::adjacent_find(ry.begin(), ry.end(), std::not_equal_to<>()) == ry.end())
      continue;  // constant input
    CHECK(std::abs(sp(x, y) - oracle::spearman(x, y)) <= 1e-12);
    ++checked;
  }
}

TEST_CASE("spearman symmetry and monotone invariance") {
  std::mt19937_64 gen(32);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(15), y(15), ey(15), ny(15);
    for (std::size_t i = 0; i < 15; ++i) {
      x[i] = normal(gen);
      y[i] = normal(gen);
      ey[i] = std::exp(y[i]);
      ny[i] = -y[i];
    }
    const double rho = sp(x, y);
    CHECK(rho == sp(x, ey));
    CHECK(rho == sp(y, x));
    // The tie-free closed form rounds 1 - s and 1 - (2 - s) separately.
    CHECK(std::abs(sp(x, ny) + rho) <= 1e-14);
    CHECK(rho >= -1.0);
    CHECK(rho <= 1.0);
    CHECK(rho == oracle::spearman_no_ties(x, y));
  }
}

TEST_CASE("group_centers") {
  SUBCASE("mean per group") {
    Eigen::VectorXd s(5);
    s << 1, 3, 5, 7, 9;
    const auto c = group_centers(s, grouped({1, 1, 2, 3, 3}));
    CHECK(c.group_indices == std::vector<int>{1, 2, 3});
    CHECK(c.centers == std::vector<double>{2.0, 5.0, 8.0});
    CHECK(c.counts == std::vector<int>{2, 1, 2});
    CHECK(c.dropped_groups.empty());
  }
  SUBCASE("single members") {
    Eigen::VectorXd s(3);
    s << 2, 0, 1;
    const auto c = group_centers(s, grouped({3, 1, 2}));
    CHECK(c.centers == std::vector<double>{0.0, 1.0, 2.0});
  }
  SUBCASE("empty groups are dropped and recorded") {
    Eigen::VectorXd s(4);
    s << 1, 2, 3, 4;
    const auto c = group_centers(s, grouped({1, 3, 5, 5}));
    CHECK(c.group_indices == std::vector<int>{1, 3, 5});
    CHECK(c.dropped_groups == std::vector<int>{2, 4});
  }
  SUBCASE("too few groups") {
    Eigen::VectorXd s(4);
    s << 1, 2, 3, 4;
    CHECK_THROWS_AS(group_centers(s, grouped({1, 1, 2, 2})), InsufficientGroupsError);
  }
  SUBCASE("unassigned group") {
    Eigen::VectorXd s(3);
    s << 1, 2, 3;
    CHECK_THROWS_AS(group_centers(s, grouped({1, 0, 2})), RangeError);
  }
}

TEST_CASE("SRI worked examples") {
  SUBCASE("powers of ten") {
    const std::vector<double> m{10, 100, 1000, 10000, 100000};
    const auto fit = fit_sri(m);
    CHECK(fit.alpha == doctest::Approx(9.0).epsilon(1e-6));
    CHECK(fit.beta == doctest::Approx(10.0).epsilon(1e-6));
    double scale = 0.0;
    for (std::size_t i = 1; i < m.size(); ++i) scale += (m[i] - m[i - 1]) * (m[i] - m[i - 1]);
    CHECK(fit.residual <= 1e-6 * scale);
    CHECK(fit.converged);
    CHECK_FALSE(fit.negative_diffs);
  }
  SUBCASE("identity") {
    const auto fit = fit_sri(std::vector<double>{1, 2, 3, 4, 5});
    CHECK(fit.alpha == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.beta == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("concave") {
    const auto fit = fit_sri(std::vector<double>{0.9, 0.99, 0.999, 0.9999, 0.99999});
    CHECK(fit.alpha == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(fit.beta == doctest::Approx(0.1).epsilon(1e-6));
  }
  SUBCASE("direct variant recovers offset, alpha and beta") {
    std::vector<double> m;
    for (int i = 1; i <= 6; ++i) m.push_back(-3.0 + 2.0 * std::pow(1.5, i));
    const auto fit = fit_sri(m, SriVariant::direct);
    CHECK(fit.offset == doctest::Approx(-3.0).epsilon(1e-6));
    CHECK(fit.alpha == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.beta == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(fit.variant == SriVariant::direct);
  }
}

TEST_CASE("SRI recovers random noiseless parameters") {
  std::mt19937_64 gen(33);
  std::uniform_real_distribution<double> a(0.1, 100.0), b(0.1, 15.0);
  std::uniform_int_distribution<int> kdist(4, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const double alpha = a(gen), beta = b(gen);
    const int k = kdist(gen);
    std::vector<double> m{0.0};
    for (int i = 1; i < k; ++i) m.push_back(m.back() + alpha * std::pow(beta, i));
    const auto fit = fit_sri(m);
    CHECK(std::abs(fit.alpha - alpha) / alpha <= 1e-6);
    CHECK(std::abs(fit.beta - beta) / beta <= 1e-6);
    CHECK(fit.residual >= 0.0);
  }
}

TEST_CASE("SRI differences fit ignores a constant offset") {
  const std::vector<double> m{0.5, 1.25, 3.0, 7.5, 16.0};
  std::vector<double> shifted;
  for (const double v : m) shifted.push_back(v + 256.0);
  const auto a = fit_sri(m);
  const auto b = fit_sri(shifted);
  CHECK(a.alpha == b.alpha);
  CHECK(a.beta == b.beta);
}

TEST_CASE("SRI with non-monotone centers") {
  const auto fit = fit_sri(std::vector<double>{0.0, 1.0, 0.5, 2.0, 4.0});
  CHECK(fit.negative_diffs);
  CHECK(fit.alpha > 0.0);
  CHECK(fit.beta > 0.0);
  CHECK(std::isfinite(fit.residual));
}

TEST_CASE("SRI errors") {
  CHECK_THROWS_AS(fit_sri(std::vector<double>{1, 2}), InsufficientGroupsError);
  CHECK_THROWS_AS(fit_sri(std::vector<double>{3, 3, 3, 3}), DegenerateError);
  CHECK_THROWS_AS(fit_sri(std::vector<double>{1, NAN, 3}), DataError);
  CHECK(parse_sri_variant("direct") == SriVariant::direct);
  CHECK_THROWS_AS(parse_sri_variant("ratio"), ParseError);
}

TEST_CASE("classify_beta") {
  CHECK(classify_beta(10.0).regime == Regime::superlinear);
  CHECK(classify_beta(1.05, 0.1).regime == Regime::logarithmic);
  CHECK(classify_beta(0.83, 0.1).regime == Regime::sublogarithmic);
  CHECK(classify_beta(1.1, 0.1).regime == Regime::logarithmic);
  CHECK(classify_beta(0.9, 0.1).regime == Regime::logarithmic);
  CHECK(classify_beta(1.1000001, 0.1).regime == Regime::superlinear);
  CHECK(classify_beta(0.8999999, 0.1).regime == Regime::sublogarithmic);
  CHECK(classify_beta(2.0, 1.5).regime == Regime::logarithmic);
  CHECK(classify_beta(0.5).tolerance == kDefaultBetaTolerance);
  CHECK_THROWS_AS(classify_beta(0.0), RangeError);
  CHECK_THROWS_AS(classify_beta(-1.0), RangeError);
}

TEST_CASE("classify_beta partitions the positive axis") {
  std::mt19937_64 gen(34);
  std::uniform_real_distribution<double> logbeta(-6.0, 6.0), tau(0.01, 0.9);
  for (int trial = 0; trial < 2000; ++trial) {
    const double beta = std::exp(logbeta(gen)), t = tau(gen);
    const auto regime = classify_beta(beta, t).regime;
    const int hits = (beta > 1 + t) + (std::abs(beta - 1) <= t) + (beta < 1 - t);
    CHECK(hits == 1);
    if (beta > 1 + t) CHECK(regime == Regime::superlinear);
    if (beta < 1 - t) CHECK(regime == Regime::sublogarithmic);
    if (std::abs(beta - 1) <= t) CHECK(regime == Regime::logarithmic);
  }
}
