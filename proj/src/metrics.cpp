#include "numberline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/QR>
#include <fmt/format.h>

#include "numberline/errors.hpp"

namespace numberline {

Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const auto n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });

  Eigen::VectorXd ranks(n);
  for (Eigen::Index start = 0; start < n;) {
    Eigen::Index end = start + 1;
    while (end < n && values(order[static_cast<std::size_t>(end)]) ==
                          values(order[static_cast<std::size_t>(start)])) {
      ++end;
    }
    // Positions start..end-1 hold 1-based ranks start+1..end.
    const double shared = 0.5 * static_cast<double>(start + 1 + end);
    for (Eigen::Index k = start; k < end; ++k) ranks(order[static_cast<std::size_t>(k)]) = shared;
    start = end;
  }
  return ranks;
}

namespace {

bool has_ties(const Eigen::Ref<const Eigen::VectorXd>& values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

}  // namespace

double spearman(const Eigen::Ref<const Eigen::VectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) {
    throw DegenerateError(fmt::format("spearman inputs differ in length ({} vs {})", x.size(),
                                      y.size()));
  }
  if (x.size() < 2) throw DegenerateError("spearman needs at least 2 observations");
  if (!x.allFinite() || !y.allFinite()) throw DataError("spearman input is not finite");

  const Eigen::VectorXd rx = average_ranks(x);
  const Eigen::VectorXd ry = average_ranks(y);
  if (!has_ties(x) && !has_ties(y)) {
    // Integer ranks: the closed form is exact in the rank differences.
    std::int64_t d2 = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const auto d = static_cast<std::int64_t>(rx(i)) - static_cast<std::int64_t>(ry(i));
      d2 += d * d;
    }
    const double n = static_cast<double>(x.size());
    return 1.0 - 6.0 * static_cast<double>(d2) / (n * (n * n - 1.0));
  }
  const Eigen::VectorXd cx = rx.array() - rx.mean();
  const Eigen::VectorXd cy = ry.array() - ry.mean();
  const double sxx = cx.squaredNorm();
  const double syy = cy.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) throw DegenerateError("spearman input is constant");
  return std::clamp(cx.dot(cy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const Eigen::Map<const Eigen::VectorXd> mx(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> my(y.data(), static_cast<Eigen::Index>(y.size()));
  return spearman(mx, my);
}

GroupCenters group_centers(const Eigen::Ref<const Eigen::VectorXd>& scores,
                           std::span<const Sample> labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    throw RangeError(fmt::format("{} scores for {} labels", scores.size(), labels.size()));
  }
  std::map<int, std::pair<double, int>> sums;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int g = labels[i].group_index;
    if (g < 1) {
      throw RangeError(fmt::format("sample {} has no group (group_index {})",
                                   labels[i].sample_id, g));
    }
    auto& [sum, count] = sums[g];
    sum += scores(static_cast<Eigen::Index>(i));
    ++count;
  }

  GroupCenters out;
  for (const auto& [g, acc] : sums) {
    out.group_indices.push_back(g);
    out.centers.push_back(acc.first / acc.second);
    out.counts.push_back(acc.second);
  }
  if (!sums.empty()) {
    for (int g = 1; g < sums.rbegin()->first; ++g) {
      if (!sums.contains(g)) out.dropped_groups.push_back(g);
    }
  }
  if (out.centers.size() < 3) {
    throw InsufficientGroupsError(
        fmt::format("{} nonempty groups; the scaling fit needs at least 3", out.centers.size()));
  }
  return out;
}

std::string_view to_string(SriVariant variant) {
  return variant == SriVariant::differences ? "differences" : "direct";
}

SriVariant parse_sri_variant(std::string_view text) {
  if (text == "differences") return SriVariant::differences;
  if (text == "direct") return SriVariant::direct;
  throw ParseError(fmt::format("unknown SRI variant '{}'", text));
}

namespace {

constexpr int kMaxIterations = 200;
constexpr double kRelativeTolerance = 1e-10;

// Model: target_i ~ offset + exp(a + b * i), i = 1..n. The offset is a free
// parameter only when `with_offset` is set.
struct ExponentialProblem {
  Eigen::VectorXd target;
  bool with_offset = false;

  Eigen::Index size() const { return target.size(); }

  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd r(size());
    const double offset = with_offset ? theta(0) : 0.0;
    const double a = theta(with_offset ? 1 : 0);
    const double b = theta(with_offset ? 2 : 1);
    for (Eigen::Index i = 0; i < size(); ++i) {
      r(i) = offset + std::exp(a + b * static_cast<double>(i + 1)) - target(i);
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const {
    const int shift = with_offset ? 1 : 0;
    Eigen::MatrixXd j(size(), 2 + shift);
    const double a = theta(shift);
    const double b = theta(shift + 1);
    for (Eigen::Index i = 0; i < size(); ++i) {
      const double index = static_cast<double>(i + 1);
      const double f = std::exp(a + b * index);
      if (with_offset) j(i, 0) = 1.0;
      j(i, shift) = f;
      j(i, shift + 1) = index * f;
    }
    return j;
  }

  double objective(const Eigen::VectorXd& theta) const {
    const double s = residuals(theta).squaredNorm();
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  }
};

struct GaussNewtonResult {
  Eigen::VectorXd theta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

GaussNewtonResult gauss_newton(const ExponentialProblem& problem, Eigen::VectorXd theta) {
  GaussNewtonResult out;
  double current = problem.objective(theta);
  const double floor = 1e-30 * std::max(problem.target.squaredNorm(), 1e-300);

  for (int iter = 1; iter <= kMaxIterations; ++iter) {
    out.iterations = iter;
    if (current <= floor) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd j = problem.jacobian(theta);
    const Eigen::VectorXd r = problem.residuals(theta);
    const Eigen::VectorXd step = j.colPivHouseholderQr().solve(-r);
    if (!step.allFinite()) {
      out.converged = true;
      break;
    }

    // Step halving keeps every accepted iterate a strict descent.
    double scale = 1.0;
    Eigen::VectorXd candidate = theta + step;
    double next = problem.objective(candidate);
    for (int halvings = 0; halvings < 60 && !(next < current); ++halvings) {
      scale *= 0.5;
      candidate = theta + scale * step;
      next = problem.objective(candidate);
    }
    if (!(next < current)) {
      out.converged = true;  // stationary to machine precision
      break;
    }
    const double decrease = (current - next) / current;
    theta = candidate;
    current = next;
    if (decrease <= kRelativeTolerance) {
      out.converged = true;
      break;
    }
  }
  out.theta = theta;
  out.objective = current;
  return out;
}

// Grid beta = 0.05, 0.06, ..., 20 with the linear coefficients solved in
// closed form; alpha is clamped to stay positive.
Eigen::VectorXd grid_start(const ExponentialProblem& problem) {
  const auto n = problem.size();
  const double tiny_alpha = 1e-12 * std::max(problem.target.cwiseAbs().maxCoeff(), 1e-300);
  double best_objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;

  for (int step = 5; step <= 2000; ++step) {
    const double beta = step / 100.0;
    Eigen::VectorXd powers(n);
    for (Eigen::Index i = 0; i < n; ++i) powers(i) = std::pow(beta, static_cast<double>(i + 1));

    double alpha = 0.0;
    double offset = 0.0;
    if (problem.with_offset) {
      Eigen::MatrixXd design(n, 2);
      design.col(0).setOnes();
      design.col(1) = powers;
      const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(problem.target);
      offset = coef(0);
      alpha = coef(1);
      if (!(alpha > tiny_alpha)) {
        alpha = tiny_alpha;
        offset = (problem.target - alpha * powers).mean();
      }
    } else {
      alpha = powers.dot(problem.target) / powers.squaredNorm();
      if (!(alpha > tiny_alpha)) alpha = tiny_alpha;
    }

    Eigen::VectorXd theta(problem.with_offset ? 3 : 2);
    if (problem.with_offset) {
      theta << offset, std::log(alpha), std::log(beta);
    } else {
      theta << std::log(alpha), std::log(beta);
    }
    const double value = problem.objective(theta);
    if (value < best_objective) {
      best_objective = value;
      best = theta;
    }
  }
  return best;
}

// Ordinary least squares of log d_i on i; requires every d_i > 0.
Eigen::VectorXd log_linear_start(const Eigen::VectorXd& diffs) {
  const auto n = diffs.size();
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd logs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = static_cast<double>(i + 1);
    logs(i) = std::log(diffs(i));
  }
  return design.colPivHouseholderQr().solve(logs);
}

}  // namespace

SriFit fit_sri(std::span<const double> centers, SriVariant variant) {
  const auto k = static_cast<Eigen::Index>(centers.size());
  if (k < 3) {
    throw InsufficientGroupsError(
        fmt::format("scaling fit needs at least 3 group centers, got {}", k));
  }
  const Eigen::Map<const Eigen::VectorXd> m(centers.data(), k);
  if (!m.allFinite()) throw DataError("group centers are not finite");

  const Eigen::VectorXd diffs = m.tail(k - 1) - m.head(k - 1);
  if ((diffs.array() == 0.0).all()) {
    throw DegenerateError("all consecutive differences are zero");
  }

  SriFit fit;
  fit.variant = variant;
  fit.negative_diffs = (diffs.array() < 0.0).any();

  ExponentialProblem problem;
  Eigen::VectorXd start;
  if (variant == SriVariant::differences) {
    problem.target = diffs;
    start = (diffs.array() > 0.0).all() ? log_linear_start(diffs) : grid_start(problem);
  } else {
    problem.target = m;
    problem.with_offset = true;
    start = grid_start(problem);
  }

  const auto result = gauss_newton(problem, start);
  const int shift = problem.with_offset ? 1 : 0;
  fit.offset = problem.with_offset ? result.theta(0) : 0.0;
  fit.alpha = std::exp(result.theta(shift));
  fit.beta = std::exp(result.theta(shift + 1));
  fit.residual = result.objective;
  fit.converged = result.converged && std::isfinite(fit.alpha) && std::isfinite(fit.beta);
  fit.iterations = result.iterations;
  return fit;
}

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::sublogarithmic:
      return "sublogarithmic";
    case Regime::logarithmic:
      return "logarithmic";
    case Regime::superlinear:
      return "superlinear";
  }
  return "logarithmic";
}

BetaRegime classify_beta(double beta, double tolerance) {
  if (!(beta > 0.0)) throw RangeError(fmt::format("beta must be positive, got {}", beta));
  if (!(tolerance > 0.0)) throw RangeError("tolerance must be positive");
  Regime regime = Regime::logarithmic;
  if (beta > 1.0 + tolerance) {
    regime = Regime::superlinear;
  } else if (beta < 1.0 - tolerance) {
    regime = Regime::sublogarithmic;
  }
  return BetaRegime{regime, tolerance};
}

}  // namespace numberline
