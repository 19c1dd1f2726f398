#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "numberline/dataset.hpp"

namespace numberline {

// Pearson correlation of average ranks. DegenerateError if n < 2, the sizes
// differ, or either input is constant.
double spearman(const Eigen::Ref<const Eigen::VectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& y);
double spearman(std::span<const double> x, std::span<const double> y);

// 1-based average ranks (ties share the mean of the positions they occupy).
Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values);

struct GroupCenters {
  std::vector<int> group_indices;  // increasing
  std::vector<double> centers;
  std::vector<int> counts;
  // Group indices between 1 and the largest present index with no samples.
  std::vector<int> dropped_groups;
};

// Mean score per nonempty group, in increasing group order.
// InsufficientGroupsError if fewer than 3 groups survive; RangeError for a
// sample with group_index < 1 or a size mismatch.
GroupCenters group_centers(const Eigen::Ref<const Eigen::VectorXd>& scores,
                           std::span<const Sample> labels);

enum class SriVariant { differences, direct };

std::string_view to_string(SriVariant variant);
SriVariant parse_sri_variant(std::string_view text);

struct SriFit {
  double alpha = 0.0;
  double beta = 0.0;
  double offset = 0.0;  // direct variant only
  double residual = 0.0;
  SriVariant variant = SriVariant::differences;
  bool converged = false;
  bool negative_diffs = false;
  int iterations = 0;
};

// Scaling Rate Index. For `differences`, fits d_i = m_{i+1} - m_i to
// alpha * beta^i (i = 1..K-1); for `direct`, fits m_i to c + alpha * beta^i
// (i = 1..K). alpha and beta stay positive through a log parameterisation.
SriFit fit_sri(std::span<const double> centers, SriVariant variant = SriVariant::differences);

enum class Regime { sublogarithmic, logarithmic, superlinear };

std::string_view to_string(Regime regime);

struct BetaRegime {
  Regime regime = Regime::logarithmic;
  double tolerance = 0.1;
};

inline constexpr double kDefaultBetaTolerance = 0.1;

BetaRegime classify_beta(double beta, double tolerance = kDefaultBetaTolerance);

}  // namespace numberline
