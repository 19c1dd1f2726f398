#pragma once

#include <string_view>

#include <Eigen/Core>

namespace numberline {

enum class ProjectionMethod { pca, pls };

std::string_view to_string(ProjectionMethod method);
ProjectionMethod parse_projection_method(std::string_view text);

// Result of projecting N samples from R^D down to p in {1, 2} dimensions.
struct ProjectionOutcome {
  ProjectionMethod method = ProjectionMethod::pca;
  int components = 1;
  Eigen::MatrixXd scores;    // N x p
  Eigen::MatrixXd loadings;  // p x D; PCA principal axes, PLS x-loadings
  // Explained-variance ratio (PCA) or in-sample R^2 (PLS), in [0, 1].
  double quality = 0.0;
  Eigen::VectorXd mean_vector;  // D

  // PLS only: unit weight vectors (p x D), target loadings q (p) and target
  // mean, so that y_hat = target_mean + scores * target_loadings.
  Eigen::MatrixXd weights;
  Eigen::VectorXd target_loadings;
  double target_mean = 0.0;

  bool oriented = false;

  // In-sample PLS prediction of the target. Empty for PCA.
  Eigen::VectorXd predicted_target() const;
};

// Mean-centred SVD. Each axis is signed so its largest-magnitude entry is
// positive. RangeError unless 1 <= p <= 2, N >= p + 1 and D >= p;
// DegenerateError when the centred data has no variance.
ProjectionOutcome fit_pca(const Eigen::MatrixXd& x, int p);

// PLS1 by iterative deflation against the scalar target y. DegenerateError
// when y is constant or X^T y vanishes (relative 1e-12) on the first
// component; a later component that finds no remaining covariance is left
// as zeros.
ProjectionOutcome fit_pls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int p);

// Flips component 0 so that Spearman(scores[:,0], values) >= 0. A zero or
// undefined correlation falls back to making the largest-magnitude loading
// entry of component 0 positive.
ProjectionOutcome orient(ProjectionOutcome outcome, const Eigen::VectorXd& values);

}  // namespace numberline
