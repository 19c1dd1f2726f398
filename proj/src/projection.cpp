#include "numberline/projection.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "numberline/errors.hpp"
#include "numberline/metrics.hpp"

namespace numberline {

std::string_view to_string(ProjectionMethod method) {
  return method == ProjectionMethod::pca ? "pca" : "pls";
}

ProjectionMethod parse_projection_method(std::string_view text) {
  if (text == "pca") return ProjectionMethod::pca;
  if (text == "pls") return ProjectionMethod::pls;
  throw ParseError(fmt::format("unknown projection method '{}'", text));
}

Eigen::VectorXd ProjectionOutcome::predicted_target() const {
  if (method != ProjectionMethod::pls) return {};
  return (scores * target_loadings).array() + target_mean;
}

namespace {

void check_shape(const Eigen::MatrixXd& x, int p) {
  if (p < 1 || p > 2) throw RangeError(fmt::format("components must be 1 or 2, got {}", p));
  if (x.rows() < p + 1) {
    throw RangeError(fmt::format("need at least {} samples for {} components, got {}", p + 1, p,
                                 x.rows()));
  }
  if (x.cols() < p) {
    throw RangeError(fmt::format("need at least {} dimensions, got {}", p, x.cols()));
  }
  if (!x.allFinite()) throw DataError("projection input contains non-finite values");
}

Eigen::Index argmax_abs(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  row.cwiseAbs().maxCoeff(&best);
  return best;
}

}  // namespace

ProjectionOutcome fit_pca(const Eigen::MatrixXd& x, int p) {
  check_shape(x, p);
  ProjectionOutcome out;
  out.method = ProjectionMethod::pca;
  out.components = p;
  out.mean_vector = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - out.mean_vector.transpose();

  const double total = centred.squaredNorm();
  const double scale = x.squaredNorm();
  if (!(total > 1e-24 * scale) || total == 0.0) {
    throw DegenerateError("data has zero total variance");
  }

  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  out.loadings = svd.matrixV().leftCols(p).transpose();
  for (int k = 0; k < p; ++k) {
    if (out.loadings(k, argmax_abs(out.loadings.row(k))) < 0.0) out.loadings.row(k) *= -1.0;
  }
  out.scores = centred * out.loadings.transpose();

  const double kept = sv.head(p).squaredNorm();
  out.quality = std::clamp(kept / sv.squaredNorm(), 0.0, 1.0);
  return out;
}

ProjectionOutcome fit_pls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int p) {
  check_shape(x, p);
  if (y.size() != x.rows()) {
    throw RangeError(fmt::format("target has {} entries for {} samples", y.size(), x.rows()));
  }
  if (!y.allFinite()) throw DataError("target contains non-finite values");

  ProjectionOutcome out;
  out.method = ProjectionMethod::pls;
  out.components = p;
  out.mean_vector = x.colwise().mean().transpose();
  out.target_mean = y.mean();

  Eigen::MatrixXd residual_x = x.rowwise() - out.mean_vector.transpose();
  Eigen::VectorXd residual_y = y.array() - out.target_mean;
  const double total_y = residual_y.squaredNorm();
  if (!(total_y > 1e-24 * y.squaredNorm()) || total_y == 0.0) {
    throw DegenerateError("target has zero variance");
  }

  const auto n = x.rows();
  const auto d = x.cols();
  out.scores = Eigen::MatrixXd::Zero(n, p);
  out.loadings = Eigen::MatrixXd::Zero(p, d);
  out.weights = Eigen::MatrixXd::Zero(p, d);
  out.target_loadings = Eigen::VectorXd::Zero(p);

  for (int k = 0; k < p; ++k) {
    Eigen::VectorXd w = residual_x.transpose() * residual_y;
    const double threshold = 1e-12 * residual_x.norm() * residual_y.norm();
    if (!(w.norm() >= threshold) || w.norm() == 0.0) {
      if (k == 0) throw DegenerateError("X^T y vanishes; no covariance with the target");
      break;
    }
    w.normalize();
    const Eigen::VectorXd t = residual_x * w;
    const double tt = t.squaredNorm();
    if (tt == 0.0) {
      if (k == 0) throw DegenerateError("first PLS score is identically zero");
      break;
    }
    const Eigen::VectorXd loading = residual_x.transpose() * t / tt;
    const double q = residual_y.dot(t) / tt;
    residual_x -= t * loading.transpose();
    residual_y -= q * t;

    out.scores.col(k) = t;
    out.loadings.row(k) = loading.transpose();
    out.weights.row(k) = w.transpose();
    out.target_loadings(k) = q;
  }

  out.quality = std::clamp(1.0 - residual_y.squaredNorm() / total_y, 0.0, 1.0);
  return out;
}

ProjectionOutcome orient(ProjectionOutcome outcome, const Eigen::VectorXd& values) {
  double rho = 0.0;
  try {
    rho = spearman(outcome.scores.col(0), values);
  } catch (const Error&) {
    rho = 0.0;
  }
  bool flip = rho < 0.0;
  if (rho == 0.0 && outcome.loadings.rows() > 0) {
    flip = outcome.loadings(0, argmax_abs(outcome.loadings.row(0))) < 0.0;
  }
  if (flip) {
    outcome.scores.col(0) *= -1.0;
    outcome.loadings.row(0) *= -1.0;
    if (outcome.method == ProjectionMethod::pls) {
      outcome.weights.row(0) *= -1.0;
      outcome.target_loadings(0) *= -1.0;
    }
  }
  outcome.oriented = true;
  return outcome;
}

}  // namespace numberline
