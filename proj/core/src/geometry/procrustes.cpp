#include "cmig/geometry/procrustes.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <string>
#include <vector>

#include "cmig/errors.hpp"
#include "cmig/geometry/neighbors.hpp"

namespace cmig::geometry {

RigidTransform weighted_svd(const Points& src, const Points& dst, std::span<const double> weights) {
  const auto k = static_cast<std::size_t>(src.rows());
  if (dst.rows() != src.rows() || weights.size() != k)
    throw ContractViolation("weighted_svd: src, dst and weights must have equal length (" + std::to_string(k) + ", " +
                            std::to_string(dst.rows()) + ", " + std::to_string(weights.size()) + ")");
  if (k < 3) throw ContractViolation("weighted_svd: at least 3 correspondences required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractViolation("weighted_svd: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ContractViolation("weighted_svd: weights sum to zero");

  Eigen::Vector3d cs = Eigen::Vector3d::Zero();
  Eigen::Vector3d cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < k; ++i) {
    const double w = weights[i] / total;
    cs += w * src.row(static_cast<Eigen::Index>(i)).transpose();
    cd += w * dst.row(static_cast<Eigen::Index>(i)).transpose();
  }
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < k; ++i) {
    const double w = weights[i] / total;
    const Eigen::Vector3d a = src.row(static_cast<Eigen::Index>(i)).transpose() - cs;
    const Eigen::Vector3d b = dst.row(static_cast<Eigen::Index>(i)).transpose() - cd;
    h += w * a * b.transpose();
    scatter += w * a * a.transpose();
  }

  // Collinear (or coincident) weighted source points leave the rotation about
  // their line undetermined.
  Eigen::JacobiSVD<Eigen::Matrix3d> spread(scatter);
  const auto sv = spread.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0])
    throw DegenerateError("weighted_svd: weighted source points are collinear");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (!(svd.singularValues()[0] > 0.0)) throw DegenerateError("weighted_svd: cross-covariance vanishes");
  Eigen::Matrix3d v = svd.matrixV();
  const Eigen::Matrix3d& u = svd.matrixU();
  if ((v * u.transpose()).determinant() < 0.0) v.col(2) *= -1.0;

  RigidTransform out;
  out.rotation = v * u.transpose();
  out.translation = cd - out.rotation * cs;
  return out;
}

RigidTransform weighted_svd(const Points& src, const Points& dst) {
  std::vector<double> w(static_cast<std::size_t>(src.rows()), 1.0);
  return weighted_svd(src, dst, w);
}

IcpResult icp_baseline(const PointCloud& source, const PointCloud& target, std::size_t max_iter,
                       double convergence_eps) {
  source.validate();
  target.validate();
  IcpResult result;
  auto mse_of = [](const NearestResult& nn) {
    double s = 0.0;
    for (double d : nn.distance) s += d * d;
    return s / static_cast<double>(nn.distance.size());
  };

  RigidTransform current;
  Points moved = source.points;
  NearestResult nn = nearest(moved, target.points);
  double mse = mse_of(nn);
  result.transform = current;
  result.mse = mse;

  for (std::size_t it = 0; it < max_iter; ++it) {
    Points matched(moved.rows(), 3);
    for (Eigen::Index i = 0; i < moved.rows(); ++i)
      matched.row(i) = target.points.row(static_cast<Eigen::Index>(nn.index[static_cast<std::size_t>(i)]));
    RigidTransform step;
    try {
      step = weighted_svd(moved, matched);
    } catch (const DegenerateError&) {
      break;
    }
    current = compose(step, current);
    moved = current.apply(source.points);
    nn = nearest(moved, target.points);
    const double next = mse_of(nn);
    result.iterations = it + 1;
    if (next <= result.mse) {
      result.transform = current;
      result.mse = next;
    }
    if (std::abs(mse - next) < convergence_eps) {
      result.converged = true;
      break;
    }
    mse = next;
  }
  return result;
}

}  // namespace cmig::geometry
