#pragma once

#include <Eigen/Core>
#include <cstddef>

namespace cmig::geometry {

/// N x 3 row-major coordinates. Row-major so the buffer can be copied
/// straight into an autodiff Value.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct PointCloud {
  Points points;

  PointCloud() = default;
  explicit PointCloud(Points p) : points(std::move(p)) {}

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  Eigen::Vector3d point(std::size_t i) const { return points.row(static_cast<Eigen::Index>(i)).transpose(); }

  /// Throws ContractViolation unless N >= 1 and all coordinates are finite.
  void validate() const;
};

/// x -> R x + t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Points apply(const Points& pts) const;
  PointCloud apply(const PointCloud& cloud) const { return PointCloud(apply(cloud.points)); }

  RigidTransform inverse() const;

  /// RᵀR = I and det R = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

/// The transform that applies `second` after `first`.
RigidTransform compose(const RigidTransform& second, const RigidTransform& first);

}  // namespace cmig::geometry
