#include "cmig/geometry/types.hpp"

#include <Eigen/LU>
#include <cmath>

#include "cmig/errors.hpp"

namespace cmig::geometry {

void PointCloud::validate() const {
  if (points.rows() < 1) throw ContractViolation("PointCloud: at least one point required");
  if (!points.allFinite()) throw ContractViolation("PointCloud: non-finite coordinate");
}

Points RigidTransform::apply(const Points& pts) const {
  Points out(pts.rows(), 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) out.row(i) = (rotation * pts.row(i).transpose() + translation).transpose();
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& second, const RigidTransform& first) {
  RigidTransform out;
  out.rotation = second.rotation * first.rotation;
  out.translation = second.rotation * first.translation + second.translation;
  return out;
}

}  // namespace cmig::geometry
