#pragma once

#include <Eigen/Core>

namespace cmig::geometry {

// Euler angles are intrinsic Z-Y-X in degrees, stored as (yaw_z, pitch_y,
// roll_x): R = Rz(yaw) * Ry(pitch) * Rx(roll).

Eigen::Matrix3d euler_to_matrix(const Eigen::Vector3d& zyx_deg);

struct EulerResult {
  Eigen::Vector3d angles_deg = Eigen::Vector3d::Zero();
  /// |pitch| within 1e-6 deg of 90: roll is pinned to 0 and yaw absorbs it.
  bool degenerate = false;
};

EulerResult matrix_to_euler(const Eigen::Matrix3d& rotation);

/// Rotation about +Y by `deg`, exact at multiples of 90 degrees.
Eigen::Matrix3d rotation_about_y(double deg);
Eigen::Matrix3d rotation_about_z(double deg);

/// Geodesic angle between two rotations, degrees.
double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

}  // namespace cmig::geometry
