#include "cmig/geometry/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cmig::geometry {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// cos/sin that return exact 0/±1 at multiples of 90 degrees so that quarter
// turns compose without roundoff.
void cos_sin_deg(double deg, double& c, double& s) {
  const double q = deg / 90.0;
  if (q == std::round(q)) {
    const long k = ((static_cast<long>(std::round(q)) % 4) + 4) % 4;
    static constexpr double kc[] = {1, 0, -1, 0};
    static constexpr double ks[] = {0, 1, 0, -1};
    c = kc[k];
    s = ks[k];
    return;
  }
  c = std::cos(deg * kDeg);
  s = std::sin(deg * kDeg);
}

}  // namespace

Eigen::Matrix3d rotation_about_y(double deg) {
  double c, s;
  cos_sin_deg(deg, c, s);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Eigen::Matrix3d rotation_about_z(double deg) {
  double c, s;
  cos_sin_deg(deg, c, s);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Eigen::Matrix3d euler_to_matrix(const Eigen::Vector3d& zyx_deg) {
  double cx, sx;
  cos_sin_deg(zyx_deg[2], cx, sx);
  Eigen::Matrix3d rx;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  return rotation_about_z(zyx_deg[0]) * rotation_about_y(zyx_deg[1]) * rx;
}

EulerResult matrix_to_euler(const Eigen::Matrix3d& r) {
  EulerResult out;
  const double pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  if (std::abs(std::abs(pitch) / kDeg - 90.0) <= 1e-6) {
    out.degenerate = true;
    out.angles_deg = {std::atan2(-r(0, 1), r(1, 1)) / kDeg, pitch / kDeg, 0.0};
    return out;
  }
  out.angles_deg = {std::atan2(r(1, 0), r(0, 0)) / kDeg, pitch / kDeg, std::atan2(r(2, 1), r(2, 2)) / kDeg};
  return out;
}

double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d d = a.transpose() * b;
  // acos is ill-conditioned near 0; use the skew part for small angles.
  const Eigen::Vector3d axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  const double sin_part = 0.5 * axis.norm();
  const double cos_part = 0.5 * (d.trace() - 1.0);
  return std::atan2(sin_part, std::clamp(cos_part, -1.0, 1.0)) / kDeg;
}

}  // namespace cmig::geometry
