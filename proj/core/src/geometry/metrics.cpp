#include "cmig/geometry/metrics.hpp"

#include <cmath>

#include "cmig/geometry/rotation.hpp"

namespace cmig::geometry {

namespace {

double wrap_deg(double d) {
  d = std::fmod(d + 180.0, 360.0);
  if (d < 0) d += 360.0;
  return d - 180.0;
}

}  // namespace

void ErrorAccumulator::add(const RigidTransform& predicted, const RigidTransform& ground_truth) {
  const Eigen::Vector3d ep = matrix_to_euler(predicted.rotation).angles_deg;
  const Eigen::Vector3d eg = matrix_to_euler(ground_truth.rotation).angles_deg;
  double sample_abs = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double dr = wrap_deg(ep[a] - eg[a]);
    const double dt = predicted.translation[a] - ground_truth.translation[a];
    sq_rot_ += dr * dr;
    abs_rot_ += std::abs(dr);
    sample_abs += std::abs(dr);
    sq_t_ += dt * dt;
    abs_t_ += std::abs(dt);
  }
  last_mae_rot_ = sample_abs / 3.0;
  ++count_;
}

RegistrationError ErrorAccumulator::result() const {
  RegistrationError e;
  if (count_ == 0) return e;
  const double n = 3.0 * static_cast<double>(count_);
  e.rmse_rot_deg = std::sqrt(sq_rot_ / n);
  e.mae_rot_deg = abs_rot_ / n;
  e.rmse_trans = std::sqrt(sq_t_ / n);
  e.mae_trans = abs_t_ / n;
  return e;
}

RegistrationError registration_error(const RigidTransform& predicted, const RigidTransform& ground_truth) {
  ErrorAccumulator acc;
  acc.add(predicted, ground_truth);
  return acc.result();
}

RegistrationError registration_error(std::span<const std::pair<RigidTransform, RigidTransform>> pairs) {
  ErrorAccumulator acc;
  for (const auto& [p, g] : pairs) acc.add(p, g);
  return acc.result();
}

}  // namespace cmig::geometry
