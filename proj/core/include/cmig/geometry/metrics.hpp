#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "cmig/geometry/types.hpp"

namespace cmig::geometry {

/// Anisotropic errors: per-axis Euler (Z-Y-X, degrees) and translation
/// differences, aggregated over the three axes and all samples.
struct RegistrationError {
  double rmse_rot_deg = 0.0;
  double mae_rot_deg = 0.0;
  double rmse_trans = 0.0;
  double mae_trans = 0.0;
};

/// Running sums so a report can be aggregated incrementally or per sample.
class ErrorAccumulator {
 public:
  void add(const RigidTransform& predicted, const RigidTransform& ground_truth);
  RegistrationError result() const;
  std::size_t count() const { return count_; }

  /// Mean per-axis absolute rotation error of the last added sample.
  double last_mae_rot() const { return last_mae_rot_; }

 private:
  double sq_rot_ = 0.0, abs_rot_ = 0.0, sq_t_ = 0.0, abs_t_ = 0.0;
  double last_mae_rot_ = 0.0;
  std::size_t count_ = 0;
};

RegistrationError registration_error(const RigidTransform& predicted, const RigidTransform& ground_truth);
RegistrationError registration_error(std::span<const std::pair<RigidTransform, RigidTransform>> pairs);

}  // namespace cmig::geometry
