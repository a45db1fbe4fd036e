#pragma once

#include <cstddef>
#include <span>

#include "cmig/geometry/types.hpp"

namespace cmig::geometry {

/// Closed-form argmin over (R, t) of sum_i w_i |R src_i + t - dst_i|^2.
///
/// Weights are normalised to sum to one. The rotation comes from the SVD of
/// the weighted cross-covariance with the reflection fix (the last singular
/// direction is flipped when det < 0), so the result is always proper.
///
/// Throws ContractViolation for K < 3, negative weights or zero total weight,
/// and DegenerateError when the weighted points are collinear.
RigidTransform weighted_svd(const Points& src, const Points& dst, std::span<const double> weights);

/// Uniform-weight convenience overload.
RigidTransform weighted_svd(const Points& src, const Points& dst);

struct IcpResult {
  RigidTransform transform;
  std::size_t iterations = 0;
  bool converged = false;
  double mse = 0.0;
};

/// Point-to-point ICP: nearest-neighbour correspondences from every source
/// point, unweighted SVD, stop when the MSE changes by less than
/// `convergence_eps` or after `max_iter` iterations.
IcpResult icp_baseline(const PointCloud& source, const PointCloud& target, std::size_t max_iter = 50,
                       double convergence_eps = 1e-10);

}  // namespace cmig::geometry
