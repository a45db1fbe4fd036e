#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cmig/geometry/types.hpp"

namespace cmig::data {

enum class ShapeKind { kSphere, kCube, kTorus, kGaussianBlobs };

std::string to_string(ShapeKind kind);
/// Accepts "sphere", "cube", "torus", "gaussian_blobs". Throws ContractViolation otherwise.
ShapeKind shape_from_string(const std::string& name);

/// Surface samples normalised to the unit sphere. Sphere, cube and torus are
/// sampled in antipodal pairs (plus one zero-sum triple when n is odd), so
/// their centroid is the origin up to rounding and the sphere keeps unit
/// radii after normalisation. Blobs are deliberately asymmetric.
geometry::PointCloud synth_shape(ShapeKind kind, std::size_t n_points, std::uint64_t seed);

/// splitmix64 finaliser; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cmig::data
