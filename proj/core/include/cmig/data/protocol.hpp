#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "cmig/geometry/types.hpp"

namespace cmig::data {

/// clean: no crop, no noise. partial: shared-direction crop. noisy: shared
/// crop plus clipped noise. low_overlap: independent crops plus noise.
enum class Regime { kClean, kPartial, kNoisy, kLowOverlap };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct ProtocolConfig {
  double rot_range_deg = 45.0;
  double trans_range = 0.5;
  double keep_fraction = 0.75;
  double noise_sigma = 0.01;
  double noise_clip = 0.05;

  void validate() const;
};

struct RegistrationSample {
  geometry::PointCloud source;
  geometry::PointCloud target;
  geometry::RigidTransform gt;  // maps source into the target frame
  Regime regime = Regime::kClean;
  std::uint64_t seed = 0;
};

/// Euler angles (Z-Y-X) uniform in [0, rot_range_deg], translation uniform
/// in [-trans_range, trans_range] per axis.
geometry::RigidTransform sample_rigid(std::uint64_t seed, double rot_range_deg, double trans_range);

/// Keeps the ceil(keep_fraction * N) points with the largest projection on a
/// random unit direction, in their original order.
geometry::PointCloud partial_crop(const geometry::PointCloud& cloud, double keep_fraction,
                                  std::uint64_t direction_seed);

/// Same crop with an explicit direction (normalised internally).
geometry::PointCloud crop_along(const geometry::PointCloud& cloud, double keep_fraction,
                                const Eigen::Vector3d& direction);

/// Number of points partial_crop keeps.
std::size_t crop_count(std::size_t n, double keep_fraction);

/// Uniform random unit vector drawn from `seed`.
Eigen::Vector3d random_direction(std::uint64_t seed);

/// Adds N(0, sigma^2) per coordinate, clipped to [-clip, clip].
geometry::PointCloud add_noise(const geometry::PointCloud& cloud, double sigma, double clip, std::uint64_t seed);

/// Crops first, then adds noise, then moves the source by gt^-1. The source
/// rows are also shuffled so index i of source and target are unrelated.
/// gt maps the uncorrupted source geometry exactly onto the target's.
RegistrationSample make_sample(const geometry::PointCloud& base, Regime regime, std::uint64_t seed,
                               const ProtocolConfig& cfg);

/// Bundle on disk: source.xyz, target.xyz and sample.json
/// {"rotation": [9 row-major], "translation": [3], "regime": ..., "seed": ...}.
void write_sample(const std::filesystem::path& dir, const RegistrationSample& sample);
RegistrationSample read_sample(const std::filesystem::path& dir);

}  // namespace cmig::data
