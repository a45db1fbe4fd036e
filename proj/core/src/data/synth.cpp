#include "cmig/data/synth.hpp"

#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "cmig/data/io.hpp"
#include "cmig/errors.hpp"

namespace cmig::data {

using geometry::PointCloud;
using geometry::Points;

namespace {

Eigen::Vector3d unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Eigen::Vector3d v(g(rng), g(rng), g(rng));
    const double n = v.norm();
    if (n > 1e-8) return v / n;
  }
}

Eigen::Vector3d cube_point(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int f = face(rng);
  Eigen::Vector3d p(u(rng), u(rng), u(rng));
  p[f / 2] = (f % 2 == 0) ? 1.0 : -1.0;
  return p;
}

Eigen::Vector3d torus_point(std::mt19937_64& rng) {
  // Rejection on the tube angle gives uniform density over the surface.
  constexpr double kMajor = 1.0, kMinor = 0.35;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double theta = angle(rng), phi = angle(rng);
    const double w = (kMajor + kMinor * std::cos(phi)) / (kMajor + kMinor);
    if (u(rng) > w) continue;
    const double ring = kMajor + kMinor * std::cos(phi);
    return {ring * std::cos(theta), kMinor * std::sin(phi), ring * std::sin(theta)};
  }
}

Eigen::Vector3d rotated(const Eigen::Vector3d& p, const Eigen::Vector3d& axis, int thirds) {
  return Eigen::AngleAxisd(2.0 * std::numbers::pi * thirds / 3.0, axis) * p;
}

// Three on-surface points with zero sum, used once when n is odd.
std::array<Eigen::Vector3d, 3> sphere_triple(std::mt19937_64& rng) {
  const Eigen::Vector3d p = unit_vector(rng);
  Eigen::Vector3d axis = unit_vector(rng);
  axis -= axis.dot(p) * p;
  axis.normalize();
  return {p, rotated(p, axis, 1), rotated(p, axis, 2)};
}

std::array<Eigen::Vector3d, 3> cube_triple(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> half(-0.5, 0.5);
  std::uniform_real_distribution<double> lower(-1.0, 0.0);
  const double a = half(rng), c = half(rng), b = lower(rng);
  return {Eigen::Vector3d(1.0, a, b), Eigen::Vector3d(-1.0, c, -1.0 - b), Eigen::Vector3d(0.0, -(a + c), 1.0)};
}

std::array<Eigen::Vector3d, 3> torus_triple(std::mt19937_64& rng) {
  // Outer equator, 120 degrees apart around the symmetry axis.
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector3d p(1.35, 0.0, 0.0);
  const Eigen::Vector3d q = Eigen::AngleAxisd(angle(rng), Eigen::Vector3d::UnitY()) * p;
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
  return {q, rotated(q, y, 1), rotated(q, y, 2)};
}

template <typename Gen, typename Triple>
Points symmetric_cloud(std::size_t n, std::mt19937_64& rng, Gen gen, Triple triple) {
  Points pts(static_cast<Eigen::Index>(n), 3);
  std::size_t i = 0;
  if (n % 2 == 1) {
    for (const auto& p : triple(rng)) pts.row(static_cast<Eigen::Index>(i++)) = p.transpose();
  }
  for (; i < n; i += 2) {
    const Eigen::Vector3d p = gen(rng);
    pts.row(static_cast<Eigen::Index>(i)) = p.transpose();
    pts.row(static_cast<Eigen::Index>(i + 1)) = -p.transpose();
  }
  return pts;
}

Points blobs(std::size_t n, std::mt19937_64& rng) {
  constexpr int kBlobs = 4;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> spread(0.08, 0.25);
  std::normal_distribution<double> g(0.0, 1.0);
  std::array<Eigen::Vector3d, kBlobs> centers;
  std::array<Eigen::Vector3d, kBlobs> scales;
  for (int b = 0; b < kBlobs; ++b) {
    centers[b] = Eigen::Vector3d(u(rng), u(rng), u(rng));
    scales[b] = Eigen::Vector3d(spread(rng), spread(rng), spread(rng));
  }
  // Unequal blob sizes break any accidental symmetry.
  std::discrete_distribution<int> which({4.0, 3.0, 2.0, 1.0});
  Points pts(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const int b = which(rng);
    const Eigen::Vector3d p = centers[b] + scales[b].cwiseProduct(Eigen::Vector3d(g(rng), g(rng), g(rng)));
    pts.row(static_cast<Eigen::Index>(i)) = p.transpose();
  }
  return pts;
}

}  // namespace

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kCube: return "cube";
    case ShapeKind::kTorus: return "torus";
    case ShapeKind::kGaussianBlobs: return "gaussian_blobs";
  }
  return "?";
}

ShapeKind shape_from_string(const std::string& name) {
  if (name == "sphere") return ShapeKind::kSphere;
  if (name == "cube") return ShapeKind::kCube;
  if (name == "torus") return ShapeKind::kTorus;
  if (name == "gaussian_blobs") return ShapeKind::kGaussianBlobs;
  throw ContractViolation("unknown shape kind '" + name + "'");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PointCloud synth_shape(ShapeKind kind, std::size_t n_points, std::uint64_t seed) {
  if (n_points < 16) throw ContractViolation("synth_shape: n_points must be >= 16");
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(kind)));
  Points pts;
  switch (kind) {
    case ShapeKind::kSphere: pts = symmetric_cloud(n_points, rng, unit_vector, sphere_triple); break;
    case ShapeKind::kCube: pts = symmetric_cloud(n_points, rng, cube_point, cube_triple); break;
    case ShapeKind::kTorus: pts = symmetric_cloud(n_points, rng, torus_point, torus_triple); break;
    case ShapeKind::kGaussianBlobs: pts = blobs(n_points, rng); break;
  }
  return normalize(PointCloud(std::move(pts)));
}

}  // namespace cmig::data
