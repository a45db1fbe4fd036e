#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cmig/data/io.hpp"
#include "cmig/data/protocol.hpp"
#include "cmig/data/synth.hpp"
#include "cmig/errors.hpp"
#include "cmig/geometry/neighbors.hpp"
#include "cmig/geometry/rotation.hpp"

using namespace cmig;
using namespace cmig::data;
using geometry::Points;
using geometry::PointCloud;

namespace {

std::string box_off(double sx, double sy, double sz) {
  std::ostringstream os;
  os << "OFF\n8 12 0\n";
  for (int i = 0; i < 8; ++i) os << (i & 1) * sx << ' ' << ((i >> 1) & 1) * sy << ' ' << ((i >> 2) & 1) * sz << '\n';
  // Two triangles per face, vertex index bits are (z, y, x).
  const int faces[12][3] = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                            {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  for (const auto& f : faces) os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  return os.str();
}

// Face index 0..5 = (-x, +x, -y, +y, -z, +z) from the extreme coordinate.
std::array<double, 6> face_counts(const Points& p) {
  std::array<double, 6> counts{};
  Eigen::RowVector3d lo = p.colwise().minCoeff(), hi = p.colwise().maxCoeff();
  const Eigen::RowVector3d mid = (lo + hi) / 2.0, half = (hi - lo) / 2.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const Eigen::RowVector3d u = (p.row(i) - mid).cwiseQuotient(half);
    Eigen::Index axis = 0;
    u.cwiseAbs().maxCoeff(&axis);
    counts[static_cast<std::size_t>(2 * axis + (u(axis) > 0))] += 1;
  }
  return counts;
}

double chi_square(const std::array<double, 6>& observed, const std::array<double, 6>& expected) {
  double x = 0.0;
  for (std::size_t i = 0; i < 6; ++i) x += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  return x;
}

double brute_projection_min(const Points& p, const Eigen::Vector3d& d) {
  double m = 1e300;
  for (Eigen::Index i = 0; i < p.rows(); ++i) m = std::min(m, p.row(i).dot(d.transpose()));
  return m;
}

}  // namespace

// 5 degrees of freedom; 20.5 is the 0.999 quantile.
constexpr double kChiSquare5 = 20.5;

TEST(Off, UnitCubeSamplesFacesByArea) {
  const auto cloud = parse_cloud(box_off(1, 1, 1), CloudFormat::kOff, 600, 1);
  ASSERT_EQ(cloud.size(), 600u);
  const std::array<double, 6> expected = {100, 100, 100, 100, 100, 100};
  EXPECT_LT(chi_square(face_counts(cloud.points), expected), kChiSquare5);
}

TEST(Off, ElongatedBoxSamplesFacesByArea) {
  // Areas: x faces 1, y and z faces 2; total 10.
  const auto cloud = parse_cloud(box_off(2, 1, 1), CloudFormat::kOff, 1000, 2);
  const std::array<double, 6> expected = {100, 100, 200, 200, 200, 200};
  EXPECT_LT(chi_square(face_counts(cloud.points), expected), kChiSquare5);
}

TEST(Off, CountsMayFollowHeaderOnSameLine) {
  const std::string text = "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
  EXPECT_EQ(parse_cloud(text, CloudFormat::kOff, 10).size(), 10u);
}

TEST(Off, ResultIsNormalised) {
  const auto cloud = parse_cloud(box_off(3, 1, 2), CloudFormat::kOff, 300, 3);
  const Eigen::RowVector3d c = cloud.points.colwise().mean();
  EXPECT_LT(c.norm(), 1e-12);
  EXPECT_NEAR(cloud.points.rowwise().norm().maxCoeff(), 1.0, 1e-12);
}

TEST(Off, QuadFaceIsParseErrorWithLine) {
  const std::string text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
  try {
    parse_cloud(text, CloudFormat::kOff, 10);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
  }
}

TEST(Off, Malformed) {
  try {
    parse_cloud("", CloudFormat::kOff, 10);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(parse_cloud("OFF\n2 0 0\n0 0 0\n1 1 1\n", CloudFormat::kOff, 10), ParseError);
  EXPECT_THROW(parse_cloud("OFF\n3 0 0\n0 0 0\n1 x 1\n0 0 1\n", CloudFormat::kOff, 10), ParseError);
  EXPECT_THROW(parse_cloud("COFF\n3 0 0\n", CloudFormat::kOff, 10), ParseError);
}

TEST(Ply, AsciiVertices) {
  const std::string text =
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "end_header\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n";
  const auto cloud = parse_cloud(text, CloudFormat::kPly, 4);
  EXPECT_EQ(cloud.size(), 4u);
  EXPECT_THROW(parse_cloud("ply\nformat binary_little_endian 1.0\nend_header\n", CloudFormat::kPly, 4), ParseError);
}

TEST(Xyz, SubsampleAndPad) {
  std::string text = "# comment\n";
  for (int i = 0; i < 20; ++i) text += std::to_string(i) + " " + std::to_string(i % 3) + " 0.5\n";
  EXPECT_EQ(parse_cloud(text, CloudFormat::kXyz, 8).size(), 8u);
  EXPECT_EQ(parse_cloud(text, CloudFormat::kXyz, 50).size(), 50u);
  EXPECT_EQ(format_from_path("a/b.OFF"), CloudFormat::kOff);
  EXPECT_EQ(format_from_path("a/b.ply"), CloudFormat::kPly);
  EXPECT_EQ(format_from_path("a/b.txt"), CloudFormat::kXyz);
}

TEST(Xyz, WriteReadIsExact) {
  const auto cloud = synth_shape(ShapeKind::kGaussianBlobs, 64, 4);
  const auto path = std::filesystem::temp_directory_path() / "cmig_xyz_test.xyz";
  write_xyz(path, cloud);
  const auto back = read_xyz(path);
  EXPECT_EQ(back.points, cloud.points);
  std::filesystem::remove(path);
  EXPECT_THROW(read_xyz(path), IoError);
}

TEST(Synth, DeterministicAndNormalised) {
  for (auto kind : {ShapeKind::kSphere, ShapeKind::kCube, ShapeKind::kTorus, ShapeKind::kGaussianBlobs}) {
    for (std::size_t n : {64u, 65u}) {
      const auto a = synth_shape(kind, n, 5), b = synth_shape(kind, n, 5);
      EXPECT_EQ(a.points, b.points) << to_string(kind);
      EXPECT_EQ(a.size(), n);
      EXPECT_LT(Eigen::RowVector3d(a.points.colwise().mean()).norm(), 1e-12) << to_string(kind);
      EXPECT_NEAR(a.points.rowwise().norm().maxCoeff(), 1.0, 1e-12);
    }
    EXPECT_EQ(shape_from_string(to_string(kind)), kind);
  }
  const auto s = synth_shape(ShapeKind::kSphere, 33, 6);
  EXPECT_NEAR(s.points.rowwise().norm().minCoeff(), 1.0, 1e-12);
  EXPECT_THROW(synth_shape(ShapeKind::kSphere, 8, 0), ContractViolation);
  EXPECT_THROW(shape_from_string("teapot"), ContractViolation);
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(Protocol, RigidStaysInsideBoxes) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto t = sample_rigid(s, 45.0, 0.5);
    const auto e = geometry::matrix_to_euler(t.rotation).angles_deg;
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(e(a), -1e-9);
      EXPECT_LE(e(a), 45.0 + 1e-9);
      EXPECT_LE(std::abs(t.translation(a)), 0.5);
    }
    mean += e / 1000.0;
  }
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(mean(a), 22.5, 1.5);
}

TEST(Protocol, CropKeepsTopFractionByProjection) {
  const auto cloud = synth_shape(ShapeKind::kGaussianBlobs, 128, 7);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::Vector3d d = random_direction(s);
    EXPECT_NEAR(d.norm(), 1.0, 1e-12);
    const auto kept = partial_crop(cloud, 0.75, s);
    ASSERT_EQ(kept.size(), 96u);
    // Sort oracle: the 96 largest projections.
    std::vector<double> proj(128);
    for (std::size_t i = 0; i < 128; ++i) proj[i] = cloud.point(i).dot(d);
    std::vector<double> sorted = proj;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    EXPECT_DOUBLE_EQ(brute_projection_min(kept.points, d), sorted[95]);
  }
  EXPECT_EQ(crop_count(10, 0.75), 8u);
  EXPECT_EQ(crop_count(128, 0.75), 96u);
  EXPECT_EQ(crop_count(3, 0.01), 1u);
}

TEST(Protocol, CropPreservesOriginalOrder) {
  Points p(4, 3);
  p << 3, 0, 0, 0, 0, 0, 2, 0, 0, 1, 0, 0;
  const auto kept = crop_along(PointCloud(p), 0.75, Eigen::Vector3d(2, 0, 0));
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept.points(0, 0), 3.0);
  EXPECT_EQ(kept.points(1, 0), 2.0);
  EXPECT_EQ(kept.points(2, 0), 1.0);
}

TEST(Protocol, NoiseStatistics) {
  const PointCloud zero(Points::Zero(100000 / 3 + 1, 3));
  const auto noisy = add_noise(zero, 0.01, 0.05, 8);
  const Eigen::Map<const Eigen::VectorXd> v(noisy.points.data(), noisy.points.size());
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
  EXPECT_NEAR(sd, 0.01, 0.0005);
  EXPECT_LE(v.cwiseAbs().maxCoeff(), 0.05);

  const auto clipped = add_noise(zero, 1.0, 0.05, 9);
  EXPECT_LE(clipped.points.cwiseAbs().maxCoeff(), 0.05);
  EXPECT_EQ(add_noise(zero, 0.0, 0.05, 10).points, zero.points);
}

TEST(Protocol, CleanSampleAlignsUnderGroundTruth) {
  const auto base = synth_shape(ShapeKind::kGaussianBlobs, 64, 11);
  const auto s = make_sample(base, Regime::kClean, 12, {});
  EXPECT_LT((s.gt.apply(s.source.points) - s.target.points).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.target.points, base.points);
}

TEST(Protocol, PartialSampleSizesAndOverlap) {
  const auto base = synth_shape(ShapeKind::kGaussianBlobs, 128, 13);
  for (auto r : {Regime::kPartial, Regime::kNoisy, Regime::kLowOverlap}) {
    const auto s = make_sample(base, r, 14, {});
    EXPECT_EQ(s.source.size(), 96u);
    EXPECT_EQ(s.target.size(), 96u);
    EXPECT_TRUE(s.gt.is_valid());
  }
  // Shared crop without noise: every source point lands exactly on a target point.
  const auto s = make_sample(base, Regime::kPartial, 15, {});
  const auto m = geometry::overlap_select(s.source, s.target, s.gt, 1e-9);
  EXPECT_EQ(m.source_count(), 96u);
  EXPECT_EQ(regime_from_string("low_overlap"), Regime::kLowOverlap);
  EXPECT_THROW(regime_from_string("dirty"), ContractViolation);
}

TEST(Protocol, ConfigValidation) {
  ProtocolConfig c;
  c.keep_fraction = 0.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.noise_sigma = -1.0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Bundle, RoundTrip) {
  const auto base = synth_shape(ShapeKind::kGaussianBlobs, 64, 16);
  const auto s = make_sample(base, Regime::kNoisy, 17, {});
  const auto dir = std::filesystem::temp_directory_path() / "cmig_bundle_test";
  std::filesystem::remove_all(dir);
  write_sample(dir, s);
  const auto back = read_sample(dir);
  EXPECT_EQ(back.source.points, s.source.points);
  EXPECT_EQ(back.target.points, s.target.points);
  EXPECT_EQ(back.gt.rotation, s.gt.rotation);
  EXPECT_EQ(back.gt.translation, s.gt.translation);
  EXPECT_EQ(back.regime, Regime::kNoisy);
  EXPECT_EQ(back.seed, 17u);

  std::ofstream(dir / "sample.json") << "{\"rotation\": [1,0,0], \"translation\": [0,0,0]}";
  EXPECT_THROW(read_sample(dir), ParseError);
  std::ofstream(dir / "sample.json") << "{not json";
  EXPECT_THROW(read_sample(dir), ParseError);
  std::filesystem::remove_all(dir);
}
