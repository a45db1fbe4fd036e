#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cmig/errors.hpp"
#include "cmig/projection.hpp"

using namespace cmig;
using geometry::Points;
using geometry::PointCloud;

namespace {

std::size_t occupied(const std::vector<double>& view) {
  std::size_t n = 0;
  for (double v : view) n += v != 0.0;
  return n;
}

}  // namespace

TEST(Render, NearerPointWinsZBuffer) {
  Points p(2, 3);
  p << 0, 0, -0.5, 0, 0, 0.5;
  const auto s = projection::render_views(PointCloud(p), 1, 32);
  ASSERT_EQ(s.view_count(), 1u);
  EXPECT_EQ(occupied(s.views[0]), 1u);
  // x = y = 0 lands on pixel 16 of 32; z = +0.5 -> 1 - 0.9 * (1 - 0.5) / 2.
  EXPECT_DOUBLE_EQ(s.at(0, 16, 16), 1.0 - 0.9 * 0.25);
}

TEST(Render, OrderOfPointsDoesNotMatter) {
  Points a(2, 3), b(2, 3);
  a << 0, 0, 0.5, 0, 0, -0.5;
  b << 0, 0, -0.5, 0, 0, 0.5;
  EXPECT_EQ(projection::render_views(PointCloud(a), 2, 8).views,
            projection::render_views(PointCloud(b), 2, 8).views);
}

TEST(Render, CubeCornersFrontView) {
  const double c = 1.0 / std::sqrt(3.0);
  Points p(8, 3);
  int r = 0;
  for (int x : {-1, 1})
    for (int y : {-1, 1})
      for (int z : {-1, 1}) p.row(r++) = Eigen::RowVector3d(x * c, y * c, z * c);
  const auto s = projection::render_views(PointCloud(p), 1, 8);
  EXPECT_EQ(occupied(s.views[0]), 4u);
  // +-0.577 maps to floor((u + 1) / 2 * 8) = 6 or 1.
  const double front = 1.0 - 0.9 * (1.0 - c) / 2.0;
  for (std::size_t row : {1u, 6u})
    for (std::size_t col : {1u, 6u}) EXPECT_DOUBLE_EQ(s.at(0, row, col), front);
}

TEST(Render, RowZeroIsTop) {
  Points p(1, 3);
  p << -0.9, 0.9, 0.0;
  const auto s = projection::render_views(PointCloud(p), 1, 8);
  EXPECT_GT(s.at(0, 0, 0), 0.0);
}

TEST(Render, QuarterTurnViewSeesSide) {
  // View 1 of 4 rotates +90 deg about Y, taking +X to -Z.
  Points p(2, 3);
  p << 0.5, 0, 0, -0.5, 0, 0;
  const auto s = projection::render_views(PointCloud(p), 4, 8);
  EXPECT_EQ(occupied(s.views[1]), 1u);
  EXPECT_DOUBLE_EQ(s.view_angles_deg[1], 90.0);
  EXPECT_DOUBLE_EQ(s.at(1, 4, 4), 1.0 - 0.9 * 0.25);
}

TEST(Render, ValuesInRange) {
  Points p = Points::Random(200, 3) * 0.9;
  const auto s = projection::render_views(PointCloud(p), 4, 16);
  for (const auto& v : s.views)
    for (double x : v) EXPECT_TRUE(x == 0.0 || (x >= 0.1 && x <= 1.0));
}

TEST(Render, Contracts) {
  EXPECT_THROW(projection::render_views(PointCloud(), 4, 32), ContractViolation);
  Points p(1, 3);
  p << 0, 0, 0;
  EXPECT_THROW(projection::render_views(PointCloud(p), 0, 32), ContractViolation);
  EXPECT_THROW(projection::render_views(PointCloud(p), 1, 2), ContractViolation);
}

TEST(Render, MergeConcatenatesViews) {
  Points p(1, 3);
  p << 0, 0, 0;
  const auto a = projection::render_views(PointCloud(p), 2, 8);
  const auto m = projection::merge(a, projection::render_views(PointCloud(p), 3, 8));
  EXPECT_EQ(m.view_count(), 5u);
  EXPECT_THROW(projection::merge(a, projection::render_views(PointCloud(p), 1, 16)), ContractViolation);
}

TEST(Pgm, WritesOneFilePerView) {
  Points p(1, 3);
  p << 0, 0, 1.0;
  const auto dir = std::filesystem::temp_directory_path() / "cmig_pgm_test";
  std::filesystem::remove_all(dir);
  const auto files = projection::write_pgm(projection::render_views(PointCloud(p), 2, 4), dir);
  ASSERT_EQ(files.size(), 2u);
  std::ifstream is(files[0]);
  std::string magic;
  std::size_t w = 0, h = 0, maxv = 0;
  is >> magic >> w >> h >> maxv;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(w, 4u);
  EXPECT_EQ(maxv, 255u);
  int sum = 0, v = 0;
  while (is >> v) sum += v;
  EXPECT_EQ(sum, 255);
  std::filesystem::remove_all(dir);
}
