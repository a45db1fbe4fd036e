#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "cmig/geometry/types.hpp"

namespace cmig::projection {

/// V single-channel depth images, each resolution x resolution, row-major.
/// Background is 0; occupied pixels hold a value in [0.1, 1] that grows as
/// the point gets closer to the camera.
struct DepthImageStack {
  std::size_t resolution = 0;
  std::vector<std::vector<double>> views;
  std::vector<double> view_angles_deg;

  std::size_t view_count() const { return views.size(); }
  double at(std::size_t view, std::size_t row, std::size_t col) const {
    return views[view][row * resolution + col];
  }
};

/// Orthographic z-buffer rendering from `view_count` azimuths spaced evenly
/// about +Y. View v rotates the cloud by 360 v / V degrees about +Y, looks
/// down -Z, and maps x, y in [-1, 1] to columns / rows (row 0 is y = +1).
/// Nearest point wins a pixel; exact depth ties go to the lower point index.
DepthImageStack render_views(const geometry::PointCloud& cloud, std::size_t view_count = 4,
                             std::size_t resolution = 32);

/// Concatenates two stacks (used when both clouds are rendered).
DepthImageStack merge(const DepthImageStack& a, const DepthImageStack& b);

/// Writes one ASCII PGM (P2) per view as <dir>/<stem>_v<k>.pgm. Returns the
/// paths written.
std::vector<std::filesystem::path> write_pgm(const DepthImageStack& stack, const std::filesystem::path& dir,
                                             const std::string& stem = "view");

}  // namespace cmig::projection
