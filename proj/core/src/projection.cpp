#include "cmig/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cmig/errors.hpp"
#include "cmig/geometry/rotation.hpp"

namespace cmig::projection {

namespace {

// Depth value for a camera-space z in [-1, 1]: 1 at z = +1, 0.1 at z = -1.
double depth_value(double z) {
  const double normalized_depth = std::clamp((1.0 - z) / 2.0, 0.0, 1.0);
  return 1.0 - 0.9 * normalized_depth;
}

std::size_t to_pixel(double u, std::size_t res) {
  const double f = (u + 1.0) / 2.0 * static_cast<double>(res);
  const auto p = static_cast<long>(std::floor(f));
  return static_cast<std::size_t>(std::clamp<long>(p, 0, static_cast<long>(res) - 1));
}

}  // namespace

DepthImageStack render_views(const geometry::PointCloud& cloud, std::size_t view_count, std::size_t resolution) {
  if (cloud.size() == 0) throw ContractViolation("render_views: empty cloud");
  if (view_count < 1) throw ContractViolation("render_views: at least one view required");
  if (resolution < 4) throw ContractViolation("render_views: resolution must be >= 4");

  DepthImageStack stack;
  stack.resolution = resolution;
  const std::size_t pixels = resolution * resolution;
  std::vector<double> zbuf(pixels);
  for (std::size_t v = 0; v < view_count; ++v) {
    const double angle = 360.0 * static_cast<double>(v) / static_cast<double>(view_count);
    const Eigen::Matrix3d rot = geometry::rotation_about_y(angle);
    std::vector<double> image(pixels, 0.0);
    std::fill(zbuf.begin(), zbuf.end(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Eigen::Vector3d p = rot * cloud.point(i);
      const std::size_t col = to_pixel(p.x(), resolution);
      const std::size_t row = to_pixel(-p.y(), resolution);
      const std::size_t px = row * resolution + col;
      if (p.z() > zbuf[px]) {
        zbuf[px] = p.z();
        image[px] = depth_value(p.z());
      }
    }
    stack.views.push_back(std::move(image));
    stack.view_angles_deg.push_back(angle);
  }
  return stack;
}

DepthImageStack merge(const DepthImageStack& a, const DepthImageStack& b) {
  if (a.resolution != b.resolution) throw ContractViolation("merge: resolution mismatch");
  DepthImageStack out = a;
  out.views.insert(out.views.end(), b.views.begin(), b.views.end());
  out.view_angles_deg.insert(out.view_angles_deg.end(), b.view_angles_deg.begin(), b.view_angles_deg.end());
  return out;
}

std::vector<std::filesystem::path> write_pgm(const DepthImageStack& stack, const std::filesystem::path& dir,
                                             const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t v = 0; v < stack.view_count(); ++v) {
    const auto path = dir / (stem + "_v" + std::to_string(v) + ".pgm");
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "P2\n" << stack.resolution << ' ' << stack.resolution << "\n255\n";
    for (std::size_t r = 0; r < stack.resolution; ++r) {
      for (std::size_t c = 0; c < stack.resolution; ++c)
        os << (c ? " " : "") << static_cast<int>(std::lround(stack.at(v, r, c) * 255.0));
      os << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace cmig::projection
