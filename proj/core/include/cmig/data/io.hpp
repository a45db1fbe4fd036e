#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "cmig/geometry/types.hpp"

namespace cmig::data {

enum class CloudFormat { kOff, kPly, kXyz };

/// Guesses the format from the extension (.off, .ply, anything else XYZ).
CloudFormat format_from_path(const std::filesystem::path& path);

/// Centres at the centroid and scales so the farthest point has radius 1.
geometry::PointCloud normalize(geometry::PointCloud cloud);

/// Meshes are sampled uniformly by triangle area; point files are
/// subsampled without replacement (or padded by resampling) to n_points.
/// The result is normalised. Throws ParseError with a line number on
/// malformed input.
geometry::PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format, std::size_t n_points,
                                std::uint64_t seed = 0);

/// Same, from in-memory text (used by tests and by load_cloud).
geometry::PointCloud parse_cloud(const std::string& text, CloudFormat format, std::size_t n_points,
                                 std::uint64_t seed = 0);

/// One "x y z" line per point, 17 significant digits.
void write_xyz(const std::filesystem::path& path, const geometry::PointCloud& cloud);
/// Reads an XYZ file verbatim (no resampling, no normalisation).
geometry::PointCloud read_xyz(const std::filesystem::path& path);

}  // namespace cmig::data
