#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmig/geometry/types.hpp"

namespace cmig::geometry {

/// Exact k-nearest neighbours among the rows of a count x dims row-major
/// buffer. Row i of the result lists the k closest *other* rows, ascending by
/// distance, ties to the lower index. Returns count*k indices.
std::vector<std::size_t> knn(std::span<const double> rows, std::size_t dims, std::size_t k);
std::vector<std::size_t> knn(const Points& points, std::size_t k);

struct NearestResult {
  std::vector<std::size_t> index;
  std::vector<double> distance;
};

/// Closest reference point for every query point (brute force).
NearestResult nearest(const Points& query, const Points& reference);

struct OverlapMasks {
  std::vector<bool> source_overlap;
  std::vector<bool> target_overlap;
  double threshold = 0.0;

  std::size_t source_count() const;
  std::size_t target_count() const;
};

/// A source point overlaps when its gt-transformed position lies strictly
/// closer than `threshold` to some target point; target points are tested
/// against the transformed source the same way.
OverlapMasks overlap_select(const PointCloud& source, const PointCloud& target, const RigidTransform& gt,
                            double threshold);

}  // namespace cmig::geometry
