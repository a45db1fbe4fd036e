#include "cmig/geometry/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cmig/errors.hpp"

namespace cmig::geometry {

std::vector<std::size_t> knn(std::span<const double> rows, std::size_t dims, std::size_t k) {
  if (dims == 0 || rows.size() % dims != 0) throw ContractViolation("knn: buffer is not a multiple of dims");
  const std::size_t n = rows.size() / dims;
  if (k >= n)
    throw ContractViolation("knn: k=" + std::to_string(k) + " must be smaller than the point count " +
                            std::to_string(n));
  std::vector<std::size_t> out(n * k);
  std::vector<double> d2(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* pi = rows.data() + i * dims;
    for (std::size_t j = 0; j < n; ++j) {
      const double* pj = rows.data() + j * dims;
      double s = 0.0;
      for (std::size_t c = 0; c < dims; ++c) {
        const double diff = pi[c] - pj[c];
        s += diff * diff;
      }
      d2[j] = s;
    }
    d2[i] = std::numeric_limits<double>::infinity();
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
    std::copy_n(order.begin(), k, out.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  return out;
}

std::vector<std::size_t> knn(const Points& points, std::size_t k) {
  return knn(std::span<const double>(points.data(), static_cast<std::size_t>(points.size())), 3, k);
}

NearestResult nearest(const Points& query, const Points& reference) {
  if (reference.rows() == 0) throw ContractViolation("nearest: empty reference set");
  NearestResult out;
  out.index.resize(static_cast<std::size_t>(query.rows()));
  out.distance.resize(static_cast<std::size_t>(query.rows()));
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index j = 0; j < reference.rows(); ++j) {
      const double d = (query.row(i) - reference.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    out.index[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
    out.distance[static_cast<std::size_t>(i)] = std::sqrt(best);
  }
  return out;
}

std::size_t OverlapMasks::source_count() const {
  return static_cast<std::size_t>(std::count(source_overlap.begin(), source_overlap.end(), true));
}

std::size_t OverlapMasks::target_count() const {
  return static_cast<std::size_t>(std::count(target_overlap.begin(), target_overlap.end(), true));
}

OverlapMasks overlap_select(const PointCloud& source, const PointCloud& target, const RigidTransform& gt,
                            double threshold) {
  if (!(threshold > 0.0)) throw ContractViolation("overlap_select: threshold must be positive");
  const Points moved = gt.apply(source.points);
  OverlapMasks masks;
  masks.threshold = threshold;
  const auto fwd = nearest(moved, target.points);
  const auto bwd = nearest(target.points, moved);
  masks.source_overlap.resize(fwd.distance.size());
  masks.target_overlap.resize(bwd.distance.size());
  for (std::size_t i = 0; i < fwd.distance.size(); ++i) masks.source_overlap[i] = fwd.distance[i] < threshold;
  for (std::size_t j = 0; j < bwd.distance.size(); ++j) masks.target_overlap[j] = bwd.distance[j] < threshold;
  return masks;
}

}  // namespace cmig::geometry
