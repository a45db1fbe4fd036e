#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cmig/autodiff/value.hpp"
#include "cmig/geometry/neighbors.hpp"
#include "cmig/geometry/types.hpp"

namespace cmig::losses {

struct LossConfig {
  double sigma_p = 0.1;   // positive margin, feature-distance units
  double sigma_n = 1.4;   // negative margin
  double tau = 0.07;      // temperature
  double dist_threshold = 0.05;
  double overlap_threshold = 0.05;
  /// Adds pos to the denominator of the cross-modal term (InfoNCE form).
  bool include_pos_in_denominator = false;
  /// Lets the mask loss push on the matching matrix too. Off: the matrix is
  /// a fixed target and only the significance scores learn from it.
  bool mp_through_matrix = false;

  void validate() const;
};

/// Index-level pair sets for the overlapping contrastive loss.
struct OverlapPairs {
  std::vector<std::pair<std::size_t, std::size_t>> positives;  // (x, y)
  std::vector<std::size_t> overlap_x, non_overlap_x, overlap_y, non_overlap_y;
};

/// Each overlapping source point is paired with its nearest overlapping
/// target point under `gt`.
OverlapPairs overlap_pairs(const geometry::PointCloud& source, const geometry::PointCloud& target,
                           const geometry::RigidTransform& gt, const geometry::OverlapMasks& masks);

/// mean_P [D - sigma_p]_+^2 + mean_N1 [sigma_n - D]_+^2 + mean_N2 [sigma_n - D]_+^2
/// with N1 = overlap-X x non-overlap-Y and N2 = overlap-Y x non-overlap-X.
/// Empty sets contribute 0 (an empty positive set is logged).
ad::Value ocl_loss(const ad::Value& fx, const ad::Value& fy, const OverlapPairs& pairs, const LossConfig& cfg);

/// Cross-modal contrastive loss over a mini-batch. Row b of `point_vectors`
/// is (P_X + P_Y) / 2 for sample b; row b of `image_vectors` is P_I. The
/// per-sample term is -log(pos / neg) with neg summing only the k != b
/// similarities, symmetrised over the two modalities. Requires B >= 2.
ad::Value cmcl_loss(const ad::Value& point_vectors, const ad::Value& image_vectors, const LossConfig& cfg);

/// (1/K) sum_i (a_i - sum_j M_ij log M_ij)^2 with 0 log 0 = 0. Rows of
/// `matrix` must sum to 1 within 1e-6.
ad::Value mp_loss(const ad::Value& mask_scores, const ad::Value& matrix);

/// Mean binary cross-entropy, scores clamped to [1e-7, 1 - 1e-7].
ad::Value ms_loss(const ad::Value& scores, std::span<const double> labels);

/// (1/K) sum_i -y_i log M(i, j*_i), log argument clamped at 1e-7.
ad::Value cs_loss(const ad::Value& matrix, std::span<const double> y_hat, std::span<const std::size_t> j_star);

struct SupervisionLabels {
  std::vector<double> s_hat;
  std::vector<double> y_hat;
  std::vector<std::size_t> j_star;
};

/// Labels for selected source keypoints (original coordinates) against the
/// selected target keypoints: j* is the nearest target under gt and both
/// label sets threshold that distance.
SupervisionLabels make_labels(const geometry::Points& source_keypoints, const geometry::Points& target_keypoints,
                              const geometry::RigidTransform& gt, double dist_threshold);

struct LossComponents {
  ad::Value ocl;
  ad::Value cmcl;
  ad::Value mp;
  std::vector<ad::Value> ms;  // one per iteration
  std::vector<ad::Value> cs;
};

/// L_OCL + L_CMCL + L_MP + sum_n (L_MS^n + L_CS^n). Undefined components
/// count as zero.
ad::Value total_loss(const LossComponents& parts);

}  // namespace cmig::losses
