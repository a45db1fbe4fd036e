#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmig/autodiff/value.hpp"
#include "cmig/geometry/types.hpp"
#include "cmig/network/model.hpp"
#include "cmig/projection.hpp"

namespace cmig::network {

enum class FeatureRole { kPoint, kImage, kInteraction, kHybrid };

struct FeatureMap {
  ad::Value features;  // N x C
  FeatureRole role = FeatureRole::kPoint;

  std::size_t rows() const { return features.rows(); }
  std::size_t width() const { return features.cols(); }
};

/// Constant N x 3 Value holding the coordinates.
ad::Value coords_value(const geometry::Points& points);
geometry::Points points_from(const ad::Value& v);

/// x W + b (bias skipped when the store has no "<name>.b").
ad::Value linear(const ad::Value& x, const ParamStore& ps, const std::string& name);
/// linear -> LeakyReLU -> linear.
ad::Value mlp2(const ad::Value& x, const ParamStore& ps, const std::string& first, const std::string& second,
               double slope);

/// Dynamic-graph EdgeConv stack. Each layer rebuilds the kNN graph in its
/// input space, forms [f_i, f_j - f_i] per edge, runs a shared two-layer MLP
/// and max-pools over the k neighbours; layer outputs are concatenated and
/// projected to C.
FeatureMap edgeconv_backbone(const geometry::Points& cloud, const Model& model);

/// One EdgeConv layer, exposed for tests.
ad::Value edgeconv_layer(const ad::Value& features, std::size_t k, const ParamStore& ps,
                         const std::string& prefix, double slope);

/// 3x3, stride 2, zero padding 1 convolution of an (H*W) x Cin image via
/// row gathering. `weights` is (9*Cin) x Cout with taps in row-major order.
ad::Value conv3x3_stride2(const ad::Value& image, std::size_t height, std::size_t width, const ad::Value& weights,
                          const ad::Value& bias, std::size_t& out_height, std::size_t& out_width);

struct ImageFeatures {
  FeatureMap repeated;  // N x C, identical rows
  ad::Value aggregated; // 1 x C, max over views
};

/// Shared CNN per view, elementwise max across views, repeated n_points times.
ImageFeatures image_encoder(const projection::DepthImageStack& views, std::size_t n_points, const Model& model);

/// Single-head attention residual: query + MLP(softmax(Q K^T / sqrt(C_t)) V).
ad::Value cross_attention(const ad::Value& query, const ad::Value& context, const ParamStore& ps,
                          const std::string& prefix, double slope);

struct InteractionFeatures {
  FeatureMap source;
  FeatureMap target;
};

InteractionFeatures transformer_interact(const FeatureMap& fx, const FeatureMap& fy, const Model& model);
FeatureMap transformer_fuse(const FeatureMap& interaction, const FeatureMap& image, const Model& model);

struct KeypointMask {
  std::vector<bool> mask;
  std::size_t k = 0;
  std::vector<std::size_t> selected_indices;  // ascending
};

struct MaskPrediction {
  KeypointMask mask;
  ad::Value scores;              // N x 1, sigmoid significance
  ad::Value selected_coords;     // K x 3
  ad::Value selected_features;   // K x C
  ad::Value selected_scores;     // K x 1, soft scores of the selected rows
};

/// Top-k of `scores`, ties to the lower index, returned ascending.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

MaskPrediction mask_predict(const FeatureMap& self, const FeatureMap& other, const ad::Value& coords, std::size_t k,
                            const Model& model);

struct MatchResult {
  ad::Value matrix;          // K x M row-softmax of the summed logits
  ad::Value logits;          // K x M
  ad::Value coord_matrix;    // M_P
  ad::Value feature_matrix;  // M_F
  ad::Value scores;          // K x 1 in (0, 1)
};

/// Feature matching logits M_F. Depends only on features, so the iterative
/// loop computes it once.
ad::Value feature_logits(const ad::Value& fx, const ad::Value& fy, const Model& model);

/// Coordinate matching logits M_P from [p_i, q_j, p_i - q_j, |p_i - q_j|].
ad::Value coordinate_logits(const ad::Value& px, const ad::Value& py, const Model& model);

/// Full correspondence head. Pass `cached_feature_logits` to reuse M_F.
MatchResult correspondence_search(const ad::Value& px, const ad::Value& py, const ad::Value& fx,
                                  const ad::Value& fy, const Model& model,
                                  const ad::Value& cached_feature_logits = {});

/// w_i = s_i [s_i >= median] / sum, median = ceil(K/2)-th smallest score.
std::vector<double> correspondence_weights(std::span<const double> scores);

/// x'_i = sum_j M(i, j) y_j.
ad::Value soft_correspondences(const ad::Value& matrix, const ad::Value& target_coords);
/// x'_i = y_argmax_j M(i, j).
geometry::Points hard_correspondences(const ad::Value& matrix, const geometry::Points& target);

/// Pose regressor used as the direct-regression stand-in: pooled hybrid
/// features of both clouds -> (quaternion[4], translation[3]) as 1 x 7.
ad::Value pose_regression(const FeatureMap& fx, const FeatureMap& fy, const Model& model);
geometry::RigidTransform pose_from_regression(std::span<const double> output);

}  // namespace cmig::network
