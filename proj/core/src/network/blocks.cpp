#include "cmig/network/blocks.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cmig/errors.hpp"
#include "cmig/geometry/neighbors.hpp"

namespace cmig::network {

using ad::Value;

Value coords_value(const geometry::Points& points) {
  const auto n = static_cast<std::size_t>(points.rows());
  return Value::matrix(n, 3, std::vector<double>(points.data(), points.data() + 3 * n));
}

geometry::Points points_from(const Value& v) {
  if (v.cols() != 3) throw ContractViolation("points_from: expected N x 3, got " + ad::shape_str(v.shape()));
  geometry::Points p(static_cast<Eigen::Index>(v.rows()), 3);
  std::copy(v.data().begin(), v.data().end(), p.data());
  return p;
}

Value linear(const Value& x, const ParamStore& ps, const std::string& name) {
  Value y = ad::matmul(x, ps.get(name + ".w"));
  if (ps.contains(name + ".b")) y = ad::add(y, ps.get(name + ".b"));
  return y;
}

Value mlp2(const Value& x, const ParamStore& ps, const std::string& first, const std::string& second, double slope) {
  return linear(ad::leaky_relu(linear(x, ps, first), slope), ps, second);
}

// ---- EdgeConv ------------------------------------------------------------

Value edgeconv_layer(const Value& features, std::size_t k, const ParamStore& ps, const std::string& prefix,
                     double slope) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  const auto nbr = geometry::knn(features.data(), d, k);

  // Neighbour-major edge order (slot j, point i) -> row j*n + i, so a k x (n*w)
  // view puts all edges of one point/channel in a single column.
  std::vector<std::size_t> centre(n * k), other(n * k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      centre[j * n + i] = i;
      other[j * n + i] = nbr[i * k + j];
    }
  const Value fc = ad::gather_rows(features, centre);
  const Value fn = ad::gather_rows(features, other);
  const Value edge = ad::concat({fc, ad::sub(fn, fc)}, 1);
  Value h = ad::leaky_relu(linear(edge, ps, prefix + ".mlp1"), slope);
  h = ad::leaky_relu(linear(h, ps, prefix + ".mlp2"), slope);
  const std::size_t w = h.cols();
  return ad::reshape(ad::max_reduce(ad::reshape(h, k, n * w), 0), n, w);
}

FeatureMap edgeconv_backbone(const geometry::Points& cloud, const Model& model) {
  const auto& cfg = model.config;
  const auto n = static_cast<std::size_t>(cloud.rows());
  if (cfg.k_nn >= n)
    throw ContractViolation("edgeconv_backbone: k_nn=" + std::to_string(cfg.k_nn) + " must be smaller than N=" +
                            std::to_string(n));
  Value f = coords_value(cloud);
  std::vector<Value> outputs;
  for (std::size_t l = 0; l < cfg.edge_widths.size(); ++l) {
    f = edgeconv_layer(f, cfg.k_nn, model.params, "edge" + std::to_string(l), cfg.leaky_slope);
    outputs.push_back(f);
  }
  const Value cat = ad::concat(std::span<const Value>(outputs), 1);
  return {linear(cat, model.params, "edge.out"), FeatureRole::kPoint};
}

// ---- image encoder -------------------------------------------------------

Value conv3x3_stride2(const Value& image, std::size_t height, std::size_t width, const Value& weights,
                      const Value& bias, std::size_t& out_height, std::size_t& out_width) {
  const std::size_t cin = image.cols();
  if (image.rows() != height * width) throw ContractViolation("conv3x3_stride2: image rows != height*width");
  if (weights.rows() != 9 * cin) throw ContractViolation("conv3x3_stride2: weights must be (9*Cin) x Cout");
  out_height = (height - 1) / 2 + 1;
  out_width = (width - 1) / 2 + 1;
  const std::size_t pad_row = height * width;
  const Value padded = ad::concat({image, Value::zeros(1, cin)}, 0);
  std::vector<std::size_t> taps;
  taps.reserve(out_height * out_width * 9);
  for (std::size_t oy = 0; oy < out_height; ++oy)
    for (std::size_t ox = 0; ox < out_width; ++ox)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const long y = static_cast<long>(2 * oy) + dy;
          const long x = static_cast<long>(2 * ox) + dx;
          const bool inside = y >= 0 && x >= 0 && y < static_cast<long>(height) && x < static_cast<long>(width);
          taps.push_back(inside ? static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x) : pad_row);
        }
  const Value patches = ad::reshape(ad::gather_rows(padded, taps), out_height * out_width, 9 * cin);
  return ad::add(ad::matmul(patches, weights), bias);
}

ImageFeatures image_encoder(const projection::DepthImageStack& views, std::size_t n_points, const Model& model) {
  if (views.view_count() == 0) throw ContractViolation("image_encoder: empty view stack");
  const auto& ps = model.params;
  const double slope = model.config.leaky_slope;
  const std::size_t res = views.resolution;
  std::vector<Value> per_view;
  for (const auto& img : views.views) {
    Value x = Value::matrix(res * res, 1, img);
    std::size_t h = res, w = res, oh = 0, ow = 0;
    x = ad::leaky_relu(conv3x3_stride2(x, h, w, ps.get("cnn.conv1.w"), ps.get("cnn.conv1.b"), oh, ow), slope);
    h = oh;
    w = ow;
    x = ad::leaky_relu(conv3x3_stride2(x, h, w, ps.get("cnn.conv2.w"), ps.get("cnn.conv2.b"), oh, ow), slope);
    per_view.push_back(linear(ad::mean(x, 0), ps, "cnn.fc"));
  }
  const Value aggregated = ad::max_reduce(ad::concat(std::span<const Value>(per_view), 0), 0);
  return {{ad::broadcast_to(aggregated, n_points, aggregated.cols()), FeatureRole::kImage}, aggregated};
}

// ---- transformer ---------------------------------------------------------

Value cross_attention(const Value& query, const Value& context, const ParamStore& ps, const std::string& prefix,
                      double slope) {
  const Value q = linear(query, ps, prefix + ".q");
  const Value k = linear(context, ps, prefix + ".k");
  const Value v = linear(context, ps, prefix + ".v");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Value weights = ad::softmax(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt), 1);
  const Value attended = ad::matmul(weights, v);
  return ad::add(query, mlp2(attended, ps, prefix + ".mlp1", prefix + ".mlp2", slope));
}

InteractionFeatures transformer_interact(const FeatureMap& fx, const FeatureMap& fy, const Model& model) {
  if (fx.width() != fy.width()) throw ContractViolation("transformer_interact: feature widths differ");
  const double slope = model.config.leaky_slope;
  return {{cross_attention(fx.features, fy.features, model.params, "interact", slope), FeatureRole::kInteraction},
          {cross_attention(fy.features, fx.features, model.params, "interact", slope), FeatureRole::kInteraction}};
}

FeatureMap transformer_fuse(const FeatureMap& interaction, const FeatureMap& image, const Model& model) {
  if (interaction.rows() != image.rows())
    throw ContractViolation("transformer_fuse: row counts differ (" + std::to_string(interaction.rows()) + " vs " +
                            std::to_string(image.rows()) + ")");
  return {cross_attention(interaction.features, image.features, model.params, "fuse", model.config.leaky_slope),
          FeatureRole::kHybrid};
}

// ---- mask prediction -----------------------------------------------------

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size())
    throw ContractViolation("top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

MaskPrediction mask_predict(const FeatureMap& self, const FeatureMap& other, const Value& coords, std::size_t k,
                            const Model& model) {
  const std::size_t n = self.rows();
  if (k < 1 || k > n)
    throw ContractViolation("mask_predict: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  if (coords.rows() != n) throw ContractViolation("mask_predict: coordinate rows differ from feature rows");
  const auto& ps = model.params;
  const std::size_t c = self.width();
  const Value pooled_self = ad::broadcast_to(ad::max_reduce(self.features, 0), n, c);
  const Value pooled_other = ad::broadcast_to(ad::max_reduce(other.features, 0), n, c);
  const Value input = ad::concat({pooled_self, pooled_other, self.features, coords}, 1);
  const Value scores = ad::sigmoid(mlp2(input, ps, "mask.l1", "mask.l2", model.config.leaky_slope));

  MaskPrediction out;
  out.scores = scores;
  out.mask.k = k;
  out.mask.selected_indices = top_k_indices(scores.data(), k);
  out.mask.mask.assign(n, false);
  for (auto i : out.mask.selected_indices) out.mask.mask[i] = true;
  out.selected_coords = ad::gather_rows(coords, out.mask.selected_indices);
  out.selected_features = ad::gather_rows(self.features, out.mask.selected_indices);
  out.selected_scores = ad::gather_rows(scores, out.mask.selected_indices);
  return out;
}

// ---- correspondence search -----------------------------------------------

namespace {

struct PairIndex {
  std::vector<std::size_t> left, right;
};

PairIndex all_pairs(std::size_t k, std::size_t m) {
  PairIndex p;
  p.left.reserve(k * m);
  p.right.reserve(k * m);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      p.left.push_back(i);
      p.right.push_back(j);
    }
  return p;
}

Value coordinate_descriptor(const Value& px, const Value& py, const PairIndex& pairs) {
  const Value a = ad::gather_rows(px, pairs.left);
  const Value b = ad::gather_rows(py, pairs.right);
  const Value d = ad::sub(a, b);
  return ad::concat({a, b, d, ad::l2norm(d, 1)}, 1);
}

Value feature_descriptor(const Value& fx, const Value& fy, const PairIndex& pairs) {
  const Value a = ad::gather_rows(fx, pairs.left);
  const Value b = ad::gather_rows(fy, pairs.right);
  return ad::concat({a, b, ad::sub(a, b)}, 1);
}

Value match_scores(const Value& logits, const Value& fx, const Model& model) {
  const Value summary = ad::concat({ad::max_reduce(logits, 1), ad::mean(logits, 1), fx}, 1);
  return ad::sigmoid(mlp2(summary, model.params, "cs.score.l1", "cs.score.l2", model.config.leaky_slope));
}

void require_pairs(const Value& px, const Value& py, const Value& fx, const Value& fy) {
  if (px.cols() != 3 || py.cols() != 3) throw ContractViolation("correspondence_search: coordinates must be K x 3");
  if (fx.rows() != px.rows() || fy.rows() != py.rows())
    throw ContractViolation("correspondence_search: feature and coordinate rows differ");
  if (px.rows() < 3 || py.rows() < 3)
    throw ContractViolation("correspondence_search: at least 3 keypoints per side required");
}

}  // namespace

Value feature_logits(const Value& fx, const Value& fy, const Model& model) {
  const PairIndex pairs = all_pairs(fx.rows(), fy.rows());
  const Value out = mlp2(feature_descriptor(fx, fy, pairs), model.params, "cs.feat.l1", "cs.feat.l2",
                         model.config.leaky_slope);
  return ad::reshape(out, fx.rows(), fy.rows());
}

Value coordinate_logits(const Value& px, const Value& py, const Model& model) {
  const PairIndex pairs = all_pairs(px.rows(), py.rows());
  const Value out = mlp2(coordinate_descriptor(px, py, pairs), model.params, "cs.coord.l1", "cs.coord.l2",
                         model.config.leaky_slope);
  return ad::reshape(out, px.rows(), py.rows());
}

MatchResult correspondence_search(const Value& px, const Value& py, const Value& fx, const Value& fy,
                                  const Model& model, const Value& cached_feature_logits) {
  require_pairs(px, py, fx, fy);
  const std::size_t k = px.rows(), m = py.rows();
  MatchResult r;
  switch (model.config.variant) {
    case MatchVariant::kSeparate:
      r.coord_matrix = coordinate_logits(px, py, model);
      r.feature_matrix = cached_feature_logits.defined() ? cached_feature_logits : feature_logits(fx, fy, model);
      r.logits = ad::add(r.coord_matrix, r.feature_matrix);
      break;
    case MatchVariant::kJoint: {
      const PairIndex pairs = all_pairs(k, m);
      const Value desc = ad::concat({coordinate_descriptor(px, py, pairs), feature_descriptor(fx, fy, pairs)}, 1);
      r.logits = ad::reshape(
          mlp2(desc, model.params, "cs.joint.l1", "cs.joint.l2", model.config.leaky_slope), k, m);
      r.coord_matrix = r.logits;
      r.feature_matrix = Value::zeros(k, m);
      break;
    }
    case MatchVariant::kDirectRegression:
      throw ContractViolation("correspondence_search: the regression variant has no matching head");
  }
  r.matrix = ad::softmax(r.logits, 1);
  r.scores = match_scores(r.logits, fx, model);
  return r;
}

std::vector<double> correspondence_weights(std::span<const double> scores) {
  if (scores.empty()) throw ContractViolation("correspondence_weights: no scores");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[(sorted.size() + 1) / 2 - 1];
  std::vector<double> w(scores.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] >= median) {
      w[i] = scores[i];
      total += scores[i];
    }
  if (!(total > 0.0)) {
    // All kept scores are zero: fall back to uniform over the kept set.
    std::size_t kept = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) kept += scores[i] >= median;
    for (std::size_t i = 0; i < scores.size(); ++i) w[i] = scores[i] >= median ? 1.0 / static_cast<double>(kept) : 0.0;
    return w;
  }
  for (double& x : w) x /= total;
  return w;
}

Value soft_correspondences(const Value& matrix, const Value& target_coords) {
  return ad::matmul(matrix, target_coords);
}

geometry::Points hard_correspondences(const Value& matrix, const geometry::Points& target) {
  const auto best = ad::argmax(matrix, 1);
  geometry::Points out(static_cast<Eigen::Index>(best.size()), 3);
  for (std::size_t i = 0; i < best.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = target.row(static_cast<Eigen::Index>(best[i]));
  return out;
}

// ---- direct regression ---------------------------------------------------

Value pose_regression(const FeatureMap& fx, const FeatureMap& fy, const Model& model) {
  const Value pooled = ad::concat({ad::max_reduce(fx.features, 0), ad::max_reduce(fy.features, 0)}, 1);
  const Value raw = mlp2(pooled, model.params, "reg.l1", "reg.l2", model.config.leaky_slope);
  // Bias the quaternion towards identity so an untrained head starts there.
  return ad::add(raw, Value::matrix(1, 7, {1, 0, 0, 0, 0, 0, 0}));
}

geometry::RigidTransform pose_from_regression(std::span<const double> out) {
  if (out.size() != 7) throw ContractViolation("pose_from_regression: expected 7 values");
  Eigen::Quaterniond q(out[0], out[1], out[2], out[3]);
  geometry::RigidTransform t;
  if (q.norm() < 1e-12) return t;
  q.normalize();
  t.rotation = q.toRotationMatrix();
  t.translation = Eigen::Vector3d(out[4], out[5], out[6]);
  return t;
}

}  // namespace cmig::network
