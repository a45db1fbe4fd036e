#include "cmig/harness/pipeline.hpp"

#include <chrono>
#include <numeric>

#include "cmig/errors.hpp"
#include "cmig/geometry/procrustes.hpp"
#include "cmig/log.hpp"
#include "cmig/projection.hpp"

namespace cmig::harness {

using ad::Value;
using geometry::Points;
using geometry::RigidTransform;
using network::FeatureMap;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Points select_rows(const Points& pts, const std::vector<std::size_t>& idx) {
  Points out(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = pts.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Selection switched off: every point is a keypoint.
network::MaskPrediction select_all(const FeatureMap& self, const Value& coords) {
  network::MaskPrediction out;
  const std::size_t n = self.rows();
  out.mask.k = n;
  out.mask.mask.assign(n, true);
  out.mask.selected_indices.resize(n);
  std::iota(out.mask.selected_indices.begin(), out.mask.selected_indices.end(), 0);
  out.selected_coords = coords;
  out.selected_features = self.features;
  return out;
}

}  // namespace

PipelineOptions pipeline_options(const RunConfig& cfg) {
  PipelineOptions o;
  o.n_iter = cfg.n_iter;
  o.toggles = cfg.toggles;
  o.projection_enabled = cfg.projection.enabled;
  o.render_both = cfg.projection.render_both;
  o.hard_correspondences = cfg.eval.hard_correspondences;
  return o;
}

PipelineResult run_pipeline(const network::Model& model, const geometry::PointCloud& source,
                            const geometry::PointCloud& target, const PipelineOptions& options) {
  if (options.n_iter < 1) throw ContractViolation("register: n_iter must be >= 1");
  if (options.toggles.cmd && !options.projection_enabled)
    throw ContractViolation("register: image features requested with projection disabled");
  source.validate();
  target.validate();
  const auto& mc = model.config;
  const auto t_start = Clock::now();
  PipelineResult r;

  // Image branch. One image feature serves both clouds.
  network::ImageFeatures image;
  if (options.toggles.cmd) {
    const auto t0 = Clock::now();
    auto views = projection::render_views(target, mc.views, mc.resolution);
    if (options.render_both) views = projection::merge(views, projection::render_views(source, mc.views, mc.resolution));
    r.times.render_ms = ms_since(t0);
    image = network::image_encoder(views, 1, model);
    r.image_vector = image.aggregated;
  }

  const auto t_feat = Clock::now();
  r.point_x = network::edgeconv_backbone(source.points, model);
  r.point_y = network::edgeconv_backbone(target.points, model);
  const std::size_t c = r.point_x.width();
  auto image_rows = [&](std::size_t n) -> FeatureMap {
    if (options.toggles.cmd) return {ad::broadcast_to(image.aggregated, n, c), network::FeatureRole::kImage};
    return {Value::zeros(n, c), network::FeatureRole::kImage};
  };

  if (options.toggles.tf) {
    const auto inter = network::transformer_interact(r.point_x, r.point_y, model);
    r.hybrid_x = network::transformer_fuse(inter.source, image_rows(source.size()), model);
    r.hybrid_y = network::transformer_fuse(inter.target, image_rows(target.size()), model);
  } else {
    r.hybrid_x = {r.point_x.features, network::FeatureRole::kHybrid};
    r.hybrid_y = {r.point_y.features, network::FeatureRole::kHybrid};
  }

  if (mc.variant == network::MatchVariant::kDirectRegression) {
    r.regression = network::pose_regression(r.hybrid_x, r.hybrid_y, model);
    r.transform = network::pose_from_regression(r.regression.data());
    r.times.features_ms = ms_since(t_feat);
    r.times.total_ms = ms_since(t_start);
    return r;
  }

  const Value cx = network::coords_value(source.points);
  const Value cy = network::coords_value(target.points);
  if (options.toggles.mp) {
    r.mask_x = network::mask_predict(r.hybrid_x, r.hybrid_y, cx, mc.keypoints_for(source.size()), model);
    r.mask_y = network::mask_predict(r.hybrid_y, r.hybrid_x, cy, mc.keypoints_for(target.size()), model);
  } else {
    r.mask_x = select_all(r.hybrid_x, cx);
    r.mask_y = select_all(r.hybrid_y, cy);
  }
  r.keypoints_x = select_rows(source.points, r.mask_x.mask.selected_indices);
  r.keypoints_y = select_rows(target.points, r.mask_y.mask.selected_indices);
  const Value& fx = r.mask_x.selected_features;
  const Value& fy = r.mask_y.selected_features;
  const Value py = network::coords_value(r.keypoints_y);
  Value cached;
  if (mc.variant == network::MatchVariant::kSeparate && !options.match_override)
    cached = network::feature_logits(fx, fy, model);
  r.times.features_ms = ms_since(t_feat);

  RigidTransform acc;
  for (std::size_t n = 0; n < options.n_iter; ++n) {
    const auto t0 = Clock::now();
    const Points moved = acc.apply(r.keypoints_x);
    IterationRecord it;
    if (options.match_override) {
      it.matrix = options.match_override(n, moved, r.keypoints_y);
      if (it.matrix.rows() != static_cast<std::size_t>(moved.rows()) ||
          it.matrix.cols() != static_cast<std::size_t>(r.keypoints_y.rows()))
        throw ContractViolation("register: override matrix has the wrong shape");
      it.scores = Value::full(it.matrix.rows(), 1, 1.0);
    } else {
      auto m = network::correspondence_search(network::coords_value(moved), py, fx, fy, model, cached);
      it.matrix = m.matrix;
      it.scores = m.scores;
    }
    it.weights = network::correspondence_weights(it.scores.data());
    const Points corr = options.hard_correspondences ? network::hard_correspondences(it.matrix, r.keypoints_y)
                                                     : network::points_from(network::soft_correspondences(it.matrix, py));
    try {
      it.step = geometry::weighted_svd(moved, corr, it.weights);
    } catch (const DegenerateError& e) {
      log_warning(std::string("register: stopping after degenerate SVD at iteration ") + std::to_string(n + 1) +
                  ": " + e.what());
      r.degenerate = true;
      break;
    }
    acc = geometry::compose(it.step, acc);
    it.accumulated = acc;
    it.elapsed_ms = ms_since(t0);
    r.times.iteration_ms.push_back(it.elapsed_ms);
    r.iterations.push_back(std::move(it));
  }
  r.transform = acc;
  r.times.total_ms = ms_since(t_start);
  return r;
}

}  // namespace cmig::harness
