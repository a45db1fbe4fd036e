#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cmig/autodiff/value.hpp"
#include "cmig/geometry/types.hpp"
#include "cmig/harness/config.hpp"
#include "cmig/network/blocks.hpp"
#include "cmig/network/model.hpp"

namespace cmig::harness {

/// Test hook: replaces the learned K x M matching matrix at iteration
/// `iteration` given the current (moved) source keypoints and the target
/// keypoints. Scores are then treated as uniform.
using MatchOverride = std::function<ad::Value(std::size_t iteration, const geometry::Points& source_keypoints,
                                              const geometry::Points& target_keypoints)>;

struct PipelineOptions {
  std::size_t n_iter = 3;
  Toggles toggles;
  bool projection_enabled = true;
  bool render_both = false;
  bool hard_correspondences = false;
  MatchOverride match_override;
};

PipelineOptions pipeline_options(const RunConfig& cfg);

struct IterationRecord {
  ad::Value matrix;  // K x M, row-stochastic
  ad::Value scores;  // K x 1
  std::vector<double> weights;
  geometry::RigidTransform step;
  geometry::RigidTransform accumulated;
  double elapsed_ms = 0.0;
};

struct StageTimes {
  double render_ms = 0.0;
  double features_ms = 0.0;  // backbone, image encoder, transformers, masks
  std::vector<double> iteration_ms;
  double total_ms = 0.0;
};

struct PipelineResult {
  geometry::RigidTransform transform;
  /// Set when an SVD step was degenerate; `transform` is the last valid one.
  bool degenerate = false;
  std::vector<IterationRecord> iterations;

  network::FeatureMap point_x, point_y;  // backbone features
  ad::Value image_vector;                // 1 x C; undefined without image features
  network::FeatureMap hybrid_x, hybrid_y;
  network::MaskPrediction mask_x, mask_y;  // scores undefined when selection is off
  geometry::Points keypoints_x, keypoints_y;  // selected, original coordinates
  ad::Value regression;                  // 1 x 7 for the regression variant
  StageTimes times;
};

/// Extracts features once, then alternates correspondence search and
/// weighted SVD `n_iter` times, moving the source keypoints by the
/// accumulated transform before each search.
PipelineResult run_pipeline(const network::Model& model, const geometry::PointCloud& source,
                            const geometry::PointCloud& target, const PipelineOptions& options);

}  // namespace cmig::harness
