#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "cmig/data/protocol.hpp"
#include "cmig/harness/config.hpp"
#include "cmig/harness/pipeline.hpp"
#include "cmig/losses.hpp"
#include "cmig/network/model.hpp"

namespace cmig::harness {

using Dataset = std::vector<data::RegistrationSample>;

/// Base clouds named by the data section (gaussian_blobs with distinct seeds
/// when no kinds are listed).
std::vector<geometry::PointCloud> training_shapes(const RunConfig& cfg);

/// One sample per training shape. `epoch` only matters when
/// train.resample_each_epoch is set.
Dataset make_training_set(const RunConfig& cfg, std::size_t epoch = 0);

/// eval_samples fresh transforms of the training shapes, cycling through
/// them in order.
Dataset make_eval_set(const RunConfig& cfg);

/// Freshly initialised parameters for `cfg` (seeded from cfg.seed).
network::Model initial_model(const RunConfig& cfg);

struct LossRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double ocl = 0.0;
  double cmcl = 0.0;
  double mp = 0.0;
  double ms = 0.0;  // summed over iterations
  double cs = 0.0;  // summed over iterations
  double pose = 0.0;  // regression variant only
  double total = 0.0;
};

struct BatchLoss {
  ad::Value total;  // what backward() is run on
  LossRow values;   // batch means of each component
};

/// Per-sample components of the objective for one forward pass. Components
/// disabled by the toggles stay undefined.
struct SampleLoss {
  ad::Value ocl;
  ad::Value mp;
  std::vector<ad::Value> ms;
  std::vector<ad::Value> cs;
  ad::Value pose;
};

SampleLoss sample_loss(const PipelineResult& forward, const data::RegistrationSample& sample, const RunConfig& cfg);

/// Forward every sample, then average the per-sample terms over the batch
/// and add the cross-modal term computed across it. Throws DomainError
/// naming the component when a value is not finite.
BatchLoss batch_loss(const network::Model& model, std::span<const data::RegistrationSample* const> batch,
                     const RunConfig& cfg);

struct TrainHooks {
  /// Called after each optimiser step with the logged row.
  std::function<void(const LossRow&)> on_step;
  /// Checkpoint destination; empty disables checkpointing.
  std::filesystem::path checkpoint_path;
};

/// Adam over all parameters, lr decayed at the configured epoch
/// milestones. An epoch is one pass over the (shuffled) training set; the
/// last batch of an epoch wraps around so every batch has batch_size rows.
std::vector<LossRow> train(network::Model& model, const RunConfig& cfg, const TrainHooks& hooks = {});

void write_losses_csv(const std::filesystem::path& path, std::span<const LossRow> rows);

}  // namespace cmig::harness
