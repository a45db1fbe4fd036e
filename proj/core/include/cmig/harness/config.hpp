#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmig/data/protocol.hpp"
#include "cmig/losses.hpp"
#include "cmig/network/model.hpp"

namespace cmig::harness {

/// Component switches for ablations. tf: both transformer layers; cmd:
/// image features; mcl: the two contrastive losses; mp: keypoint selection.
struct Toggles {
  bool tf = true;
  bool cmd = true;
  bool mcl = true;
  bool mp = true;

  bool operator==(const Toggles&) const = default;
};

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::size_t> milestones = {50, 75};  // epochs
  double factor = 0.5;
};

struct TrainConfig {
  std::size_t steps = 200;
  std::size_t batch_size = 4;
  std::size_t checkpoint_every = 50;  // steps; 0 only writes the final one
  /// Draw fresh transforms for the training shapes every epoch instead of
  /// reusing one fixed sample per shape.
  bool resample_each_epoch = false;
};

struct DataConfig {
  std::vector<std::string> shapes;  // empty: gaussian_blobs with shape_count seeds
  std::size_t shape_count = 8;
  std::size_t n_points = 128;
  std::string train_regime = "noisy";
  std::string eval_regime = "noisy";
  std::size_t eval_samples = 64;
  data::ProtocolConfig protocol;
};

struct ProjectionConfig {
  bool enabled = true;
  /// Render both clouds and pool all views into one image feature.
  bool render_both = false;
};

struct EvalConfig {
  bool icp = true;
  std::size_t workers = 1;
  /// Extra n_iter values reported in iterations.csv; empty skips the sweep.
  std::vector<std::size_t> iteration_sweep;
  bool hard_correspondences = false;
  /// Each sample runs this many times; the fastest wall time is reported.
  std::size_t timing_repeats = 1;
};

struct RunConfig {
  network::ModelConfig model;
  std::size_t n_iter = 3;
  losses::LossConfig loss;
  OptimizerConfig optimizer;
  TrainConfig train;
  DataConfig data;
  ProjectionConfig projection;
  EvalConfig eval;
  Toggles toggles;
  std::uint64_t seed = 0;

  /// Throws ContractViolation on out-of-range values or invalid toggle
  /// combinations (image features without projection).
  void validate() const;
};

/// Full JSON, every field materialised.
std::string to_json(const RunConfig& cfg);
/// Missing fields keep their defaults; unknown keys are rejected
/// (ContractViolation); malformed JSON is a ParseError.
RunConfig from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

/// FNV-1a of the resolved JSON, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace cmig::harness
