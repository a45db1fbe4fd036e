#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmig/harness/config.hpp"
#include "cmig/harness/evaluation.hpp"

namespace cmig::harness {

/// Axes of an ablation grid; an empty axis keeps the base config's value.
/// Toggle presets: "all", "none", "no_<c>" or components joined by '+'
/// ("tf+mp"), with c in {tf, cmd, mcl, mp}.
struct AblationAxes {
  std::vector<std::size_t> n_iter;
  std::vector<std::string> toggles;
  std::vector<std::string> variant;
  std::vector<std::uint64_t> seed;
};

Toggles parse_toggles(const std::string& preset);
std::string toggles_label(const Toggles& t);

/// {"n_iter": [...], "toggles": [...], "variant": [...], "seed": [...]}.
AblationAxes parse_axes(const std::string& json);
AblationAxes load_axes(const std::filesystem::path& path);

struct AblationRow {
  RunConfig config;
  EvalReport report;
  double final_loss = 0.0;
};

/// Every combination, seed outermost. Each one trains a fresh model for
/// train.steps (skipped when 0) and evaluates it on the eval set derived
/// from its seed, so rows that share a seed see identical samples.
std::vector<AblationRow> ablate(const RunConfig& base, const AblationAxes& axes,
                                const std::function<void(const AblationRow&)>& on_row = {});

/// seed,n_iter,toggles,TF,CMD,MCL,MP,variant,RMSE_R,MAE_R,RMSE_t,MAE_t,mean_rotation_deg,final_loss
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

}  // namespace cmig::harness
