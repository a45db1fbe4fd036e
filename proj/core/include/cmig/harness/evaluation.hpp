#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmig/geometry/metrics.hpp"
#include "cmig/harness/pipeline.hpp"
#include "cmig/harness/training.hpp"

namespace cmig::harness {

struct SampleResult {
  std::size_t index = 0;
  geometry::RigidTransform predicted;
  geometry::RegistrationError error;  // this sample alone
  double rotation_deg = 0.0;          // geodesic angle of R_pred^T R_gt
  bool degenerate = false;
  double total_ms = 0.0;
  double features_ms = 0.0;
  double iterations_ms = 0.0;
};

struct EvalReport {
  std::string method;  // "network" or "icp"
  std::size_t n_iter = 0;
  std::string config_hash;
  std::vector<SampleResult> samples;  // in dataset order
  geometry::RegistrationError aggregate;
  double mean_rotation_deg = 0.0;
  double mean_total_ms = 0.0;
  double mean_features_ms = 0.0;
  double mean_iterations_ms = 0.0;
};

/// Registers every sample with `model`. Work is split across `workers`
/// threads over a read-only model; results are stored by sample index.
EvalReport evaluate(const network::Model& model, std::span<const data::RegistrationSample> samples,
                    const PipelineOptions& options, std::size_t workers = 1,
                    std::size_t timing_repeats = 1);

/// One report per entry of `n_values`, all single-threaded. For each sample
/// and repeat every n runs back to back, so slow drift in machine load hits
/// all n alike; each (sample, n) keeps its fastest run.
std::vector<EvalReport> sweep_iterations(const network::Model& model,
                                         std::span<const data::RegistrationSample> samples,
                                         const PipelineOptions& options, std::span<const std::size_t> n_values,
                                         std::size_t timing_repeats = 1);

/// Same report shape for the point-to-point ICP baseline.
EvalReport evaluate_icp(std::span<const data::RegistrationSample> samples);

/// Aggregate from the per-sample rows (used to fill EvalReport::aggregate).
geometry::RegistrationError aggregate(std::span<const SampleResult> rows);

/// header RMSE_R,MAE_R,RMSE_t,MAE_t and one row. No timing, so identical
/// runs give identical bytes.
void write_metrics_csv(const std::filesystem::path& path, const EvalReport& report);
/// One row per sample.
void write_samples_csv(const std::filesystem::path& path, const EvalReport& report);
/// Stage timings in milliseconds per sample, one row per report.
void write_timing_csv(const std::filesystem::path& path, std::span<const EvalReport> reports);
/// n_iter sweep: one row per report with errors and mean time per sample.
void write_iterations_csv(const std::filesystem::path& path, std::span<const EvalReport> reports);

std::string format_error_row(const geometry::RegistrationError& e);

}  // namespace cmig::harness
