#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmig/autodiff/grad_check.hpp"

namespace cmig::harness {

struct GradSuiteEntry {
  std::string name;
  ad::GradCheckReport report;
};

struct GradSuiteResult {
  std::vector<GradSuiteEntry> entries;
  double seconds = 0.0;
  bool passed() const;
};

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  double epsilon = 1e-5;
  /// Random elements probed per input tensor (0 = all).
  std::size_t probes_per_input = 12;
};

/// Finite-difference checks of every loss and network block on random
/// inputs: 32 points per cloud, C = C_t = 16, 16 keypoints, batch of 3.
GradSuiteResult run_gradcheck_suite(const GradSuiteOptions& options = {});

/// name,probed,max_rel_error,max_abs_error,passed
void write_gradcheck_csv(const std::filesystem::path& path, const GradSuiteResult& result);

}  // namespace cmig::harness
