#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cmig/autodiff/value.hpp"

namespace cmig::ad {

struct GradCheckEntry {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t probed = 0;
  bool passed = true;
  std::optional<std::vector<GradCheckEntry>> per_element_table;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-3;
  /// 0 probes every element; otherwise a seeded random subset per input.
  std::size_t max_probes_per_input = 0;
  std::uint64_t probe_seed = 0;
  bool keep_table = false;
};

/// Compares the reverse-mode gradient of a scalar function against central
/// differences. `f` must rebuild its graph from `inputs` on every call; the
/// inputs are perturbed in place and restored afterwards.
///
/// Relative error per element is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const std::function<Value()>& f, std::span<Value> inputs,
                           const GradCheckOptions& options = {});

}  // namespace cmig::ad
