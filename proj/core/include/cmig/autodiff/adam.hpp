#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmig/autodiff/value.hpp"

namespace cmig::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of `param` in place using `grad`.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state,
               const AdamConfig& cfg);

/// Applies adam_step to every parameter that has a gradient. `states` is
/// resized on first use.
void adam_step(std::span<Value> params, std::vector<AdamState>& states, const AdamConfig& cfg);

/// Step-decay schedule: base * factor^(number of milestones <= epoch).
double scheduled_lr(double base, std::size_t epoch, std::span<const std::size_t> milestones,
                    double factor);

}  // namespace cmig::ad
