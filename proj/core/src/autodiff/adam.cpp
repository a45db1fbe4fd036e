#include "cmig/autodiff/adam.hpp"

#include <cmath>
#include <string>

#include "cmig/errors.hpp"

namespace cmig::ad {

void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state,
               const AdamConfig& cfg) {
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  if (grad.size() != param.size() || state.m.size() != param.size() || state.v.size() != param.size())
    throw ContractViolation("adam_step: shape mismatch (param " + std::to_string(param.size()) + ", grad " +
                            std::to_string(grad.size()) + ", moments " + std::to_string(state.m.size()) + ")");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void adam_step(std::span<Value> params, std::vector<AdamState>& states, const AdamConfig& cfg) {
  if (states.empty()) states.resize(params.size());
  if (states.size() != params.size()) throw ContractViolation("adam_step: state count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Value& p = params[k];
    if (!p.has_grad()) {
      std::vector<double> zero(p.size(), 0.0);
      adam_step(p.mutable_data(), zero, states[k], cfg);
    } else {
      adam_step(p.mutable_data(), p.grad(), states[k], cfg);
    }
  }
}

double scheduled_lr(double base, std::size_t epoch, std::span<const std::size_t> milestones, double factor) {
  double lr = base;
  for (auto m : milestones)
    if (epoch >= m) lr *= factor;
  return lr;
}

}  // namespace cmig::ad
