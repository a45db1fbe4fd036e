#include "cmig/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "cmig/errors.hpp"

namespace cmig::ad {

namespace {

double evaluate(const std::function<Value()>& f) {
  const Value out = f();
  if (out.size() != 1) throw ContractViolation("grad_check: f must return a scalar");
  return out.item();
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const std::function<Value()>& f, std::span<Value> inputs,
                           const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ContractViolation("grad_check: epsilon must be positive");

  for (auto& in : inputs) in.zero_grad();
  const Value root = f();
  if (root.size() != 1) throw ContractViolation("grad_check: f must return a scalar");
  const double base = root.item();
  const double again = evaluate(f);
  if (std::memcmp(&base, &again, sizeof(double)) != 0)
    throw ContractViolation("grad_check: f is not deterministic (repeated evaluation differs)");
  backward(root);

  GradCheckReport report;
  if (options.keep_table) report.per_element_table.emplace();
  std::mt19937_64 rng(options.probe_seed);

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Value& in = inputs[k];
    std::vector<double> analytic(in.size(), 0.0);
    if (in.has_grad()) std::copy(in.grad().begin(), in.grad().end(), analytic.begin());
    auto data = in.mutable_data();
    for (std::size_t i : probe_indices(in.size(), options.max_probes_per_input, rng)) {
      const double x0 = data[i];
      data[i] = x0 + options.epsilon;
      const double fp = evaluate(f);
      data[i] = x0 - options.epsilon;
      const double fm = evaluate(f);
      data[i] = x0;
      const double numeric = (fp - fm) / (2.0 * options.epsilon);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      report.max_rel_error = std::max(report.max_rel_error, abs_err / denom);
      ++report.probed;
      if (report.per_element_table) report.per_element_table->push_back({k, i, analytic[i], numeric});
    }
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace cmig::ad
