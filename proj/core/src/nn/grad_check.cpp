#include "ecechain/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ecechain/util/rng.hpp"

namespace ecechain::nn {

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  out << (passed ? "passed" : "FAILED") << " max_rel_err=" << max_relative_error;
  for (const auto& e : entries) {
    out << "\n  " << e.name << ": coords=" << e.coords_checked << " max_rel_err=" << e.max_relative_error;
    if (e.max_relative_error > 0) {
      out << " (index " << e.worst_index << ": analytic " << e.analytic_at_worst << " numeric "
          << e.numeric_at_worst << ')';
    }
  }
  return out.str();
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss, std::vector<NamedTensor> inputs,
                           const GradCheckOptions& options) {
  for (auto& in : inputs) {
    in.tensor.set_requires_grad(true);
    in.tensor.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& in : inputs) analytic.emplace_back(in.tensor.grad().begin(), in.tensor.grad().end());

  NoGradGuard no_grad;
  GradCheckReport report;
  Rng rng = derive_rng(options.seed);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& tensor = inputs[t].tensor;
    std::vector<std::size_t> coords(tensor.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor != 0 && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    GradCheckEntry entry{inputs[t].name};
    auto values = tensor.mutable_values();
    for (const auto i : coords) {
      const double original = values[i];
      values[i] = original + options.delta;
      const double up = loss().item();
      values[i] = original - options.delta;
      const double down = loss().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * options.delta);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > entry.max_relative_error) {
        entry.max_relative_error = rel;
        entry.worst_index = i;
        entry.analytic_at_worst = a;
        entry.numeric_at_worst = numeric;
      }
      ++entry.coords_checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss, ParameterGroup<double>& params,
                           const GradCheckOptions& options) {
  std::vector<NamedTensor> inputs;
  for (auto& e : params.entries()) inputs.push_back({e.name, e.tensor});
  return grad_check(loss, std::move(inputs), options);
}

}  // namespace ecechain::nn
