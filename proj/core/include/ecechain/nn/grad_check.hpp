#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ecechain/nn/parameters.hpp"
#include "ecechain/nn/tensor.hpp"

namespace ecechain::nn {

struct GradCheckOptions {
  double delta = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor),
  // so coordinates with vanishing gradient are judged on absolute error.
  double magnitude_floor = 1e-6;
  // 0 checks every coordinate; otherwise a seeded sample per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  bool passed = false;

  std::string summary() const;
};

struct NamedTensor {
  std::string name;
  Tensor<double> tensor;
};

/// Compares reverse-mode gradients of loss() against central differences.
/// loss must rebuild its graph from the current tensor values on each call.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss,
                           std::vector<NamedTensor> inputs, const GradCheckOptions& options = {});

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss, ParameterGroup<double>& params,
                           const GradCheckOptions& options = {});

}  // namespace ecechain::nn
