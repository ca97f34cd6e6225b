#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ecechain/nn/parameters.hpp"
#include "ecechain/train/config.hpp"

namespace ecechain::train {

struct AdamaxOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  DecayMode decay_mode = DecayMode::Decoupled;
};

/// One in-place update of a flat parameter block at step (1-based):
///   g' = g (+ wd * theta when coupled)
///   m = b1 m + (1 - b1) g';  u = max(b2 u, |g'|)
///   theta -= lr m / ((1 - b1^step)(u + eps))  (- lr wd theta when decoupled)
/// apply_decay = false skips weight decay for this block.
template <typename T>
void adamax_update(std::span<T> theta, std::span<const T> grad, std::span<T> first_moment, std::span<T> inf_norm,
                   std::uint64_t step, double lr, const AdamaxOptions& options, bool apply_decay);

/// Adamax over a parameter group; decay follows each entry's decay flag.
template <typename T>
class Adamax {
 public:
  Adamax(nn::ParameterGroup<T>& params, AdamaxOptions options);

  /// Applies one update using the current gradients.
  void step(double lr);

  std::uint64_t step_count() const { return step_; }
  const AdamaxOptions& options() const { return options_; }
  std::span<const std::vector<T>> first_moments() const { return m_; }
  std::span<const std::vector<T>> inf_norms() const { return u_; }

  /// Replaces the state; shapes must match the parameter group.
  void load_state(std::uint64_t step, std::vector<std::vector<T>> first_moments,
                  std::vector<std::vector<T>> inf_norms);

 private:
  nn::ParameterGroup<T>* params_;
  AdamaxOptions options_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> u_;
};

extern template class Adamax<float>;
extern template class Adamax<double>;

}  // namespace ecechain::train
