#pragma once

#include <cstddef>

namespace ecechain::train {

/// Number of warm-up steps: ceil(warmup_fraction * total_steps).
std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction);

/// Linear 0 -> base_lr over the warm-up steps, then linear base_lr -> 0 over
/// the rest. Throws ContractError unless step < total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction);

}  // namespace ecechain::train
