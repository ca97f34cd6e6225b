#include "ecechain/train/schedule.hpp"

#include <cmath>
#include <string>

#include "ecechain/errors.hpp"

namespace ecechain::train {

std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction) {
  return static_cast<std::size_t>(std::ceil(warmup_fraction * double(total_steps)));
}

double lr_schedule(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction) {
  if (step >= total_steps) {
    throw ContractError("schedule step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + ")");
  }
  const std::size_t warmup = warmup_steps(total_steps, warmup_fraction);
  if (step < warmup) return base_lr * double(step) / double(warmup);
  const std::size_t decay = total_steps - warmup;
  return base_lr * double(total_steps - step) / double(decay);
}

}  // namespace ecechain::train
