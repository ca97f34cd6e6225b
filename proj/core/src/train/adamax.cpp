#include "ecechain/train/adamax.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ecechain/errors.hpp"

namespace ecechain::train {

template <typename T>
void adamax_update(std::span<T> theta, std::span<const T> grad, std::span<T> first_moment, std::span<T> inf_norm,
                   std::uint64_t step, double lr, const AdamaxOptions& options, bool apply_decay) {
  const std::size_t n = theta.size();
  if (grad.size() != n || first_moment.size() != n || inf_norm.size() != n) {
    throw DimensionError("adamax: state size does not match parameter size");
  }
  if (step == 0) throw ContractError("adamax: step counter starts at 1");
  const double wd = apply_decay ? options.weight_decay : 0.0;
  const bool coupled = options.decay_mode == DecayMode::Coupled;
  const double correction = 1.0 - std::pow(options.beta1, double(step));
  for (std::size_t i = 0; i < n; ++i) {
    const double p = theta[i];
    double g = grad[i];
    if (coupled) g += wd * p;
    const double m = options.beta1 * double(first_moment[i]) + (1.0 - options.beta1) * g;
    const double u = std::max(options.beta2 * double(inf_norm[i]), std::abs(g));
    double next = p - lr * m / (correction * (u + options.eps));
    if (!coupled) next -= lr * wd * p;
    first_moment[i] = T(m);
    inf_norm[i] = T(u);
    theta[i] = T(next);
  }
}

template void adamax_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                   std::uint64_t, double, const AdamaxOptions&, bool);
template void adamax_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                    std::span<double>, std::uint64_t, double, const AdamaxOptions&, bool);

template <typename T>
Adamax<T>::Adamax(nn::ParameterGroup<T>& params, AdamaxOptions options) : params_(&params), options_(options) {
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.tensor.numel(), T(0));
    u_.emplace_back(e.tensor.numel(), T(0));
  }
}

template <typename T>
void Adamax<T>::step(double lr) {
  ++step_;
  auto entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& tensor = entries[i].tensor;
    std::vector<T> zeros;
    std::span<const T> grad = tensor.grad();
    if (!tensor.has_grad()) {
      zeros.assign(tensor.numel(), T(0));
      grad = zeros;
    }
    adamax_update<T>(tensor.mutable_values(), grad, m_[i], u_[i], step_, lr, options_, entries[i].decay);
  }
}

template <typename T>
void Adamax<T>::load_state(std::uint64_t step, std::vector<std::vector<T>> first_moments,
                           std::vector<std::vector<T>> inf_norms) {
  const auto entries = params_->entries();
  if (first_moments.size() != entries.size() || inf_norms.size() != entries.size()) {
    throw DimensionError("adamax: state has " + std::to_string(first_moments.size()) + " blocks, expected " +
                         std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (first_moments[i].size() != entries[i].tensor.numel() || inf_norms[i].size() != entries[i].tensor.numel()) {
      throw DimensionError("adamax: state block for " + entries[i].name + " has the wrong size");
    }
  }
  step_ = step;
  m_ = std::move(first_moments);
  u_ = std::move(inf_norms);
}

template class Adamax<float>;
template class Adamax<double>;

}  // namespace ecechain::train
