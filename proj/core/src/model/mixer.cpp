#include "ecechain/model/mixer.hpp"

#include "ecechain/errors.hpp"
#include "ecechain/nn/ops.hpp"

namespace ecechain::model {

template <typename T>
MixerUnitParams<T> register_mixer_unit(nn::ParameterGroup<T>& params, const std::string& prefix,
                                       std::size_t rows, std::size_t dim, std::size_t hidden) {
  auto vector = [&](const std::string& name, T fill) {
    return params.add(prefix + name, Tensor<T>::full({dim}, fill), false);
  };
  MixerUnitParams<T> u;
  u.ln1_gain = vector("ln1.gain", T(1));
  u.ln1_bias = vector("ln1.bias", T(0));
  u.channel_w1 = params.add(prefix + "channel.w1", Tensor<T>::zeros({hidden, rows}));
  u.channel_w2 = params.add(prefix + "channel.w2", Tensor<T>::zeros({rows, hidden}));
  u.ln2_gain = vector("ln2.gain", T(1));
  u.ln2_bias = vector("ln2.bias", T(0));
  u.patch_w3 = params.add(prefix + "patch.w3", Tensor<T>::zeros({hidden, dim}));
  u.patch_w4 = params.add(prefix + "patch.w4", Tensor<T>::zeros({dim, hidden}));
  return u;
}

template <typename T>
Tensor<T> channel_mix(const Tensor<T>& x, const MixerUnitParams<T>& p, T eps) {
  if (x.rank() != 3 || x.dim(1) != p.channel_w1.dim(1)) {
    throw DimensionError("channel_mix: context " + nn::to_string(x.shape()) + " does not match channel weights " +
                         nn::to_string(p.channel_w1.shape()));
  }
  // Columns become rows of the transposed matrix; map them and transpose back.
  auto columns = nn::transpose(nn::layer_norm(x, p.ln1_gain, p.ln1_bias, eps));
  auto mixed = nn::linear(nn::gelu(nn::linear(columns, p.channel_w1)), p.channel_w2);
  return nn::add(x, nn::transpose(mixed));
}

template <typename T>
Tensor<T> patch_mix(const Tensor<T>& x, const MixerUnitParams<T>& p, T eps) {
  auto normed = nn::layer_norm(x, p.ln2_gain, p.ln2_bias, eps);
  return nn::add(x, nn::linear(nn::gelu(nn::linear(normed, p.patch_w3)), p.patch_w4));
}

template <typename T>
Tensor<T> mixer_unit(const Tensor<T>& x, const MixerUnitParams<T>& p, T eps) {
  return patch_mix(channel_mix(x, p, eps), p, eps);
}

template <typename T>
Tensor<T> unify(const Tensor<T>& x, std::span<const std::uint8_t> keep) {
  return nn::masked_mean_rows(x, keep);
}

#define ECECHAIN_INSTANTIATE_MIXER(T)                                                                    \
  template MixerUnitParams<T> register_mixer_unit(nn::ParameterGroup<T>&, const std::string&, std::size_t, \
                                                  std::size_t, std::size_t);                             \
  template Tensor<T> channel_mix(const Tensor<T>&, const MixerUnitParams<T>&, T);                        \
  template Tensor<T> patch_mix(const Tensor<T>&, const MixerUnitParams<T>&, T);                          \
  template Tensor<T> mixer_unit(const Tensor<T>&, const MixerUnitParams<T>&, T);                         \
  template Tensor<T> unify(const Tensor<T>&, std::span<const std::uint8_t>);

ECECHAIN_INSTANTIATE_MIXER(float)
ECECHAIN_INSTANTIATE_MIXER(double)

#undef ECECHAIN_INSTANTIATE_MIXER

}  // namespace ecechain::model
