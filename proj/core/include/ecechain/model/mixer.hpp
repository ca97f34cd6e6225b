#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "ecechain/nn/parameters.hpp"
#include "ecechain/nn/tensor.hpp"

// Context mixing over a batch of context matrices [B, R, d], R = 1 + k.
// The channel MLP maps each column (length R) with shared weights; the
// patch MLP maps each row (length d) with shared weights.
namespace ecechain::model {

using nn::Tensor;

template <typename T>
struct MixerUnitParams {
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> channel_w1;  // [hidden, R]
  Tensor<T> channel_w2;  // [R, hidden]
  Tensor<T> ln2_gain, ln2_bias;
  Tensor<T> patch_w3;  // [hidden, d]
  Tensor<T> patch_w4;  // [d, hidden]
};

template <typename T>
MixerUnitParams<T> register_mixer_unit(nn::ParameterGroup<T>& params, const std::string& prefix,
                                       std::size_t rows, std::size_t dim, std::size_t hidden);

/// x + (W2 GELU(W1 Norm(x)_{*,i}))_i for every column i.
template <typename T>
Tensor<T> channel_mix(const Tensor<T>& x, const MixerUnitParams<T>& p, T eps);

/// x + (W4 GELU(W3 Norm(x)_{j,*}))_j for every row j.
template <typename T>
Tensor<T> patch_mix(const Tensor<T>& x, const MixerUnitParams<T>& p, T eps);

template <typename T>
Tensor<T> mixer_unit(const Tensor<T>& x, const MixerUnitParams<T>& p, T eps);

/// Column mean over the kept (non-padding) rows: [B, R, d] -> [B, d].
template <typename T>
Tensor<T> unify(const Tensor<T>& x, std::span<const std::uint8_t> keep);

}  // namespace ecechain::model
