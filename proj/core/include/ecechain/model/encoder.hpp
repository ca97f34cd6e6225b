#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ecechain/nn/parameters.hpp"
#include "ecechain/nn/tensor.hpp"

// Branch encoder: each branch is the 4-token sequence [CLS, entity,
// predicate, time], embedded as semantic + positional rows and passed
// through post-norm Transformer units. Inputs are stacked as [G*4, d] for
// G branches; branches never attend to each other.
namespace ecechain::model {

using nn::Tensor;

inline constexpr std::size_t kBranchTokens = 4;

template <typename T>
struct AttentionParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t heads = 1;
};

template <typename T>
struct EncoderUnitParams {
  AttentionParams<T> attention;
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor<T> ln2_gain, ln2_bias;
};

/// Registers a zero-initialised unit under prefix (e.g. "encoder.0.").
template <typename T>
EncoderUnitParams<T> register_encoder_unit(nn::ParameterGroup<T>& params, const std::string& prefix,
                                           std::size_t dim, std::size_t heads, std::size_t ff_hidden);

/// Rows E[token] + P[position] for every token of every branch.
/// tokens.size() must be a multiple of 4.
template <typename T>
Tensor<T> embed_branches(std::span<const std::size_t> tokens, const Tensor<T>& semantic,
                         const Tensor<T>& position);

/// Per-head attention probabilities, shape [G*H, 4, 4]. mask (4x4,
/// additive, -inf to exclude) is optional.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t groups,
                            const std::vector<T>& mask = {});

/// Head outputs merged back to [G*4, d], before the output projection.
template <typename T>
Tensor<T> attention_context(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t groups,
                            const std::vector<T>& mask = {});

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t groups,
                               const std::vector<T>& mask = {});

/// y = LN(FF(a) + a), a = LN(MHA(x) + x).
template <typename T>
Tensor<T> encoder_unit(const Tensor<T>& x, const EncoderUnitParams<T>& p, std::size_t groups, T eps);

/// Applies the units in order and returns the CLS-position rows, [G, d].
template <typename T>
Tensor<T> encode_branches(const Tensor<T>& x, std::span<const EncoderUnitParams<T>> units, std::size_t groups,
                          T eps);

}  // namespace ecechain::model
