#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ecechain/nn/tensor.hpp"

// Differentiable primitives. Every result is checked for finiteness and
// raises NumericError naming the producing operation otherwise.
namespace ecechain::nn {

/// [m,k] x [k,n] -> [m,n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Batched product over the leading axis: [b,m,k] x [b,k,n] -> [b,m,n].
/// With transpose_b the right operand is read as [b,n,k].
template <typename T>
Tensor<T> batched_matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

/// x W^T (+ bias) over the last axis: [..., in] with W [out, in] -> [..., out].
/// Pass an undefined tensor for no bias.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias = {});

/// Elementwise sum. b may also have a shape equal to a trailing suffix of
/// a's shape, in which case it is broadcast over the leading axes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// Swaps the last two axes (rank 2 or 3).
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Gathers rows of a [V,d] table: result [ids.size(), d]. Gradients
/// scatter-add back into the table.
template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const std::size_t> ids);

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b);

/// Rows [begin, end) of a rank-2 tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);

/// [m,d] -> [d].
template <typename T>
Tensor<T> mean_over_rows(const Tensor<T>& x);

/// [B,R,d] -> [B,d], averaging only rows whose keep flag (index b*R+r) is set.
template <typename T>
Tensor<T> masked_mean_rows(const Tensor<T>& x, std::span<const std::uint8_t> keep);

/// Row-wise softmax over the last axis, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

/// softmax(x + mask) where mask has the shape of x's last two axes and is
/// broadcast over leading axes; -inf entries exclude a position.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, const std::vector<T>& mask);

/// Per-row standardisation over the last axis followed by gain/bias,
/// with eps added to the variance inside the square root.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

/// Exact x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// -log softmax(logits)[target] for a single logit vector.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t target);

/// sum_i weight_i * CE(logits_i, target_i) over the rows of [B,C] logits.
/// Rows with zero weight contribute nothing and receive zero gradient.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets,
                        std::span<const T> weights);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// [G*S, H*w] -> [G*H, S, w]: rows of a sequence batch into per-head blocks.
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t groups, std::size_t seq, std::size_t heads);

/// Inverse of split_heads.
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t groups, std::size_t heads);

/// Scalar helpers shared by ops and their oracles.
double standard_normal_cdf(double x);
double gelu_scalar(double x);

}  // namespace ecechain::nn
