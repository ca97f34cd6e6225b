#include "ecechain/model/encoder.hpp"

#include <cmath>

#include "ecechain/errors.hpp"
#include "ecechain/nn/ops.hpp"

namespace ecechain::model {

template <typename T>
EncoderUnitParams<T> register_encoder_unit(nn::ParameterGroup<T>& params, const std::string& prefix,
                                           std::size_t dim, std::size_t heads, std::size_t ff_hidden) {
  auto matrix = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    return params.add(prefix + name, Tensor<T>::zeros({rows, cols}));
  };
  auto vector = [&](const std::string& name, std::size_t n, T fill) {
    return params.add(prefix + name, Tensor<T>::full({n}, fill), false);
  };
  EncoderUnitParams<T> u;
  u.attention.heads = heads;
  u.attention.wq = matrix("attn.wq", dim, dim);
  u.attention.bq = vector("attn.bq", dim, T(0));
  u.attention.wk = matrix("attn.wk", dim, dim);
  u.attention.bk = vector("attn.bk", dim, T(0));
  u.attention.wv = matrix("attn.wv", dim, dim);
  u.attention.bv = vector("attn.bv", dim, T(0));
  u.attention.wo = matrix("attn.wo", dim, dim);
  u.attention.bo = vector("attn.bo", dim, T(0));
  u.ln1_gain = vector("ln1.gain", dim, T(1));
  u.ln1_bias = vector("ln1.bias", dim, T(0));
  u.ff_w1 = matrix("ff.w1", ff_hidden, dim);
  u.ff_b1 = vector("ff.b1", ff_hidden, T(0));
  u.ff_w2 = matrix("ff.w2", dim, ff_hidden);
  u.ff_b2 = vector("ff.b2", dim, T(0));
  u.ln2_gain = vector("ln2.gain", dim, T(1));
  u.ln2_bias = vector("ln2.bias", dim, T(0));
  return u;
}

template <typename T>
Tensor<T> embed_branches(std::span<const std::size_t> tokens, const Tensor<T>& semantic,
                         const Tensor<T>& position) {
  if (tokens.size() % kBranchTokens != 0) {
    throw DimensionError("embed_branches: token count " + std::to_string(tokens.size()) +
                         " is not a multiple of 4");
  }
  if (position.rank() != 2 || position.dim(0) != kBranchTokens) {
    throw DimensionError("embed_branches: position table must have exactly 4 rows, got " +
                         nn::to_string(position.shape()));
  }
  const std::size_t groups = tokens.size() / kBranchTokens, dim = semantic.dim(1);
  auto rows = nn::embedding_lookup(semantic, tokens);
  auto with_position = nn::add(nn::reshape(rows, {groups, kBranchTokens, dim}), position);
  return nn::reshape(with_position, {groups * kBranchTokens, dim});
}

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t groups,
                            const std::vector<T>& mask) {
  const std::size_t dim = x.dim(1), head_dim = dim / p.heads;
  auto q = nn::split_heads(nn::linear(x, p.wq, p.bq), groups, kBranchTokens, p.heads);
  auto k = nn::split_heads(nn::linear(x, p.wk, p.bk), groups, kBranchTokens, p.heads);
  auto scores = nn::scale(nn::batched_matmul(q, k, true), T(1) / std::sqrt(T(head_dim)));
  return mask.empty() ? nn::softmax(scores) : nn::softmax(scores, mask);
}

template <typename T>
Tensor<T> attention_context(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t groups,
                            const std::vector<T>& mask) {
  auto weights = attention_weights(x, p, groups, mask);
  auto v = nn::split_heads(nn::linear(x, p.wv, p.bv), groups, kBranchTokens, p.heads);
  return nn::merge_heads(nn::batched_matmul(weights, v), groups, p.heads);
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t groups,
                               const std::vector<T>& mask) {
  return nn::linear(attention_context(x, p, groups, mask), p.wo, p.bo);
}

template <typename T>
Tensor<T> encoder_unit(const Tensor<T>& x, const EncoderUnitParams<T>& p, std::size_t groups, T eps) {
  auto attended = nn::layer_norm(nn::add(multi_head_attention(x, p.attention, groups), x), p.ln1_gain,
                                 p.ln1_bias, eps);
  auto ff = nn::linear(nn::gelu(nn::linear(attended, p.ff_w1, p.ff_b1)), p.ff_w2, p.ff_b2);
  return nn::layer_norm(nn::add(ff, attended), p.ln2_gain, p.ln2_bias, eps);
}

template <typename T>
Tensor<T> encode_branches(const Tensor<T>& x, std::span<const EncoderUnitParams<T>> units, std::size_t groups,
                          T eps) {
  if (units.empty()) throw ContractError("encode_branches: at least one unit is required");
  Tensor<T> h = x;
  for (const auto& unit : units) h = encoder_unit(h, unit, groups, eps);
  std::vector<std::size_t> cls_rows(groups);
  for (std::size_t g = 0; g < groups; ++g) cls_rows[g] = g * kBranchTokens;
  return nn::embedding_lookup(h, std::span<const std::size_t>(cls_rows));
}

#define ECECHAIN_INSTANTIATE_ENCODER(T)                                                                  \
  template EncoderUnitParams<T> register_encoder_unit(nn::ParameterGroup<T>&, const std::string&,        \
                                                      std::size_t, std::size_t, std::size_t);            \
  template Tensor<T> embed_branches(std::span<const std::size_t>, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> attention_weights(const Tensor<T>&, const AttentionParams<T>&, std::size_t,         \
                                       const std::vector<T>&);                                           \
  template Tensor<T> attention_context(const Tensor<T>&, const AttentionParams<T>&, std::size_t,         \
                                       const std::vector<T>&);                                           \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const AttentionParams<T>&, std::size_t,      \
                                          const std::vector<T>&);                                        \
  template Tensor<T> encoder_unit(const Tensor<T>&, const EncoderUnitParams<T>&, std::size_t, T);        \
  template Tensor<T> encode_branches(const Tensor<T>&, std::span<const EncoderUnitParams<T>>, std::size_t, T);

ECECHAIN_INSTANTIATE_ENCODER(float)
ECECHAIN_INSTANTIATE_ENCODER(double)

#undef ECECHAIN_INSTANTIATE_ENCODER

}  // namespace ecechain::model
