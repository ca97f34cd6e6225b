#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ecechain/graph/ece.hpp"
#include "ecechain/model/config.hpp"
#include "ecechain/model/encoder.hpp"
#include "ecechain/model/heads.hpp"
#include "ecechain/model/mixer.hpp"
#include "ecechain/nn/parameters.hpp"

namespace ecechain::model {

/// Full model: shared embeddings, branch encoder, context mixer and the
/// tied entity/time scoring heads.
///
/// Parameter tensors are handles into parameters(); the model is movable
/// but not copyable so two models never silently share weights.
template <typename T>
class EceFormer {
 public:
  explicit EceFormer(ModelConfig config);
  EceFormer(EceFormer&&) noexcept = default;
  EceFormer& operator=(EceFormer&&) noexcept = default;
  EceFormer(const EceFormer&) = delete;
  EceFormer& operator=(const EceFormer&) = delete;

  /// Embeddings ~ N(0, 0.02); affine weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in));
  /// biases 0; layer-norm gains 1.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const TokenSpace& tokens() const { return tokens_; }
  nn::ParameterGroup<T>& parameters() { return params_; }
  const nn::ParameterGroup<T>& parameters() const { return params_; }

  const Tensor<T>& semantic_table() const { return semantic_; }
  const Tensor<T>& position_table() const { return position_; }
  std::span<const EncoderUnitParams<T>> encoder_units() const { return encoder_; }
  std::span<const MixerUnitParams<T>> mixer_units() const { return mixer_; }

  /// Token ids [CLS, entity, predicate, time-or-MASK] of one branch.
  std::array<std::size_t, 4> branch_tokens(const graph::EventTriple& branch) const;

  /// Context matrices [B, 1+k, d] plus the keep mask of non-padding rows.
  struct Context {
    Tensor<T> matrix;
    std::vector<std::uint8_t> keep;
  };
  Context build_context(std::span<const graph::Ece> eces) const;

  /// Unified representations [B, d].
  Tensor<T> represent(std::span<const graph::Ece> eces) const;

  Tensor<T> entity_scores(const Tensor<T>& unified) const;
  Tensor<T> time_scores(const Tensor<T>& unified) const;

  /// Training objective for a batch; time terms use each ECE's query mask.
  LossTerms<T> loss(std::span<const graph::Ece> eces, T time_weight) const;

 private:
  ModelConfig config_;
  TokenSpace tokens_;
  nn::ParameterGroup<T> params_;
  Tensor<T> semantic_;
  Tensor<T> position_;
  std::vector<EncoderUnitParams<T>> encoder_;
  std::vector<MixerUnitParams<T>> mixer_;
};

extern template class EceFormer<float>;
extern template class EceFormer<double>;

}  // namespace ecechain::model
