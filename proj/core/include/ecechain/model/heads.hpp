#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "ecechain/nn/tensor.hpp"

namespace ecechain::model {

using nn::Tensor;

/// Dot-product similarity of every unified representation [B, d] against
/// the entity rows [E, d] of the shared embedding table -> [B, E].
template <typename T>
Tensor<T> score_entities(const Tensor<T>& unified, const Tensor<T>& entity_table);

/// Same over timestamp rows -> [B, |T|].
template <typename T>
Tensor<T> score_timestamps(const Tensor<T>& unified, const Tensor<T>& time_table);

template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> link;  // mean link cross-entropy over the batch
  Tensor<T> time;  // time cross-entropy summed over masked queries / B
  T time_weight = T(1);
};

/// total = (sum_q CE_link(q) + time_weight * sum_{q masked} CE_time(q)) / B.
/// time_scores may be undefined when no query is masked. Throws
/// ConfigError for time_weight < 0.
template <typename T>
LossTerms<T> combined_loss(const Tensor<T>& link_scores, std::span<const std::size_t> answers,
                           const Tensor<T>& time_scores, std::span<const std::size_t> answer_times,
                           std::span<const std::uint8_t> time_masked, T time_weight);

}  // namespace ecechain::model
