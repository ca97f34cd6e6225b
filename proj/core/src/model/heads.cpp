#include "ecechain/model/heads.hpp"

#include <algorithm>
#include <vector>

#include "ecechain/errors.hpp"
#include "ecechain/nn/ops.hpp"

namespace ecechain::model {

template <typename T>
Tensor<T> score_entities(const Tensor<T>& unified, const Tensor<T>& entity_table) {
  return nn::linear(unified, entity_table);
}

template <typename T>
Tensor<T> score_timestamps(const Tensor<T>& unified, const Tensor<T>& time_table) {
  return nn::linear(unified, time_table);
}

template <typename T>
LossTerms<T> combined_loss(const Tensor<T>& link_scores, std::span<const std::size_t> answers,
                           const Tensor<T>& time_scores, std::span<const std::size_t> answer_times,
                           std::span<const std::uint8_t> time_masked, T time_weight) {
  if (time_weight < T(0)) throw ConfigError("time-prediction weight must be non-negative");
  const std::size_t batch = answers.size();
  if (batch == 0) throw ContractError("combined_loss: empty batch");
  if (time_masked.size() != batch || answer_times.size() != batch) {
    throw DimensionError("combined_loss: per-query inputs disagree on batch size");
  }
  LossTerms<T> terms;
  terms.time_weight = time_weight;
  const std::vector<T> link_weights(batch, T(1) / T(batch));
  terms.link = nn::cross_entropy(link_scores, answers, std::span<const T>(link_weights));

  const bool any_masked = std::any_of(time_masked.begin(), time_masked.end(), [](bool m) { return m; });
  if (any_masked) {
    if (!time_scores.defined()) throw ContractError("combined_loss: masked queries need time scores");
    std::vector<T> time_weights(batch);
    for (std::size_t b = 0; b < batch; ++b) time_weights[b] = time_masked[b] ? T(1) / T(batch) : T(0);
    terms.time = nn::cross_entropy(time_scores, answer_times, std::span<const T>(time_weights));
    terms.total = nn::add(terms.link, nn::scale(terms.time, time_weight));
  } else {
    terms.time = Tensor<T>::scalar(T(0));
    terms.total = terms.link;
  }
  return terms;
}

#define ECECHAIN_INSTANTIATE_HEADS(T)                                                             \
  template Tensor<T> score_entities(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> score_timestamps(const Tensor<T>&, const Tensor<T>&);                        \
  template LossTerms<T> combined_loss(const Tensor<T>&, std::span<const std::size_t>, const Tensor<T>&, \
                                      std::span<const std::size_t>, std::span<const std::uint8_t>, T);

ECECHAIN_INSTANTIATE_HEADS(float)
ECECHAIN_INSTANTIATE_HEADS(double)

#undef ECECHAIN_INSTANTIATE_HEADS

}  // namespace ecechain::model
