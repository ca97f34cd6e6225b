#include "ecechain/model/eceformer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "ecechain/errors.hpp"
#include "ecechain/nn/ops.hpp"
#include "ecechain/util/rng.hpp"

namespace ecechain::model {

template <typename T>
EceFormer<T>::EceFormer(ModelConfig config)
    : config_(config), tokens_(config.entity_count, config.relation_count, config.time_count) {
  config_.validate();
  const std::size_t d = config_.dim;
  semantic_ = params_.add("embed.semantic", Tensor<T>::zeros({tokens_.size(), d}));
  position_ = params_.add("embed.position", Tensor<T>::zeros({kBranchTokens, d}));
  for (std::size_t i = 0; i < config_.encoder_units; ++i) {
    encoder_.push_back(register_encoder_unit(params_, "encoder." + std::to_string(i) + ".", d, config_.heads,
                                             config_.ff_hidden));
  }
  for (std::size_t i = 0; i < config_.mixer_units; ++i) {
    mixer_.push_back(register_mixer_unit(params_, "mixer." + std::to_string(i) + ".", 1 + config_.max_neighbors,
                                         d, config_.mixer_hidden));
  }
}

template <typename T>
void EceFormer<T>::initialize(std::uint64_t seed) {
  Rng rng = derive_rng(seed, {0x1417});
  for (auto& entry : params_.entries()) {
    auto values = entry.tensor.mutable_values();
    const auto& name = entry.name;
    if (name.starts_with("embed.")) {
      std::normal_distribution<double> normal(0.0, 0.02);
      for (auto& v : values) v = T(normal(rng));
    } else if (name.ends_with(".gain")) {
      std::fill(values.begin(), values.end(), T(1));
    } else if (!entry.decay) {
      std::fill(values.begin(), values.end(), T(0));
    } else {
      const double bound = 1.0 / std::sqrt(double(entry.tensor.dim(1)));
      std::uniform_real_distribution<double> uniform(-bound, bound);
      for (auto& v : values) v = T(uniform(rng));
    }
  }
}

template <typename T>
std::array<std::size_t, 4> EceFormer<T>::branch_tokens(const graph::EventTriple& branch) const {
  return {tokens_.cls(), tokens_.entity(branch.entity), tokens_.relation(branch.predicate),
          branch.time_masked ? tokens_.mask() : tokens_.time(branch.timestamp)};
}

template <typename T>
typename EceFormer<T>::Context EceFormer<T>::build_context(std::span<const graph::Ece> eces) const {
  const std::size_t batch = eces.size(), rows = 1 + config_.max_neighbors, d = config_.dim;
  if (batch == 0) throw ContractError("build_context: empty batch");

  // Identical branches across the batch are encoded once.
  std::map<std::array<std::size_t, 4>, std::size_t> unique;
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> source_row(batch * rows);
  std::vector<std::uint8_t> keep(batch * rows, 0);
  auto intern = [&](const graph::EventTriple& branch) {
    const auto key = branch_tokens(branch);
    auto [it, inserted] = unique.emplace(key, unique.size());
    if (inserted) tokens.insert(tokens.end(), key.begin(), key.end());
    return it->second;
  };
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& ece = eces[b];
    if (ece.neighbors.size() > config_.max_neighbors) {
      throw ContractError("build_context: ECE has " + std::to_string(ece.neighbors.size()) +
                          " neighbours but the model supports " + std::to_string(config_.max_neighbors));
    }
    source_row[b * rows] = intern(ece.query_branch);
    keep[b * rows] = true;
    for (std::size_t r = 0; r < ece.neighbors.size(); ++r) {
      source_row[b * rows + 1 + r] = intern(ece.neighbors[r]);
      keep[b * rows + 1 + r] = true;
    }
  }
  const std::size_t groups = unique.size();
  for (std::size_t i = 0; i < source_row.size(); ++i) {
    if (!keep[i]) source_row[i] = groups;
  }

  const T eps = T(config_.ln_eps);
  auto encoded = encode_branches<T>(embed_branches<T>(tokens, semantic_, position_), encoder_, groups, eps);
  auto sources = nn::concat_rows(encoded, nn::slice_rows(semantic_, tokens_.pad(), tokens_.pad() + 1));
  auto gathered = nn::embedding_lookup(sources, std::span<const std::size_t>(source_row));
  return Context{nn::reshape(gathered, {batch, rows, d}), std::move(keep)};
}

template <typename T>
Tensor<T> EceFormer<T>::represent(std::span<const graph::Ece> eces) const {
  auto context = build_context(eces);
  const T eps = T(config_.ln_eps);
  Tensor<T> h = context.matrix;
  for (const auto& unit : mixer_) h = mixer_unit(h, unit, eps);
  return unify<T>(h, context.keep);
}

template <typename T>
Tensor<T> EceFormer<T>::entity_scores(const Tensor<T>& unified) const {
  return score_entities(unified, nn::slice_rows(semantic_, 0, config_.entity_count));
}

template <typename T>
Tensor<T> EceFormer<T>::time_scores(const Tensor<T>& unified) const {
  const std::size_t offset = tokens_.time_offset();
  return score_timestamps(unified, nn::slice_rows(semantic_, offset, offset + config_.time_count));
}

template <typename T>
LossTerms<T> EceFormer<T>::loss(std::span<const graph::Ece> eces, T time_weight) const {
  auto unified = represent(eces);
  std::vector<std::size_t> answers, times;
  std::vector<std::uint8_t> masked(eces.size());
  bool any_masked = false;
  for (std::size_t b = 0; b < eces.size(); ++b) {
    answers.push_back(eces[b].answer);
    times.push_back(eces[b].answer_time);
    masked[b] = eces[b].query_branch.time_masked;
    any_masked = any_masked || masked[b];
  }
  Tensor<T> time_logits;
  if (any_masked) time_logits = time_scores(unified);
  return combined_loss<T>(entity_scores(unified), answers, time_logits, times,
                          masked, time_weight);
}

template class EceFormer<float>;
template class EceFormer<double>;

}  // namespace ecechain::model
