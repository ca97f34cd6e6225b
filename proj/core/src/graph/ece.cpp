#include "ecechain/graph/ece.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ecechain/errors.hpp"

namespace ecechain::graph {

bool chronological_less(const EventTriple& a, const EventTriple& b) noexcept {
  return std::tie(a.timestamp, a.predicate, a.entity) < std::tie(b.timestamp, b.predicate, b.entity);
}

std::span<const EventTriple> NeighborIndex::events(EntityId entity) const {
  if (entity + std::size_t{1} >= offsets_.size()) {
    throw IndexError("neighbor index: entity " + std::to_string(entity) + " out of range");
  }
  return std::span(events_).subspan(offsets_[entity], offsets_[entity + 1] - offsets_[entity]);
}

NeighborIndex build_index(std::span<const data::Quadruple> train, const data::Vocabularies& vocabs) {
  const std::size_t entities = vocabs.entity_count();
  const auto relations = static_cast<RelationId>(vocabs.relation_count());
  NeighborIndex index;
  index.offsets_.assign(entities + 1, 0);
  for (const auto& q : train) {
    if (q.subject >= entities || q.object >= entities || q.predicate >= relations) {
      throw IndexError("build_index: fact references ids outside the vocabularies");
    }
    ++index.offsets_[q.subject + 1];
    ++index.offsets_[q.object + 1];
  }
  std::partial_sum(index.offsets_.begin(), index.offsets_.end(), index.offsets_.begin());
  index.events_.resize(index.offsets_.back());
  std::vector<std::size_t> cursor(index.offsets_.begin(), index.offsets_.end() - 1);
  for (const auto& q : train) {
    index.events_[cursor[q.subject]++] = EventTriple{q.object, q.predicate, q.timestamp};
    index.events_[cursor[q.object]++] = EventTriple{q.subject, q.predicate + relations, q.timestamp};
  }
  for (std::size_t e = 0; e < entities; ++e) {
    std::sort(index.events_.begin() + index.offsets_[e], index.events_.begin() + index.offsets_[e + 1],
              chronological_less);
  }
  return index;
}

Ece build_ece(const data::Query& query, const NeighborIndex& index, const EceOptions& options,
              bool mask_query_time, Rng& rng) {
  Ece ece;
  ece.query_branch = EventTriple{query.entity, query.relation, query.timestamp, mask_query_time};
  ece.answer = query.answer;
  ece.answer_time = query.timestamp;

  const EventTriple ground_truth{query.answer, query.relation, query.timestamp};
  std::vector<EventTriple> candidates;
  for (const auto& ev : index.events(query.entity)) {
    if (options.history_only && ev.timestamp > query.timestamp) break;
    if (ev == ground_truth) continue;
    if (options.strict_filtering && ev.entity == query.answer) continue;
    candidates.push_back(ev);
  }

  const std::size_t k = options.max_neighbors;
  if (candidates.size() <= k) {
    ece.neighbors = std::move(candidates);
    return ece;
  }
  // Partial Fisher-Yates over positions, then restore chronological order.
  std::vector<std::size_t> positions(candidates.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, positions.size() - 1);
    std::swap(positions[i], positions[pick(rng)]);
  }
  positions.resize(k);
  std::sort(positions.begin(), positions.end());
  ece.neighbors.reserve(k);
  for (auto p : positions) ece.neighbors.push_back(candidates[p]);
  return ece;
}

std::vector<bool> mask_batch(std::size_t batch_size, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("masking rate must lie in [0, 1]");
  const auto count = static_cast<std::size_t>(std::llround(rate * double(batch_size)));
  std::vector<std::size_t> order(batch_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, batch_size - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<bool> flags(batch_size, false);
  for (std::size_t i = 0; i < count; ++i) flags[order[i]] = true;
  return flags;
}

}  // namespace ecechain::graph
