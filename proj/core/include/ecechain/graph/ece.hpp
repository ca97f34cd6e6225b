#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ecechain/data/dataset.hpp"
#include "ecechain/util/rng.hpp"

namespace ecechain::graph {

using data::EntityId;
using data::RelationId;
using data::TimeId;

/// One event seen from a centre entity: (other entity, predicate, time).
/// When time_masked the MASK token replaces the time at embedding, while
/// timestamp keeps the true value for supervision.
struct EventTriple {
  EntityId entity = 0;
  RelationId predicate = 0;
  TimeId timestamp = 0;
  bool time_masked = false;

  bool operator==(const EventTriple&) const = default;
};

/// Ordering by (timestamp, predicate, entity).
bool chronological_less(const EventTriple& a, const EventTriple& b) noexcept;

/// Per-entity chronologically sorted event lists built from training facts.
/// Fact (s, p, o, t) appears as (o, p, t) under s and (s, p + |R|, t) under o.
class NeighborIndex {
 public:
  NeighborIndex() = default;

  std::span<const EventTriple> events(EntityId entity) const;
  std::size_t entity_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t event_count() const { return events_.size(); }

  friend NeighborIndex build_index(std::span<const data::Quadruple> train, const data::Vocabularies& vocabs);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<EventTriple> events_;
};

NeighborIndex build_index(std::span<const data::Quadruple> train, const data::Vocabularies& vocabs);

/// Evolutionary chain of events for one query: the query branch followed by
/// at most max_neighbors chronologically ordered neighbour branches.
struct Ece {
  EventTriple query_branch;
  std::vector<EventTriple> neighbors;
  EntityId answer = 0;
  TimeId answer_time = 0;

  std::size_t branch_count() const { return 1 + neighbors.size(); }
};

struct EceOptions {
  std::size_t max_neighbors = 50;
  // Only events with timestamp <= query time are visible.
  bool history_only = true;
  // Drop every neighbour naming the answer entity, not only the exact
  // ground-truth event.
  bool strict_filtering = false;
};

Ece build_ece(const data::Query& query, const NeighborIndex& index, const EceOptions& options,
              bool mask_query_time, Rng& rng);

/// Exactly round(rate * batch_size) flags set, chosen uniformly without
/// replacement.
std::vector<bool> mask_batch(std::size_t batch_size, double rate, Rng& rng);

}  // namespace ecechain::graph
