#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecechain/data/dataset.hpp"
#include "ecechain/eval/ranking.hpp"
#include "ecechain/graph/ece.hpp"
#include "ecechain/model/eceformer.hpp"

namespace ecechain::eval {

/// Time-aware filter: every answer e' with (entity, relation, e', time)
/// true in any split, for both query directions.
class FilterIndex {
 public:
  FilterIndex() = default;
  FilterIndex(const data::DatasetSplit& split, const data::Vocabularies& vocabs);

  std::span<const std::size_t> known_answers(const data::Query& query) const;

 private:
  static std::uint64_t key(std::uint64_t entity, std::uint64_t relation, std::uint64_t time);
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> answers_;
};

struct EvalOptions {
  Protocol protocol = Protocol::Filtered;
  TiePolicy tie = TiePolicy::Mean;
  graph::EceOptions ece;
  std::uint64_t seed = 0;
  std::size_t batch_size = 256;
  std::size_t threads = 1;
  // Replace every query timestamp with MASK, as in fully masked training.
  bool mask_query_time = false;
  // Report the mean time-prediction loss; implies masked query timestamps.
  bool time_diagnostics = false;
};

struct QueryRank {
  std::size_t query = 0;
  bool reciprocal = false;
  double raw = 0.0;
  double filtered = 0.0;
};

struct MetricReport {
  Protocol protocol = Protocol::Filtered;
  TiePolicy tie = TiePolicy::Mean;
  bool query_time_masked = false;
  MetricSummary overall;
  MetricSummary object_queries;   // (s, p, ?, t)
  MetricSummary subject_queries;  // (?, p, o, t) via reciprocal relations
  double time_loss = 0.0;         // only with time_diagnostics
  std::vector<QueryRank> ranks;
};

/// Ranks every query's answer over all entities. Results do not depend on
/// batch size or thread count.
template <typename T>
MetricReport evaluate(const model::EceFormer<T>& model, std::span<const data::Query> queries,
                      const graph::NeighborIndex& index, const FilterIndex& filter, const EvalOptions& options);

/// Deterministic JSON rendering of a report (no timestamps).
std::string render_report(const MetricReport& report, const std::string& split, const std::string& checkpoint_hash,
                          bool time_diagnostics);

/// Tab-separated per-query ranks: query, direction, entity, relation, time,
/// answer, raw, filtered.
void write_rank_dump(const std::filesystem::path& file, const MetricReport& report,
                     std::span<const data::Query> queries);

}  // namespace ecechain::eval
