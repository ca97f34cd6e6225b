#include "ecechain/eval/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "ecechain/errors.hpp"
#include "ecechain/nn/tensor.hpp"
#include "ecechain/util/rng.hpp"

namespace ecechain::eval {

namespace {
constexpr std::uint64_t kEvalStream = 0xE7A1;
}  // namespace

std::uint64_t FilterIndex::key(std::uint64_t entity, std::uint64_t relation, std::uint64_t time) {
  if (entity >= (1ULL << 24) || relation >= (1ULL << 16) || time >= (1ULL << 24)) {
    throw IndexError("filter index: id too large to key");
  }
  return (entity << 40) | (relation << 24) | time;
}

FilterIndex::FilterIndex(const data::DatasetSplit& split, const data::Vocabularies& vocabs) {
  for (const auto* facts : {&split.train, &split.valid, &split.test}) {
    for (const auto& q : data::augment_reciprocal(*facts, vocabs)) {
      answers_[key(q.entity, q.relation, q.timestamp)].push_back(q.answer);
    }
  }
  for (auto& [k, list] : answers_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
}

std::span<const std::size_t> FilterIndex::known_answers(const data::Query& query) const {
  auto it = answers_.find(key(query.entity, query.relation, query.timestamp));
  if (it == answers_.end()) return {};
  return it->second;
}

template <typename T>
MetricReport evaluate(const model::EceFormer<T>& model, std::span<const data::Query> queries,
                      const graph::NeighborIndex& index, const FilterIndex& filter, const EvalOptions& options) {
  MetricReport report;
  report.protocol = options.protocol;
  report.tie = options.tie;
  report.ranks.resize(queries.size());
  std::vector<double> time_losses(queries.size(), 0.0);
  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
  const bool mask = options.mask_query_time || options.time_diagnostics;
  report.query_time_masked = mask;

  auto run = [&](std::size_t begin, std::size_t end) {
    nn::NoGradGuard no_grad;
    std::vector<graph::Ece> eces;
    for (std::size_t start = begin; start < end; start += batch_size) {
      const std::size_t stop = std::min(end, start + batch_size);
      eces.clear();
      for (std::size_t q = start; q < stop; ++q) {
        Rng rng = derive_rng(options.seed, {kEvalStream, q});
        eces.push_back(graph::build_ece(queries[q], index, options.ece, mask, rng));
      }
      const auto unified = model.represent(eces);
      const auto scores = model.entity_scores(unified);
      const std::size_t entities = scores.dim(1);
      for (std::size_t q = start; q < stop; ++q) {
        const auto row = scores.values().subspan((q - start) * entities, entities);
        auto& r = report.ranks[q];
        r.query = q;
        r.reciprocal = queries[q].reciprocal;
        r.raw = rank_target<T>(row, queries[q].answer, {}, options.tie);
        r.filtered = rank_target<T>(row, queries[q].answer, filter.known_answers(queries[q]), options.tie);
      }
      if (options.time_diagnostics) {
        const auto time_scores = model.time_scores(unified);
        const std::size_t times = time_scores.dim(1);
        for (std::size_t q = start; q < stop; ++q) {
          const auto row = time_scores.values().subspan((q - start) * times, times);
          const double peak = double(*std::max_element(row.begin(), row.end()));
          double denom = 0.0;
          for (const T v : row) denom += std::exp(double(v) - peak);
          time_losses[q] = std::log(denom) + peak - double(row[queries[q].timestamp]);
        }
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, queries.size()));
  if (threads == 1) {
    run(0, queries.size());
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> workers;
      const std::size_t chunk = (queries.size() + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = std::min(queries.size(), t * chunk);
        const std::size_t end = std::min(queries.size(), begin + chunk);
        workers.emplace_back([&, t, begin, end] {
          try {
            run(begin, end);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<double> all, object, subject;
  for (const auto& r : report.ranks) {
    const double rank = options.protocol == Protocol::Raw ? r.raw : r.filtered;
    all.push_back(rank);
    (r.reciprocal ? subject : object).push_back(rank);
  }
  if (!all.empty()) report.overall = compute_metrics(all);
  if (!object.empty()) report.object_queries = compute_metrics(object);
  if (!subject.empty()) report.subject_queries = compute_metrics(subject);
  if (options.time_diagnostics && !queries.empty()) {
    double total = 0.0;
    for (double l : time_losses) total += l;
    report.time_loss = total / double(queries.size());
  }
  return report;
}

template MetricReport evaluate(const model::EceFormer<float>&, std::span<const data::Query>,
                               const graph::NeighborIndex&, const FilterIndex&, const EvalOptions&);
template MetricReport evaluate(const model::EceFormer<double>&, std::span<const data::Query>,
                               const graph::NeighborIndex&, const FilterIndex&, const EvalOptions&);

namespace {

nlohmann::ordered_json summary_json(const MetricSummary& m) {
  nlohmann::ordered_json j;
  j["count"] = m.count;
  j["mrr"] = m.mrr;
  j["hits@1"] = m.hits1;
  j["hits@3"] = m.hits3;
  j["hits@10"] = m.hits10;
  return j;
}

}  // namespace

std::string render_report(const MetricReport& report, const std::string& split, const std::string& checkpoint_hash,
                          bool time_diagnostics) {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["protocol"] = protocol_label(report.protocol);
  j["filtering"] = report.protocol == Protocol::Filtered ? "time-aware" : "none";
  j["tie_policy"] = tie_policy_label(report.tie);
  j["query_time_masked"] = report.query_time_masked;
  j["checkpoint_hash"] = checkpoint_hash;
  j["query_count"] = report.overall.count;
  j["metrics"] = summary_json(report.overall);
  j["object_queries"] = summary_json(report.object_queries);
  j["subject_queries"] = summary_json(report.subject_queries);
  if (time_diagnostics) j["time_prediction_loss"] = report.time_loss;
  j["protocol_note"] =
      "raw and filtered rankings are not comparable; compare only against results under the same protocol";
  return j.dump(2) + "\n";
}

void write_rank_dump(const std::filesystem::path& file, const MetricReport& report,
                     std::span<const data::Query> queries) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << "query\tdirection\tentity\trelation\ttime\tanswer\traw_rank\tfiltered_rank\n";
  for (const auto& r : report.ranks) {
    const auto& q = queries[r.query];
    out << r.query << '\t' << (r.reciprocal ? "subject" : "object") << '\t' << q.entity << '\t' << q.relation
        << '\t' << q.timestamp << '\t' << q.answer << '\t' << r.raw << '\t' << r.filtered << '\n';
  }
}

}  // namespace ecechain::eval
