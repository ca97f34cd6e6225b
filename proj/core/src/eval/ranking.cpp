#include "ecechain/eval/ranking.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "ecechain/errors.hpp"

namespace ecechain::eval {

Protocol parse_protocol(std::string_view label) {
  if (label == "raw") return Protocol::Raw;
  if (label == "filtered") return Protocol::Filtered;
  throw ConfigError("unknown protocol '" + std::string(label) + "' (expected raw or filtered)");
}

std::string_view protocol_label(Protocol p) { return p == Protocol::Raw ? "raw" : "filtered"; }

TiePolicy parse_tie_policy(std::string_view label) {
  if (label == "mean") return TiePolicy::Mean;
  if (label == "optimistic") return TiePolicy::Optimistic;
  if (label == "pessimistic") return TiePolicy::Pessimistic;
  throw ConfigError("unknown tie policy '" + std::string(label) + "'");
}

std::string_view tie_policy_label(TiePolicy t) {
  switch (t) {
    case TiePolicy::Mean:
      return "mean";
    case TiePolicy::Optimistic:
      return "optimistic";
    case TiePolicy::Pessimistic:
      return "pessimistic";
  }
  return "mean";
}

template <typename Score>
double rank_target(std::span<const Score> scores, std::size_t answer, std::span<const std::size_t> filtered_out,
                   TiePolicy tie) {
  if (answer >= scores.size()) {
    throw IndexError("rank_target: answer " + std::to_string(answer) + " out of range for " +
                     std::to_string(scores.size()) + " candidates");
  }
  const Score target = scores[answer];
  std::size_t greater = 0, ties = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (e == answer) continue;
    if (scores[e] > target) {
      ++greater;
    } else if (scores[e] == target) {
      ++ties;
    }
  }
  // Remove filtered candidates that were counted; ids may repeat in the list.
  std::vector<std::size_t> removed(filtered_out.begin(), filtered_out.end());
  std::sort(removed.begin(), removed.end());
  removed.erase(std::unique(removed.begin(), removed.end()), removed.end());
  for (const auto e : removed) {
    if (e == answer || e >= scores.size()) continue;
    if (scores[e] > target) {
      --greater;
    } else if (scores[e] == target) {
      --ties;
    }
  }
  switch (tie) {
    case TiePolicy::Optimistic:
      return 1.0 + double(greater);
    case TiePolicy::Pessimistic:
      return 1.0 + double(greater) + double(ties);
    case TiePolicy::Mean:
      break;
  }
  return 1.0 + double(greater) + double(ties) / 2.0;
}

template double rank_target(std::span<const float>, std::size_t, std::span<const std::size_t>, TiePolicy);
template double rank_target(std::span<const double>, std::size_t, std::span<const std::size_t>, TiePolicy);

MetricSummary compute_metrics(std::span<const double> ranks) {
  if (ranks.empty()) throw ContractError("compute_metrics: no ranks");
  MetricSummary m;
  m.count = ranks.size();
  for (const double r : ranks) {
    m.mrr += 1.0 / r;
    m.hits1 += r <= 1.0 ? 1.0 : 0.0;
    m.hits3 += r <= 3.0 ? 1.0 : 0.0;
    m.hits10 += r <= 10.0 ? 1.0 : 0.0;
  }
  const double n = double(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

}  // namespace ecechain::eval
