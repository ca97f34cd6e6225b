#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace ecechain::eval {

enum class Protocol { Raw, Filtered };
enum class TiePolicy { Mean, Optimistic, Pessimistic };

Protocol parse_protocol(std::string_view label);
std::string_view protocol_label(Protocol p);
TiePolicy parse_tie_policy(std::string_view label);
std::string_view tie_policy_label(TiePolicy t);

/// Rank of scores[answer] among all candidates (1 = best). Candidates in
/// filtered_out other than the answer itself are ignored, which is the
/// same as setting their scores to -inf. Ties count half under Mean.
template <typename Score>
double rank_target(std::span<const Score> scores, std::size_t answer,
                   std::span<const std::size_t> filtered_out = {}, TiePolicy tie = TiePolicy::Mean);

struct MetricSummary {
  std::size_t count = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

/// MRR and Hits@{1,3,10}. Throws ContractError on an empty list.
MetricSummary compute_metrics(std::span<const double> ranks);

}  // namespace ecechain::eval
