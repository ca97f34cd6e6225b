#include <gtest/gtest.h>

#include <algorithm>

#include "ecechain/errors.hpp"
#include "ecechain/eval/evaluator.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace ecechain;

namespace {

oracle::Tie to_oracle(eval::TiePolicy t) {
  switch (t) {
    case eval::TiePolicy::Optimistic:
      return oracle::Tie::Optimistic;
    case eval::TiePolicy::Pessimistic:
      return oracle::Tie::Pessimistic;
    case eval::TiePolicy::Mean:
      break;
  }
  return oracle::Tie::Mean;
}

model::EceFormer<double> small_model(const data::Dataset& ds, std::uint64_t seed) {
  model::ModelConfig c;
  c.entity_count = ds.vocabs.entity_count();
  c.relation_count = ds.vocabs.relation_count();
  c.time_count = ds.vocabs.time_count();
  c.dim = 8;
  c.heads = 2;
  c.ff_hidden = 8;
  c.mixer_hidden = 4;
  c.encoder_units = 1;
  c.mixer_units = 1;
  c.max_neighbors = 4;
  model::EceFormer<double> m(c);
  m.initialize(seed);
  return m;
}

}  // namespace

TEST(Rank, MatchesSortOracleOnRandomVectorsWithTies) {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> size_dist(1, 50);
  std::uniform_int_distribution<int> level(0, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size_dist(rng);
    std::vector<double> scores(n);
    // Few distinct levels so ties are common.
    for (auto& s : scores) s = double(level(rng)) * 0.25;
    const std::size_t answer = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::vector<std::size_t> filtered;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::bernoulli_distribution(0.3)(rng)) filtered.push_back(i);
    }
    for (auto tie : {eval::TiePolicy::Mean, eval::TiePolicy::Optimistic, eval::TiePolicy::Pessimistic}) {
      const double got = eval::rank_target<double>(scores, answer, filtered, tie);
      EXPECT_EQ(got, oracle::sorted_rank(scores, answer, filtered, to_oracle(tie))) << "trial " << trial;
      const double raw = eval::rank_target<double>(scores, answer, {}, tie);
      EXPECT_EQ(raw, oracle::sorted_rank(scores, answer, {}, to_oracle(tie)));
      EXPECT_LE(got, raw);
    }
  }
}

TEST(Rank, InvariantUnderMonotoneTransform) {
  Rng rng(5);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores(30), shifted(30);
    for (std::size_t i = 0; i < 30; ++i) {
      scores[i] = dist(rng);
      shifted[i] = 3.0 * scores[i] * scores[i] * scores[i] + 2.0;
    }
    const std::size_t answer = std::size_t(trial) % 30;
    EXPECT_EQ(eval::rank_target<double>(scores, answer), eval::rank_target<double>(shifted, answer));
  }
}

TEST(Rank, FloatScoresAndContract) {
  const std::vector<float> scores = {0.5f, 2.0f, 0.5f, 1.0f};
  EXPECT_EQ(eval::rank_target<float>(scores, 0), 3.5);
  EXPECT_THROW(eval::rank_target<float>(scores, 4), IndexError);
}

TEST(Metrics, KnownRanks) {
  const std::vector<double> ranks = {1, 2, 4, 20};
  const auto m = eval::compute_metrics(ranks);
  EXPECT_DOUBLE_EQ(m.mrr, 0.45);
  EXPECT_DOUBLE_EQ(m.hits1, 0.25);
  EXPECT_DOUBLE_EQ(m.hits3, 0.5);
  EXPECT_DOUBLE_EQ(m.hits10, 0.75);
  EXPECT_EQ(m.count, 4u);
  EXPECT_THROW(eval::compute_metrics({}), ContractError);
}

TEST(Labels, ProtocolAndTieRoundTrip) {
  for (auto p : {eval::Protocol::Raw, eval::Protocol::Filtered}) {
    EXPECT_EQ(eval::parse_protocol(eval::protocol_label(p)), p);
  }
  for (auto t : {eval::TiePolicy::Mean, eval::TiePolicy::Optimistic, eval::TiePolicy::Pessimistic}) {
    EXPECT_EQ(eval::parse_tie_policy(eval::tie_policy_label(t)), t);
  }
  EXPECT_THROW(eval::parse_protocol("strict"), ConfigError);
}

TEST(FilterIndex, CollectsAnswersAcrossSplitsAndDirections) {
  data::Vocabularies v;
  for (const char* e : {"a", "b", "c", "d"}) v.entities.intern(e);
  v.relations.intern("r");
  for (const char* t : {"0", "1"}) v.timestamps.intern(t);
  data::DatasetSplit split;
  split.train = {{0, 0, 1, 0}};
  split.valid = {{0, 0, 2, 0}};
  split.test = {{0, 0, 3, 1}, {3, 0, 1, 0}};
  const eval::FilterIndex filter(split, v);
  const data::Query forward{0, 0, 0, 2, false};
  auto known = std::vector<std::size_t>(filter.known_answers(forward).begin(), filter.known_answers(forward).end());
  std::sort(known.begin(), known.end());
  EXPECT_EQ(known, (std::vector<std::size_t>{1, 2}));
  const data::Query backward{1, 1, 0, 0, true};
  known.assign(filter.known_answers(backward).begin(), filter.known_answers(backward).end());
  std::sort(known.begin(), known.end());
  EXPECT_EQ(known, (std::vector<std::size_t>{0, 3}));
  EXPECT_TRUE(filter.known_answers({2, 0, 1, 0, false}).empty());
}

TEST(Evaluate, IndependentOfBatchSizeAndThreads) {
  const auto ds = fixtures::periodic_dataset();
  const auto m = small_model(ds, 9);
  const auto index = graph::build_index(ds.split.train, ds.vocabs);
  const eval::FilterIndex filter(ds.split, ds.vocabs);
  const auto queries = data::augment_reciprocal(ds.split.test, ds.vocabs);
  eval::EvalOptions base;
  base.ece.max_neighbors = 4;
  base.seed = 3;
  base.batch_size = 256;
  const auto reference = eval::evaluate(m, queries, index, filter, base);
  ASSERT_EQ(reference.ranks.size(), queries.size());
  for (auto [batch, threads] : {std::pair{1, 1}, {7, 1}, {16, 3}, {1000, 4}}) {
    auto opts = base;
    opts.batch_size = std::size_t(batch);
    opts.threads = std::size_t(threads);
    const auto other = eval::evaluate(m, queries, index, filter, opts);
    EXPECT_EQ(eval::render_report(other, "test", "h", false), eval::render_report(reference, "test", "h", false));
    for (std::size_t i = 0; i < queries.size(); ++i) {
      EXPECT_EQ(other.ranks[i].raw, reference.ranks[i].raw);
      EXPECT_EQ(other.ranks[i].filtered, reference.ranks[i].filtered);
    }
  }
}

TEST(Evaluate, SummariesAreConsistent) {
  const auto ds = fixtures::periodic_dataset();
  const auto m = small_model(ds, 10);
  const auto index = graph::build_index(ds.split.train, ds.vocabs);
  const eval::FilterIndex filter(ds.split, ds.vocabs);
  const auto queries = data::augment_reciprocal(ds.split.valid, ds.vocabs);
  eval::EvalOptions opts;
  opts.ece.max_neighbors = 4;
  opts.time_diagnostics = true;
  const auto report = eval::evaluate(m, queries, index, filter, opts);
  EXPECT_TRUE(report.query_time_masked);
  EXPECT_GT(report.time_loss, 0.0);
  std::vector<double> filtered, object, subject;
  for (const auto& r : report.ranks) {
    EXPECT_LE(r.filtered, r.raw);
    EXPECT_GE(r.filtered, 1.0);
    EXPECT_LE(r.raw, double(ds.vocabs.entity_count()));
    filtered.push_back(r.filtered);
    (r.reciprocal ? subject : object).push_back(r.filtered);
  }
  EXPECT_DOUBLE_EQ(report.overall.mrr, eval::compute_metrics(filtered).mrr);
  EXPECT_DOUBLE_EQ(report.object_queries.mrr, eval::compute_metrics(object).mrr);
  EXPECT_DOUBLE_EQ(report.subject_queries.mrr, eval::compute_metrics(subject).mrr);
  EXPECT_EQ(report.object_queries.count, ds.split.valid.size());

  const auto text = eval::render_report(report, "valid", "abc", true);
  EXPECT_NE(text.find("\"time_prediction_loss\""), std::string::npos);
  EXPECT_NE(text.find("\"checkpoint_hash\": \"abc\""), std::string::npos);
}
