#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <set>

#include "ecechain/errors.hpp"
#include "ecechain/graph/ece.hpp"
#include "support/synthetic.hpp"

using namespace ecechain;
using graph::EventTriple;

namespace {

data::Vocabularies small_vocab(std::size_t entities, std::size_t relations, std::size_t times) {
  data::Vocabularies v;
  for (std::size_t i = 0; i < entities; ++i) v.entities.intern("e" + std::to_string(i));
  for (std::size_t i = 0; i < relations; ++i) v.relations.intern("r" + std::to_string(i));
  for (std::size_t i = 0; i < times; ++i) v.timestamps.intern(std::to_string(i));
  return v;
}

double chi_square_critical(std::size_t dof, double alpha) {
  boost::math::chi_squared_distribution<double> dist{double(dof)};
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

}  // namespace

TEST(NeighborIndex, BothEndpointsSeeEachFactInTimeOrder) {
  const auto v = small_vocab(3, 2, 5);
  const std::vector<data::Quadruple> train = {{0, 1, 2, 4}, {0, 0, 1, 2}, {1, 1, 0, 2}};
  const auto index = graph::build_index(train, v);
  const auto e0 = index.events(0);
  ASSERT_EQ(e0.size(), 3u);
  EXPECT_EQ(e0[0], (EventTriple{1, 0, 2}));
  EXPECT_EQ(e0[1], (EventTriple{1, 3, 2}));  // reciprocal of relation 1
  EXPECT_EQ(e0[2], (EventTriple{2, 1, 4}));
  EXPECT_EQ(index.events(2).size(), 1u);
  EXPECT_EQ(index.events(2)[0], (EventTriple{0, 3, 4}));
  EXPECT_THROW(index.events(3), IndexError);
}

TEST(BuildEce, HistoryCutoffAndGroundTruthExclusion) {
  const auto v = small_vocab(4, 2, 6);
  const std::vector<data::Quadruple> train = {{0, 0, 1, 1}, {0, 0, 2, 3}, {0, 1, 2, 3}, {0, 0, 3, 5}};
  const auto index = graph::build_index(train, v);
  Rng rng(1);
  const data::Query q{0, 0, 3, 2, false};
  const auto ece = graph::build_ece(q, index, {50, true, false}, false, rng);
  // (2, 0, 3) is the answer event itself; (3, 0, 5) is in the future.
  ASSERT_EQ(ece.neighbors.size(), 2u);
  EXPECT_EQ(ece.neighbors[0], (EventTriple{1, 0, 1}));
  EXPECT_EQ(ece.neighbors[1], (EventTriple{2, 1, 3}));
  EXPECT_EQ(ece.query_branch, (EventTriple{0, 0, 3, false}));

  const auto strict = graph::build_ece(q, index, {50, true, true}, true, rng);
  ASSERT_EQ(strict.neighbors.size(), 1u);
  EXPECT_TRUE(strict.query_branch.time_masked);
  EXPECT_EQ(strict.answer_time, 3u);

  const auto full = graph::build_ece(q, index, {50, false, false}, false, rng);
  EXPECT_EQ(full.neighbors.size(), 3u);
}

TEST(BuildEce, CapSamplesAreChronologicalAndSeeded) {
  const auto ds = fixtures::periodic_dataset();
  const auto index = graph::build_index(ds.split.train, ds.vocabs);
  const data::Query q{3, 2, 22, 6, false};
  Rng a(42), b(42), c(43);
  const auto first = graph::build_ece(q, index, {8, true, false}, false, a);
  const auto again = graph::build_ece(q, index, {8, true, false}, false, b);
  const auto other = graph::build_ece(q, index, {8, true, false}, false, c);
  ASSERT_EQ(first.neighbors.size(), 8u);
  EXPECT_EQ(first.neighbors, again.neighbors);
  EXPECT_NE(first.neighbors, other.neighbors);
  EXPECT_TRUE(std::is_sorted(first.neighbors.begin(), first.neighbors.end(), graph::chronological_less));
}

TEST(BuildEce, EpochStreamsDrawDifferentNeighbourSets) {
  const auto ds = fixtures::periodic_dataset();
  const auto index = graph::build_index(ds.split.train, ds.vocabs);
  const data::Query q{5, 1, 19, 7, false};
  std::set<std::vector<std::uint32_t>> seen;
  for (std::uint64_t epoch = 1; epoch <= 5; ++epoch) {
    Rng rng = derive_rng(7, {0xC4A1, epoch, 0});
    const auto ece = graph::build_ece(q, index, {8, true, false}, false, rng);
    std::vector<std::uint32_t> key;
    for (const auto& n : ece.neighbors) key.insert(key.end(), {n.entity, n.predicate, n.timestamp});
    seen.insert(key);
  }
  EXPECT_GT(seen.size(), 1u);
}

TEST(BuildEce, SubsetDrawIsUniform) {
  const auto ds = fixtures::periodic_dataset();
  const auto index = graph::build_index(ds.split.train, ds.vocabs);
  const data::Query q{0, 0, 20, 1, false};
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::size_t> counts;
  const std::size_t draws = 20000, k = 8;
  for (std::size_t i = 0; i < draws; ++i) {
    Rng rng = derive_rng(11, {i});
    for (const auto& n : graph::build_ece(q, index, {k, true, false}, false, rng).neighbors) {
      ++counts[{n.entity, n.predicate, n.timestamp}];
    }
  }
  const std::size_t candidates = index.events(0).size();
  ASSERT_EQ(counts.size(), candidates);
  const double expected = double(draws * k) / double(candidates);
  double chi2 = 0.0;
  for (const auto& [key, n] : counts) chi2 += (double(n) - expected) * (double(n) - expected) / expected;
  EXPECT_LT(chi2, chi_square_critical(candidates - 1, 1e-3));
}

TEST(MaskBatch, ExactCountsAndRangeCheck) {
  Rng rng(5);
  auto none = graph::mask_batch(64, 0.0, rng);
  EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
  auto all = graph::mask_batch(64, 1.0, rng);
  EXPECT_EQ(std::count(all.begin(), all.end(), true), 64);
  auto half = graph::mask_batch(512, 0.5, rng);
  EXPECT_EQ(std::count(half.begin(), half.end(), true), 256);
  EXPECT_THROW(graph::mask_batch(8, 1.5, rng), ConfigError);
  EXPECT_THROW(graph::mask_batch(8, -0.1, rng), ConfigError);
}

TEST(MaskBatch, SelectionFrequencyIsUniform) {
  const std::size_t batch = 32, reps = 4000;
  std::vector<std::size_t> hits(batch, 0);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = derive_rng(3, {r});
    const auto flags = graph::mask_batch(batch, 0.25, rng);
    for (std::size_t i = 0; i < batch; ++i) hits[i] += flags[i] ? 1 : 0;
  }
  const double expected = double(reps) * 0.25;
  double chi2 = 0.0;
  for (auto h : hits) chi2 += (double(h) - expected) * (double(h) - expected) / expected;
  EXPECT_LT(chi2, chi_square_critical(batch - 1, 1e-3));
}
