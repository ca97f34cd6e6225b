#include <gtest/gtest.h>

#include <json.hpp>

#include "ecechain/data/dataset.hpp"
#include "ecechain/errors.hpp"
#include "support/fixtures.hpp"

using namespace ecechain;
using fixtures::TempDir;

namespace {

void write_splits(const TempDir& dir, const std::string& train, const std::string& valid, const std::string& test,
                  bool txt_suffix = true) {
  const std::string ext = txt_suffix ? ".txt" : "";
  dir.write("train" + ext, train);
  dir.write("valid" + ext, valid);
  dir.write("test" + ext, test);
}

}  // namespace

TEST(LoadDataset, NamesGetIdsInFirstAppearanceOrder) {
  TempDir dir;
  write_splits(dir, "Alice\tmeets\tBob\t2014-01-02\nBob\tcalls\tCarol\t2014-01-01\n",
               "Carol\tmeets\tDave\t2014-01-03\n", "Eve\tcalls\tAlice\t2014-01-05\n");
  const auto ds = data::load_dataset(dir.path(), data::FileFormat::Auto, data::Granularity::Day);
  ASSERT_EQ(ds.vocabs.entity_count(), 5u);
  EXPECT_EQ(ds.vocabs.entities.name(0), "Alice");
  EXPECT_EQ(ds.vocabs.entities.name(1), "Bob");
  EXPECT_EQ(ds.vocabs.entities.name(2), "Carol");
  EXPECT_EQ(ds.vocabs.entities.name(3), "Dave");
  EXPECT_EQ(ds.vocabs.entities.name(4), "Eve");
  EXPECT_EQ(ds.vocabs.relation_count(), 2u);
  // Days 01..05 form a dense axis even though 04 never occurs.
  ASSERT_EQ(ds.vocabs.time_count(), 5u);
  EXPECT_EQ(ds.vocabs.timestamps.name(3), "2014-01-04");
  EXPECT_EQ(ds.split.train[0], (data::Quadruple{0, 0, 1, 1}));
  EXPECT_EQ(ds.split.train[1], (data::Quadruple{1, 1, 2, 0}));
  EXPECT_EQ(ds.split.test[0], (data::Quadruple{4, 1, 0, 4}));
}

TEST(LoadDataset, IdFilesKeepIdsAndReadNameTables) {
  TempDir dir;
  write_splits(dir, "0\t1\t3\t0\n2\t0\t1\t24\n", "1\t1\t0\t48\n", "3\t0\t2\t72\n", false);
  dir.write("entity2id.txt", "Zero\t0\nOne\t1\nTwo\t2\nThree\t3\n");
  const auto ds = data::load_dataset(dir.path(), data::FileFormat::Auto, data::Granularity::Day);
  EXPECT_EQ(ds.vocabs.entity_count(), 4u);
  EXPECT_EQ(ds.vocabs.entities.name(3), "Three");
  EXPECT_EQ(ds.vocabs.relations.name(1), "1");
  EXPECT_EQ(ds.vocabs.time_count(), 4u);
  EXPECT_EQ(ds.split.train[1], (data::Quadruple{2, 0, 1, 1}));
  EXPECT_EQ(ds.split.test[0].timestamp, 3u);
}

TEST(LoadDataset, YearGranularityReducesDates) {
  TempDir dir;
  write_splits(dir, "a\tr\tb\t1990-05-01\na\tr\tc\t1993-##-##\n", "b\tr\tc\t####-##-##\n", "c\tr\ta\t1991-01-01\n");
  const auto ds = data::load_dataset(dir.path(), data::FileFormat::Names, data::Granularity::Year);
  ASSERT_TRUE(ds.vocabs.unknown_time.has_value());
  EXPECT_EQ(ds.vocabs.time_count(), 5u);  // 1990..1993 plus the unknown slot
  EXPECT_EQ(ds.vocabs.timestamps.name(0), "1990");
  EXPECT_EQ(ds.split.train[1].timestamp, 3u);
  EXPECT_EQ(ds.split.valid[0].timestamp, *ds.vocabs.unknown_time);
}

TEST(LoadDataset, ExtraColumnsAreIgnored) {
  TempDir dir;
  write_splits(dir, "a\tr\tb\t0\textra\n", "a\tr\tb\t1\n", "a\tr\tb\t2\n");
  const auto ds = data::load_dataset(dir.path());
  EXPECT_EQ(ds.split.train.size(), 1u);
  EXPECT_EQ(ds.vocabs.time_count(), 3u);
}

TEST(LoadDataset, ShortLineReportsLineNumber) {
  TempDir dir;
  write_splits(dir, "a\tr\tb\t0\na\tr\tb\t1\na\tr\n", "", "");
  try {
    data::load_dataset(dir.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("train.txt:3"), std::string::npos);
  }
}

TEST(LoadDataset, MissingSplitIsAnIoError) {
  TempDir dir;
  dir.write("train.txt", "a\tr\tb\t0\n");
  EXPECT_THROW(data::load_dataset(dir.path()), IoError);
}

TEST(Granularity, LabelsParseAndUnknownIsRejected) {
  EXPECT_EQ(data::parse_granularity("24 hours"), data::Granularity::Day);
  EXPECT_EQ(data::parse_granularity("15 mins"), data::Granularity::FifteenMinutes);
  EXPECT_EQ(data::parse_granularity("1 year"), data::Granularity::Year);
  for (auto g : {data::Granularity::Index, data::Granularity::FifteenMinutes, data::Granularity::Day,
                 data::Granularity::Year}) {
    EXPECT_EQ(data::parse_granularity(data::granularity_label(g)), g);
  }
  EXPECT_THROW(data::parse_granularity("fortnight"), ConfigError);
}

TEST(Reciprocal, TwoQueriesPerFact) {
  data::Vocabularies v;
  for (const char* e : {"a", "b", "c"}) v.entities.intern(e);
  for (const char* r : {"x", "y"}) v.relations.intern(r);
  v.timestamps.intern("0");
  const std::vector<data::Quadruple> facts = {{0, 1, 2, 0}};
  const auto q = data::augment_reciprocal(facts, v);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0], (data::Query{0, 1, 0, 2, false}));
  EXPECT_EQ(q[1], (data::Query{2, 3, 0, 0, true}));
  const std::vector<data::Quadruple> bad = {{0, 2, 1, 0}};
  EXPECT_THROW(data::augment_reciprocal(bad, v), IndexError);
}

TEST(Vocabulary, WriteReadRoundTrip) {
  TempDir dir;
  data::NameMap names;
  for (const char* n : {"United States", "Ban Ki-moon", "x"}) names.intern(n);
  data::write_vocabulary(dir / "v.tsv", names);
  const auto back = data::read_vocabulary(dir / "v.tsv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.name(1), "Ban Ki-moon");
  dir.write("bad.tsv", "a\t0\nb\t2\n");
  EXPECT_THROW(data::read_vocabulary(dir / "bad.tsv"), ParseError);
}

TEST(Prepared, ManifestCountsAndHashes) {
  TempDir dir, out;
  write_splits(dir, "a\tr\tb\t0\nb\tr\tc\t1\n", "c\ts\ta\t2\n", "a\ts\tc\t3\n");
  const auto ds = data::load_dataset(dir.path());
  data::write_prepared(ds, out.path(), {{"seed", "7"}});
  const auto manifest = nlohmann::json::parse(fixtures::read_file(out / "manifest.json"));
  EXPECT_EQ(manifest.at("entity_count"), 3);
  EXPECT_EQ(manifest.at("relation_count"), 2);
  EXPECT_EQ(manifest.at("time_count"), 4);
  EXPECT_EQ(manifest.at("splits").at("train"), 2);
  EXPECT_EQ(manifest.at("content_hash"), data::content_hash(ds.split));
  EXPECT_EQ(manifest.at("config").at("seed"), "7");
  EXPECT_EQ(data::read_vocabulary(out / "entities.tsv").size(), 3u);
}

TEST(Prepared, ContentHashTracksFacts) {
  data::DatasetSplit a;
  a.train = {{0, 0, 1, 0}};
  auto b = a;
  EXPECT_EQ(data::content_hash(a), data::content_hash(b));
  b.train[0].timestamp = 1;
  EXPECT_NE(data::content_hash(a), data::content_hash(b));
  // Moving a fact between splits changes the hash too.
  auto c = a;
  c.valid = c.train;
  c.train.clear();
  EXPECT_NE(data::content_hash(a), data::content_hash(c));
}
