#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ecechain::data {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TimeId = std::uint32_t;

/// One timestamped fact (subject, predicate, object, time).
struct Quadruple {
  EntityId subject = 0;
  RelationId predicate = 0;
  EntityId object = 0;
  TimeId timestamp = 0;

  auto operator<=>(const Quadruple&) const = default;
};

/// Unit that raw timestamps are discretised by.
enum class Granularity { Index, FifteenMinutes, Day, Year };

/// Accepts the labels used in dataset statistics ("24 hours", "15 mins",
/// "1 year") and short forms ("day", "year", "index"). Throws ConfigError.
Granularity parse_granularity(std::string_view label);
std::string_view granularity_label(Granularity g);

enum class FileFormat { Auto, Ids, Names };
FileFormat parse_file_format(std::string_view label);

/// Dense bidirectional string <-> id map.
class NameMap {
 public:
  /// Returns the id of name, appending it when unseen.
  std::size_t intern(std::string_view name);
  std::optional<std::size_t> find(std::string_view name) const;
  const std::string& name(std::size_t id) const;
  std::size_t size() const { return names_.size(); }
  std::span<const std::string> names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct Vocabularies {
  NameMap entities;
  // Base relations only; reciprocal of r is r + relation_count().
  NameMap relations;
  NameMap timestamps;
  // Set when some fact had a missing or unparseable time.
  std::optional<TimeId> unknown_time;

  std::size_t entity_count() const { return entities.size(); }
  std::size_t relation_count() const { return relations.size(); }
  std::size_t time_count() const { return timestamps.size(); }
};

struct DatasetSplit {
  std::vector<Quadruple> train;
  std::vector<Quadruple> valid;
  std::vector<Quadruple> test;
  Granularity granularity = Granularity::Index;
};

struct Dataset {
  DatasetSplit split;
  Vocabularies vocabs;
  std::filesystem::path source;
};

/// Reads train/valid/test (optionally with a .txt suffix) from dir.
/// Vocabularies are built over all splits, in first-appearance order
/// train -> valid -> test for name files.
Dataset load_dataset(const std::filesystem::path& dir, FileFormat format = FileFormat::Auto,
                     Granularity granularity = Granularity::Index);

/// A single link-prediction query (entity, relation, ?, time) -> answer.
struct Query {
  EntityId entity = 0;
  RelationId relation = 0;
  TimeId timestamp = 0;
  EntityId answer = 0;
  // True for the subject-prediction direction (relation is reciprocal).
  bool reciprocal = false;

  auto operator<=>(const Query&) const = default;
};

/// Two queries per fact: (s, p, ?, t) -> o and (o, p + |R|, ?, t) -> s.
/// Throws IndexError if a predicate is already outside the base range.
std::vector<Query> augment_reciprocal(std::span<const Quadruple> facts, const Vocabularies& vocabs);

/// One "name<TAB>id" line per entry.
void write_vocabulary(const std::filesystem::path& file, const NameMap& names);
NameMap read_vocabulary(const std::filesystem::path& file);

/// SHA-256 over the canonical id-level content of all splits.
std::string content_hash(const DatasetSplit& split);
/// SHA-256 over the three name maps in id order.
std::string vocabulary_hash(const Vocabularies& vocabs);

/// Writes entities.tsv, relations.tsv, timestamps.tsv and manifest.json.
/// extra entries are echoed into the manifest under "config".
void write_prepared(const Dataset& dataset, const std::filesystem::path& out_dir,
                    const std::map<std::string, std::string>& extra = {});

}  // namespace ecechain::data
