#include "ecechain/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "ecechain/errors.hpp"
#include "ecechain/util/hash.hpp"

namespace ecechain::data {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += char(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  s = trim(s);
  Int value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

struct RawLine {
  std::string subject, predicate, object, time;
  std::size_t line = 0;
};

fs::path split_file(const fs::path& dir, std::string_view name) {
  for (const auto& candidate : {fs::path(dir) / name, fs::path(dir) / (std::string(name) + ".txt")}) {
    if (fs::is_regular_file(candidate)) return candidate;
  }
  throw IoError("missing split file '" + std::string(name) + "' (or " + std::string(name) + ".txt) in " +
                dir.string());
}

std::vector<RawLine> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<RawLine> rows;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (trim(text).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = text.find('\t', start);
      fields.emplace_back(text.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 4) {
      throw ParseError(file.string(), number,
                       "expected at least 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    rows.push_back(RawLine{fields[0], fields[1], fields[2], fields[3], number});
  }
  return rows;
}

enum class TimeKind { Integer, Date, Unknown };

struct RawTime {
  TimeKind kind = TimeKind::Unknown;
  std::int64_t value = 0;
};

RawTime parse_time(std::string_view text, Granularity g, const fs::path& file, std::size_t line) {
  text = trim(text);
  if (text.empty() || std::all_of(text.begin(), text.end(), [](char c) { return c == '#' || c == '-'; })) {
    return {};
  }
  if (auto v = parse_int<std::int64_t>(text)) return {TimeKind::Integer, *v};
  const bool date_shape = text.size() >= 10 && text[4] == '-' && text[7] == '-';
  if (!date_shape) throw ParseError(file.string(), line, "unrecognised timestamp '" + std::string(text) + "'");
  if (g == Granularity::FifteenMinutes) {
    throw ParseError(file.string(), line, "date timestamps are not supported at 15-minute granularity");
  }
  const auto year = parse_int<int>(text.substr(0, 4));
  if (g == Granularity::Year) {
    if (!year) return {};
    return {TimeKind::Integer, *year};
  }
  const auto month = parse_int<unsigned>(text.substr(5, 2));
  const auto day = parse_int<unsigned>(text.substr(8, 2));
  if (!year || !month || !day) {
    if (text.find('#') != std::string_view::npos) return {};
    throw ParseError(file.string(), line, "invalid date '" + std::string(text) + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{*year}, std::chrono::month{*month},
                                        std::chrono::day{*day}};
  if (!ymd.ok()) throw ParseError(file.string(), line, "invalid date '" + std::string(text) + "'");
  return {TimeKind::Date, std::chrono::sys_days(ymd).time_since_epoch().count()};
}

std::int64_t integer_step(Granularity g) {
  switch (g) {
    case Granularity::FifteenMinutes:
      return 15;
    case Granularity::Day:
      return 24;
    case Granularity::Index:
    case Granularity::Year:
      return 1;
  }
  return 1;
}

std::string iso_date(std::int64_t days_since_epoch) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_since_epoch}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

// Names from an optional "<kind>2id.txt" file shipped with id-format datasets.
std::unordered_map<std::size_t, std::string> read_id_names(const fs::path& file) {
  std::unordered_map<std::size_t, std::string> names;
  std::ifstream in(file);
  if (!in) return names;
  std::string text;
  while (std::getline(in, text)) {
    if (!text.empty() && text.back() == '\r') text.pop_back();
    const auto tab = text.rfind('\t');
    if (tab == std::string::npos) continue;
    if (auto id = parse_int<std::size_t>(std::string_view(text).substr(tab + 1))) {
      names.emplace(*id, text.substr(0, tab));
    }
  }
  return names;
}

}  // namespace

Granularity parse_granularity(std::string_view label) {
  const auto key = lower(label);
  if (key == "index" || key == "step" || key.empty()) return Granularity::Index;
  if (key == "15mins" || key == "15min" || key == "15minutes") return Granularity::FifteenMinutes;
  if (key == "24hours" || key == "day" || key == "1day" || key == "days") return Granularity::Day;
  if (key == "1year" || key == "year" || key == "years") return Granularity::Year;
  throw ConfigError("unknown time granularity '" + std::string(label) + "'");
}

std::string_view granularity_label(Granularity g) {
  switch (g) {
    case Granularity::Index:
      return "index";
    case Granularity::FifteenMinutes:
      return "15 mins";
    case Granularity::Day:
      return "24 hours";
    case Granularity::Year:
      return "1 year";
  }
  return "index";
}

FileFormat parse_file_format(std::string_view label) {
  const auto key = lower(label);
  if (key == "auto") return FileFormat::Auto;
  if (key == "ids" || key == "id") return FileFormat::Ids;
  if (key == "names" || key == "name") return FileFormat::Names;
  throw ConfigError("unknown dataset format '" + std::string(label) + "' (expected auto, ids or names)");
}

std::size_t NameMap::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  const std::size_t id = names_.size();
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::size_t> NameMap::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& NameMap::name(std::size_t id) const {
  if (id >= names_.size()) throw IndexError("name id " + std::to_string(id) + " out of range");
  return names_[id];
}

Dataset load_dataset(const fs::path& dir, FileFormat format, Granularity granularity) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  const fs::path files[3] = {split_file(dir, "train"), split_file(dir, "valid"), split_file(dir, "test")};
  std::vector<RawLine> raw[3];
  for (int i = 0; i < 3; ++i) raw[i] = read_lines(files[i]);

  if (format == FileFormat::Auto) {
    format = FileFormat::Ids;
    for (const auto& rows : raw) {
      if (rows.empty()) continue;
      const auto& r = rows.front();
      if (!parse_int<std::size_t>(r.subject) || !parse_int<std::size_t>(r.predicate) ||
          !parse_int<std::size_t>(r.object)) {
        format = FileFormat::Names;
      }
      break;
    }
  }

  Dataset out;
  out.source = dir;
  out.split.granularity = granularity;
  std::vector<Quadruple>* targets[3] = {&out.split.train, &out.split.valid, &out.split.test};

  // Times first: ids depend on the global minimum over every split.
  std::vector<RawTime> times[3];
  bool saw_integer = false, saw_date = false, saw_unknown = false;
  std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
  for (int i = 0; i < 3; ++i) {
    for (const auto& r : raw[i]) {
      const auto t = parse_time(r.time, granularity, files[i], r.line);
      if (t.kind == TimeKind::Integer) saw_integer = true;
      if (t.kind == TimeKind::Date) saw_date = true;
      if (t.kind == TimeKind::Unknown) {
        saw_unknown = true;
      } else {
        lo = std::min(lo, t.value);
        hi = std::max(hi, t.value);
      }
      times[i].push_back(t);
    }
  }
  if (saw_integer && saw_date) throw ParseError("dataset mixes integer and date timestamps: " + dir.string());
  const std::int64_t step = saw_date ? 1 : integer_step(granularity);
  if (saw_integer || saw_date) {
    const auto count = static_cast<std::size_t>((hi - lo) / step + 1);
    for (std::size_t id = 0; id < count; ++id) {
      const std::int64_t value = lo + static_cast<std::int64_t>(id) * step;
      out.vocabs.timestamps.intern(saw_date ? iso_date(value) : std::to_string(value));
    }
  }
  if (saw_unknown) out.vocabs.unknown_time = static_cast<TimeId>(out.vocabs.timestamps.intern("<unknown>"));

  auto time_id = [&](const RawTime& t) -> TimeId {
    if (t.kind == TimeKind::Unknown) return *out.vocabs.unknown_time;
    return static_cast<TimeId>((t.value - lo) / step);
  };

  if (format == FileFormat::Names) {
    for (int i = 0; i < 3; ++i) {
      for (std::size_t n = 0; n < raw[i].size(); ++n) {
        const auto& r = raw[i][n];
        Quadruple q;
        q.subject = static_cast<EntityId>(out.vocabs.entities.intern(trim(r.subject)));
        q.predicate = static_cast<RelationId>(out.vocabs.relations.intern(trim(r.predicate)));
        q.object = static_cast<EntityId>(out.vocabs.entities.intern(trim(r.object)));
        q.timestamp = time_id(times[i][n]);
        targets[i]->push_back(q);
      }
    }
    return out;
  }

  std::size_t max_entity = 0, max_relation = 0;
  bool any = false;
  for (int i = 0; i < 3; ++i) {
    for (std::size_t n = 0; n < raw[i].size(); ++n) {
      const auto& r = raw[i][n];
      const auto s = parse_int<std::size_t>(r.subject), p = parse_int<std::size_t>(r.predicate),
                 o = parse_int<std::size_t>(r.object);
      if (!s || !p || !o) throw ParseError(files[i].string(), r.line, "expected integer ids in an id-format file");
      targets[i]->push_back(Quadruple{static_cast<EntityId>(*s), static_cast<RelationId>(*p),
                                      static_cast<EntityId>(*o), time_id(times[i][n])});
      max_entity = std::max({max_entity, *s, *o});
      max_relation = std::max(max_relation, *p);
      any = true;
    }
  }
  if (any) {
    const auto entity_names = read_id_names(dir / "entity2id.txt");
    const auto relation_names = read_id_names(dir / "relation2id.txt");
    for (std::size_t id = 0; id <= max_entity; ++id) {
      auto it = entity_names.find(id);
      out.vocabs.entities.intern(it != entity_names.end() ? it->second : std::to_string(id));
    }
    for (std::size_t id = 0; id <= max_relation; ++id) {
      auto it = relation_names.find(id);
      out.vocabs.relations.intern(it != relation_names.end() ? it->second : std::to_string(id));
    }
  }
  return out;
}

std::vector<Query> augment_reciprocal(std::span<const Quadruple> facts, const Vocabularies& vocabs) {
  const auto relations = static_cast<RelationId>(vocabs.relation_count());
  std::vector<Query> queries;
  queries.reserve(2 * facts.size());
  for (const auto& f : facts) {
    if (f.predicate >= relations) {
      throw IndexError("augment_reciprocal: predicate " + std::to_string(f.predicate) +
                       " is outside the base relation range [0, " + std::to_string(relations) + ")");
    }
    if (f.subject >= vocabs.entity_count() || f.object >= vocabs.entity_count()) {
      throw IndexError("augment_reciprocal: entity id out of range");
    }
    queries.push_back(Query{f.subject, f.predicate, f.timestamp, f.object, false});
    queries.push_back(Query{f.object, f.predicate + relations, f.timestamp, f.subject, true});
  }
  return queries;
}

void write_vocabulary(const fs::path& file, const NameMap& names) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  for (std::size_t id = 0; id < names.size(); ++id) out << names.name(id) << '\t' << id << '\n';
}

NameMap read_vocabulary(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  NameMap names;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto tab = text.rfind('\t');
    const auto id = tab == std::string::npos ? std::nullopt
                                             : parse_int<std::size_t>(std::string_view(text).substr(tab + 1));
    if (!id) throw ParseError(file.string(), line, "expected 'name<TAB>id'");
    if (*id != names.size()) throw ParseError(file.string(), line, "ids must be dense and in order");
    if (names.intern(text.substr(0, tab)) != *id) throw ParseError(file.string(), line, "duplicate name");
  }
  return names;
}

std::string content_hash(const DatasetSplit& split) {
  Sha256 h;
  const std::pair<const char*, const std::vector<Quadruple>*> parts[] = {
      {"train", &split.train}, {"valid", &split.valid}, {"test", &split.test}};
  for (const auto& [label, facts] : parts) {
    h.update(label);
    for (const auto& q : *facts) {
      const std::uint32_t row[4] = {q.subject, q.predicate, q.object, q.timestamp};
      h.update(std::as_bytes(std::span(row)));
    }
  }
  return h.hex();
}

std::string vocabulary_hash(const Vocabularies& vocabs) {
  Sha256 h;
  for (const NameMap* map : {&vocabs.entities, &vocabs.relations, &vocabs.timestamps}) {
    h.update("\x1e");
    for (const auto& name : map->names()) {
      h.update(name);
      h.update("\n");
    }
  }
  return h.hex();
}

void write_prepared(const Dataset& dataset, const fs::path& out_dir,
                    const std::map<std::string, std::string>& extra) {
  fs::create_directories(out_dir);
  write_vocabulary(out_dir / "entities.tsv", dataset.vocabs.entities);
  write_vocabulary(out_dir / "relations.tsv", dataset.vocabs.relations);
  write_vocabulary(out_dir / "timestamps.tsv", dataset.vocabs.timestamps);

  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["source"] = dataset.source.string();
  manifest["granularity"] = granularity_label(dataset.split.granularity);
  manifest["entity_count"] = dataset.vocabs.entity_count();
  manifest["relation_count"] = dataset.vocabs.relation_count();
  manifest["time_count"] = dataset.vocabs.time_count();
  manifest["unknown_time"] =
      dataset.vocabs.unknown_time ? nlohmann::ordered_json(*dataset.vocabs.unknown_time) : nullptr;
  manifest["splits"] = {{"train", dataset.split.train.size()},
                        {"valid", dataset.split.valid.size()},
                        {"test", dataset.split.test.size()}};
  manifest["content_hash"] = content_hash(dataset.split);
  manifest["vocabulary_hash"] = vocabulary_hash(dataset.vocabs);
  manifest["vocabulary_files"] = {
      {"entities", "entities.tsv"}, {"relations", "relations.tsv"}, {"timestamps", "timestamps.tsv"}};
  if (!extra.empty()) manifest["config"] = extra;

  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (out_dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace ecechain::data
