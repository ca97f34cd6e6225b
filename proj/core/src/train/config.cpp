#include "ecechain/train/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>

#include "ecechain/errors.hpp"

namespace ecechain::train {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot read '" + std::string(value) + "' as " +
                    std::string(expected));
}

std::size_t to_count(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a non-negative integer");
  return out;
}

double to_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

std::string real_text(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string_view format_label(data::FileFormat f) {
  switch (f) {
    case data::FileFormat::Ids:
      return "ids";
    case data::FileFormat::Names:
      return "names";
    case data::FileFormat::Auto:
      break;
  }
  return "auto";
}

using Setter = std::function<void(TrainConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const TrainConfig&)>;

struct Field {
  std::string_view key;
  Setter set;
  Getter get;
};

#define ECECHAIN_COUNT(name)                                                              \
  Field{#name, [](TrainConfig& c, std::string_view k, std::string_view v) { c.name = to_count(k, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.name); }}
#define ECECHAIN_REAL(name)                                                              \
  Field{#name, [](TrainConfig& c, std::string_view k, std::string_view v) { c.name = to_real(k, v); }, \
        [](const TrainConfig& c) { return real_text(c.name); }}
#define ECECHAIN_BOOL(name)                                                              \
  Field{#name, [](TrainConfig& c, std::string_view k, std::string_view v) { c.name = to_bool(k, v); }, \
        [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      ECECHAIN_COUNT(dim),
      ECECHAIN_COUNT(heads),
      ECECHAIN_COUNT(encoder_units),
      ECECHAIN_COUNT(mixer_units),
      ECECHAIN_COUNT(max_neighbors),
      ECECHAIN_COUNT(ff_hidden),
      ECECHAIN_COUNT(mixer_hidden),
      ECECHAIN_REAL(ln_eps),
      ECECHAIN_COUNT(batch_size),
      ECECHAIN_REAL(lr),
      ECECHAIN_REAL(weight_decay),
      Field{"decay_mode",
            [](TrainConfig& c, std::string_view, std::string_view v) { c.decay_mode = parse_decay_mode(v); },
            [](const TrainConfig& c) { return std::string(decay_mode_label(c.decay_mode)); }},
      ECECHAIN_COUNT(max_epochs),
      ECECHAIN_REAL(warmup_fraction),
      ECECHAIN_REAL(time_loss_weight),
      ECECHAIN_REAL(time_mask_rate),
      ECECHAIN_COUNT(seed),
      ECECHAIN_COUNT(patience),
      Field{"precision",
            [](TrainConfig& c, std::string_view k, std::string_view v) {
              const auto p = to_count(k, v);
              if (p != 32 && p != 64) bad_value(k, v, "32 or 64");
              c.precision = int(p);
            },
            [](const TrainConfig& c) { return std::to_string(c.precision); }},
      ECECHAIN_BOOL(history_only),
      ECECHAIN_BOOL(strict_filtering),
      Field{"dataset", [](TrainConfig& c, std::string_view, std::string_view v) { c.dataset = std::string(v); },
            [](const TrainConfig& c) { return c.dataset; }},
      Field{"out_dir", [](TrainConfig& c, std::string_view, std::string_view v) { c.out_dir = std::string(v); },
            [](const TrainConfig& c) { return c.out_dir; }},
      Field{"format",
            [](TrainConfig& c, std::string_view, std::string_view v) { c.format = data::parse_file_format(v); },
            [](const TrainConfig& c) { return std::string(format_label(c.format)); }},
      Field{"granularity",
            [](TrainConfig& c, std::string_view, std::string_view v) { c.granularity = data::parse_granularity(v); },
            [](const TrainConfig& c) { return std::string(data::granularity_label(c.granularity)); }},
      Field{"protocol",
            [](TrainConfig& c, std::string_view, std::string_view v) { c.protocol = eval::parse_protocol(v); },
            [](const TrainConfig& c) { return std::string(eval::protocol_label(c.protocol)); }},
      Field{"tie_policy",
            [](TrainConfig& c, std::string_view, std::string_view v) { c.tie_policy = eval::parse_tie_policy(v); },
            [](const TrainConfig& c) { return std::string(eval::tie_policy_label(c.tie_policy)); }},
      ECECHAIN_COUNT(device_threads),
      ECECHAIN_COUNT(eval_batch_size),
      Field{"eval_query_mask",
            [](TrainConfig& c, std::string_view, std::string_view v) { c.eval_query_mask = parse_query_mask(v); },
            [](const TrainConfig& c) { return std::string(query_mask_label(c.eval_query_mask)); }},
  };
  return table;
}

#undef ECECHAIN_COUNT
#undef ECECHAIN_REAL
#undef ECECHAIN_BOOL

}  // namespace

DecayMode parse_decay_mode(std::string_view label) {
  if (label == "decoupled") return DecayMode::Decoupled;
  if (label == "coupled") return DecayMode::Coupled;
  throw ConfigError("unknown decay mode '" + std::string(label) + "' (expected decoupled or coupled)");
}

std::string_view decay_mode_label(DecayMode mode) {
  return mode == DecayMode::Coupled ? "coupled" : "decoupled";
}

QueryMask parse_query_mask(std::string_view label) {
  if (label == "auto") return QueryMask::Auto;
  if (label == "on") return QueryMask::On;
  if (label == "off") return QueryMask::Off;
  throw ConfigError("unknown query mask mode '" + std::string(label) + "' (expected auto, on or off)");
}

std::string_view query_mask_label(QueryMask mode) {
  switch (mode) {
    case QueryMask::On:
      return "on";
    case QueryMask::Off:
      return "off";
    case QueryMask::Auto:
      break;
  }
  return "auto";
}

bool TrainConfig::eval_masks_query_time() const {
  if (eval_query_mask == QueryMask::Auto) return time_mask_rate >= 1.0;
  return eval_query_mask == QueryMask::On;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(dim > 0 && heads > 0 && dim % heads == 0, "dim must be a positive multiple of heads");
  require(encoder_units > 0 && mixer_units > 0, "encoder_units and mixer_units must be positive");
  require(max_neighbors > 0, "max_neighbors must be positive");
  require(ff_hidden > 0 && mixer_hidden > 0, "hidden widths must be positive");
  require(ln_eps > 0.0, "ln_eps must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(lr > 0.0, "lr must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(max_epochs > 0, "max_epochs must be positive");
  require(warmup_fraction > 0.0 && warmup_fraction < 1.0, "warmup_fraction must lie in (0, 1)");
  require(time_loss_weight >= 0.0, "time_loss_weight must be non-negative");
  require(time_mask_rate >= 0.0 && time_mask_rate <= 1.0, "time_mask_rate must lie in [0, 1]");
  require(patience > 0, "patience must be positive");
  require(precision == 32 || precision == 64, "precision must be 32 or 64");
  require(device_threads > 0, "device_threads must be positive");
  require(eval_batch_size > 0, "eval_batch_size must be positive");
}

model::ModelConfig TrainConfig::model_config(const data::Vocabularies& vocabs) const {
  model::ModelConfig m;
  m.entity_count = vocabs.entity_count();
  m.relation_count = vocabs.relation_count();
  m.time_count = vocabs.time_count();
  m.dim = dim;
  m.heads = heads;
  m.ff_hidden = ff_hidden;
  m.mixer_hidden = mixer_hidden;
  m.encoder_units = encoder_units;
  m.mixer_units = mixer_units;
  m.max_neighbors = max_neighbors;
  m.ln_eps = ln_eps;
  return m;
}

graph::EceOptions TrainConfig::ece_options() const {
  graph::EceOptions o;
  o.max_neighbors = max_neighbors;
  o.history_only = history_only;
  o.strict_filtering = strict_filtering;
  return o;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, key, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text, const std::string& origin) {
  TrainConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto end = text.find('\n');
    std::string_view line = text.substr(0, end);
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(origin, line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(origin, line_no, "missing key");
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read config " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), file.string());
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(std::string(f.key), f.get(config));
  return out;
}

std::string render_config(const TrainConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace ecechain::train
