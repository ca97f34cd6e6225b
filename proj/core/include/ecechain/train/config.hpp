#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ecechain/data/dataset.hpp"
#include "ecechain/eval/ranking.hpp"
#include "ecechain/graph/ece.hpp"
#include "ecechain/model/config.hpp"

namespace ecechain::train {

enum class DecayMode { Decoupled, Coupled };
// Whether evaluation masks query timestamps; Auto masks exactly when every
// training query was masked (time_mask_rate = 1).
enum class QueryMask { Auto, On, Off };

DecayMode parse_decay_mode(std::string_view label);
std::string_view decay_mode_label(DecayMode mode);
QueryMask parse_query_mask(std::string_view label);
std::string_view query_mask_label(QueryMask mode);

/// Every knob of a run. Defaults follow the full-scale setting.
struct TrainConfig {
  // model
  std::size_t dim = 320;
  std::size_t heads = 4;
  std::size_t encoder_units = 3;
  std::size_t mixer_units = 6;
  std::size_t max_neighbors = 50;
  std::size_t ff_hidden = 1024;
  std::size_t mixer_hidden = 1024;
  double ln_eps = 1e-5;

  // optimisation
  std::size_t batch_size = 512;
  double lr = 0.01;
  double weight_decay = 0.01;
  DecayMode decay_mode = DecayMode::Decoupled;
  std::size_t max_epochs = 300;
  double warmup_fraction = 0.10;
  double time_loss_weight = 1.0;
  double time_mask_rate = 1.0;
  std::uint64_t seed = 0;
  std::size_t patience = 20;
  int precision = 32;

  // chains
  bool history_only = true;
  bool strict_filtering = false;

  // data and evaluation
  std::string dataset;
  std::string out_dir = "run";
  data::FileFormat format = data::FileFormat::Auto;
  data::Granularity granularity = data::Granularity::Index;
  eval::Protocol protocol = eval::Protocol::Filtered;
  eval::TiePolicy tie_policy = eval::TiePolicy::Mean;
  std::size_t device_threads = 1;
  std::size_t eval_batch_size = 256;
  QueryMask eval_query_mask = QueryMask::Auto;

  /// Throws ConfigError on an invalid combination.
  void validate() const;

  model::ModelConfig model_config(const data::Vocabularies& vocabs) const;
  graph::EceOptions ece_options() const;
  bool eval_masks_query_time() const;
};

/// Sets one key from its textual value. Throws ConfigError for unknown keys
/// or unparseable values.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);

/// Flat "key = value" text; '#' starts a comment, blank lines are skipped.
/// Throws ParseError naming the line for malformed or unknown entries.
TrainConfig parse_config(std::string_view text, const std::string& origin = "<config>");
TrainConfig load_config(const std::filesystem::path& file);

/// All keys with their current values, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config);

/// config_entries rendered as parseable text.
std::string render_config(const TrainConfig& config);

}  // namespace ecechain::train
