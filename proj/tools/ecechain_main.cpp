// Command-line front end: prepare, train, eval, predict.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ecechain/data/dataset.hpp"
#include "ecechain/errors.hpp"
#include "ecechain/eval/evaluator.hpp"
#include "ecechain/graph/ece.hpp"
#include "ecechain/train/checkpoint.hpp"
#include "ecechain/train/config.hpp"
#include "ecechain/train/trainer.hpp"
#include "ecechain/util/rng.hpp"

namespace fs = std::filesystem;
using namespace ecechain;

namespace {

constexpr std::uint64_t kPredictStream = 0x9D1C;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dataset;
  std::optional<std::string> out;
  std::optional<std::string> protocol;
  std::optional<std::size_t> device_threads;
  std::vector<std::string> settings;

  void apply(train::TrainConfig& config) const {
    for (const auto& kv : settings) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      train::set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) config.seed = *seed;
    if (dataset) config.dataset = *dataset;
    if (out) config.out_dir = *out;
    if (protocol) config.protocol = eval::parse_protocol(*protocol);
    if (device_threads) config.device_threads = *device_threads;
  }
};

void add_common(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--seed", o.seed, "Seed for every random draw");
  cmd.add_option("--dataset", o.dataset, "Dataset directory (default: $ECECHAIN_DATA)");
  cmd.add_option("--protocol", o.protocol, "Ranking protocol: raw or filtered");
  cmd.add_option("--device-threads", o.device_threads, "Worker threads for evaluation");
  cmd.add_option("--set", o.settings, "Override a config key (key=value), repeatable");
}

// Relative names are looked up under $ECECHAIN_DATA when not found as given.
fs::path resolve_dataset(const std::string& value) {
  const char* root = std::getenv("ECECHAIN_DATA");
  if (value.empty()) {
    if (root == nullptr || *root == '\0') throw ConfigError("no dataset given and ECECHAIN_DATA is not set");
    return root;
  }
  fs::path path(value);
  if (!fs::exists(path) && path.is_relative() && root != nullptr && *root != '\0' && fs::exists(fs::path(root) / path)) {
    return fs::path(root) / path;
  }
  if (!fs::is_directory(path)) throw IoError("dataset directory not found: " + value);
  return path;
}

data::Dataset load_for(const train::TrainConfig& config) {
  return data::load_dataset(resolve_dataset(config.dataset), config.format, config.granularity);
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

int run_prepare(const Overrides& o, const std::string& format, const std::string& granularity) {
  train::TrainConfig config;
  config.format = data::parse_file_format(format);
  config.granularity = data::parse_granularity(granularity);
  o.apply(config);
  const auto dataset = load_for(config);
  const fs::path out = config.out_dir;
  data::write_prepared(dataset, out,
                       {{"dataset", dataset.source.string()},
                        {"format", format},
                        {"granularity", std::string(data::granularity_label(config.granularity))}});
  std::cout << "entities " << dataset.vocabs.entity_count() << " relations " << dataset.vocabs.relation_count()
            << " timestamps " << dataset.vocabs.time_count() << " train " << dataset.split.train.size() << " valid "
            << dataset.split.valid.size() << " test " << dataset.split.test.size() << "\n"
            << "manifest " << (out / "manifest.json").string() << "\n";
  return 0;
}

int run_train(const std::string& config_file, const Overrides& o) {
  train::TrainConfig config = config_file.empty() ? train::TrainConfig{} : train::load_config(config_file);
  o.apply(config);
  config.validate();
  const auto dataset = load_for(config);
  const fs::path out = config.out_dir;
  fs::create_directories(out);
  write_text(out / "config.txt", train::render_config(config));

  std::ofstream log(out / "metrics.log", std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out / "metrics.log").string());
  log << train::metrics_header() << '\n';
  std::cout << train::metrics_header() << '\n';
  const auto result = train::fit(config, dataset, [&](const train::EpochRecord& r) {
    const auto line = train::metrics_line(r);
    log << line << '\n' << std::flush;
    std::cout << line << '\n' << std::flush;
  });

  const fs::path checkpoint = out / "model.ckpt";
  train::save_checkpoint(result.checkpoint, checkpoint);

  nlohmann::ordered_json manifest;
  manifest["dataset"] = dataset.source.string();
  manifest["content_hash"] = data::content_hash(dataset.split);
  manifest["vocabulary_hash"] = result.checkpoint.vocabulary_hash;
  manifest["epochs_run"] = result.history.size();
  manifest["stopped_early"] = result.stopped_early;
  manifest["best_epoch"] = result.checkpoint.best.epoch;
  manifest["best_valid_mrr"] = result.checkpoint.best.valid_mrr;
  manifest["checkpoint"] = checkpoint.filename().string();
  manifest["checkpoint_hash"] = train::file_hash(checkpoint);
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : train::config_entries(config)) cfg[k] = v;
  manifest["config"] = cfg;
  write_text(out / "run.json", manifest.dump(2) + "\n");

  std::cout << "best epoch " << result.checkpoint.best.epoch << " valid mrr " << result.checkpoint.best.valid_mrr
            << "\ncheckpoint " << checkpoint.string() << "\n";
  return 0;
}

struct Loaded {
  train::Checkpoint checkpoint;
  train::TrainConfig config;
  data::Dataset dataset;
  std::string hash;
};

Loaded load_checkpoint_and_data(const std::string& path, const Overrides& o) {
  Loaded l;
  l.checkpoint = train::load_checkpoint(path);
  l.hash = train::file_hash(path);
  l.config = l.checkpoint.train_config();
  o.apply(l.config);
  l.dataset = load_for(l.config);
  if (data::vocabulary_hash(l.dataset.vocabs) != l.checkpoint.vocabulary_hash) {
    throw ConfigError("dataset vocabulary does not match the checkpoint");
  }
  return l;
}

template <typename T>
eval::MetricReport evaluate_split(const Loaded& l, std::span<const data::Query> queries, bool time_diagnostics) {
  const auto model = train::restore_model<T>(l.checkpoint);
  const auto index = graph::build_index(l.dataset.split.train, l.dataset.vocabs);
  const eval::FilterIndex filter(l.dataset.split, l.dataset.vocabs);
  eval::EvalOptions options;
  options.protocol = l.config.protocol;
  options.tie = l.config.tie_policy;
  options.ece = l.config.ece_options();
  options.seed = l.config.seed;
  options.batch_size = l.config.eval_batch_size;
  options.threads = l.config.device_threads;
  options.mask_query_time = l.config.eval_masks_query_time();
  options.time_diagnostics = time_diagnostics;
  return eval::evaluate<T>(model, queries, index, filter, options);
}

int run_eval(const std::string& checkpoint, const std::string& split, const Overrides& o, const std::string& report,
             const std::string& rank_dump, bool time_diagnostics) {
  const auto l = load_checkpoint_and_data(checkpoint, o);
  const std::vector<data::Quadruple>* facts = nullptr;
  if (split == "train") facts = &l.dataset.split.train;
  if (split == "valid") facts = &l.dataset.split.valid;
  if (split == "test") facts = &l.dataset.split.test;
  if (facts == nullptr) throw ConfigError("unknown split '" + split + "' (expected train, valid or test)");
  const auto queries = data::augment_reciprocal(*facts, l.dataset.vocabs);
  if (queries.empty()) throw ConfigError("split '" + split + "' has no facts");

  const auto result = l.checkpoint.precision == 64 ? evaluate_split<double>(l, queries, time_diagnostics)
                                                   : evaluate_split<float>(l, queries, time_diagnostics);
  const std::string text = eval::render_report(result, split, l.hash, time_diagnostics);
  fs::path target = report;
  if (target.empty()) {
    target = fs::path(checkpoint).parent_path() /
             ("report_" + split + "_" + std::string(eval::protocol_label(l.config.protocol)) + ".json");
  }
  write_text(target, text);
  if (!rank_dump.empty()) eval::write_rank_dump(rank_dump, result, queries);
  std::cout << text << "report " << target.string() << "\n";
  return 0;
}

std::vector<std::string> split_query(const std::string& text) {
  std::vector<std::string> parts;
  const char sep = text.find('\t') != std::string::npos ? '\t' : ' ';
  std::string current;
  std::istringstream in(text);
  while (std::getline(in, current, sep)) {
    if (!current.empty()) parts.push_back(current);
  }
  return parts;
}

template <typename T>
std::vector<std::pair<std::size_t, double>> score_query(const Loaded& l, const data::Query& query) {
  const auto model = train::restore_model<T>(l.checkpoint);
  const auto index = graph::build_index(l.dataset.split.train, l.dataset.vocabs);
  nn::NoGradGuard no_grad;
  Rng rng = derive_rng(l.config.seed, {kPredictStream});
  const std::vector<graph::Ece> eces{
      graph::build_ece(query, index, l.config.ece_options(), l.config.eval_masks_query_time(), rng)};
  const auto scores = model.entity_scores(model.represent(eces));
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t e = 0; e < scores.numel(); ++e) out.emplace_back(e, double(scores.values()[e]));
  return out;
}

int run_predict(const std::string& checkpoint, const std::string& query_text, const Overrides& o,
                std::size_t top_n) {
  const auto l = load_checkpoint_and_data(checkpoint, o);
  const auto& v = l.dataset.vocabs;
  const auto parts = split_query(query_text);
  if (parts.size() != 4) throw ParseError("query must have four fields: 's p ? t' or '? p o t'");
  auto lookup = [](const data::NameMap& map, const std::string& name, const char* what) {
    const auto id = map.find(name);
    if (!id) throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
    return *id;
  };
  data::Query query;
  const auto relation = lookup(v.relations, parts[1], "relation");
  query.timestamp = data::TimeId(lookup(v.timestamps, parts[3], "timestamp"));
  if (parts[2] == "?" && parts[0] != "?") {
    query.entity = data::EntityId(lookup(v.entities, parts[0], "entity"));
    query.relation = data::RelationId(relation);
  } else if (parts[0] == "?" && parts[2] != "?") {
    query.entity = data::EntityId(lookup(v.entities, parts[2], "entity"));
    query.relation = data::RelationId(relation + v.relation_count());
    query.reciprocal = true;
  } else {
    throw ParseError("exactly one of subject and object must be '?'");
  }
  // No known answer: the chain keeps every neighbour.
  query.answer = data::EntityId(v.entity_count());

  auto scored = l.checkpoint.precision == 64 ? score_query<double>(l, query) : score_query<float>(l, query);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t n = std::min(top_n, scored.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::cout << (i + 1) << '\t' << v.entities.name(scored[i].first) << '\t' << scored[i].second << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal knowledge graph reasoning over evolutionary event chains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ecechain 0.1.0");

  Overrides prepare_o, train_o, eval_o, predict_o;
  std::string format = "auto", granularity = "index";
  auto* prepare = app.add_subcommand("prepare", "Load a dataset, build vocabularies and write a manifest");
  add_common(*prepare, prepare_o);
  prepare->add_option("--out", prepare_o.out, "Output directory")->required();
  prepare->add_option("--format", format, "auto, ids or names");
  prepare->add_option("--granularity", granularity, "index, 15 mins, 24 hours or 1 year");

  std::string config_file;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint plus metrics log");
  add_common(*train_cmd, train_o);
  train_cmd->add_option("--config", config_file, "Flat key = value config file");
  train_cmd->add_option("--out", train_o.out, "Output directory");

  std::string eval_checkpoint, split = "test", report, rank_dump;
  bool time_diagnostics = false;
  auto* eval_cmd = app.add_subcommand("eval", "Rank every query of a split and write a JSON report");
  add_common(*eval_cmd, eval_o);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--split", split, "train, valid or test");
  eval_cmd->add_option("--out", report, "Report file (default: next to the checkpoint)");
  eval_cmd->add_option("--rank-dump", rank_dump, "Per-query rank file");
  eval_cmd->add_flag("--time-diagnostics", time_diagnostics, "Mask query times and report time-prediction loss");

  std::string predict_checkpoint, query;
  std::size_t top_n = 10;
  auto* predict = app.add_subcommand("predict", "Top-n entities for 's p ? t' or '? p o t'");
  add_common(*predict, predict_o);
  predict->add_option("--checkpoint", predict_checkpoint, "Checkpoint file")->required();
  predict->add_option("--query", query, "Query with names separated by spaces or tabs")->required();
  predict->add_option("--top-n", top_n, "Number of entities to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*prepare) return run_prepare(prepare_o, format, granularity);
    if (*train_cmd) return run_train(config_file, train_o);
    if (*eval_cmd) return run_eval(eval_checkpoint, split, eval_o, report, rank_dump, time_diagnostics);
    if (*predict) return run_predict(predict_checkpoint, query, predict_o, top_n);
  } catch (const std::exception& e) {
    std::cerr << "ecechain: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
