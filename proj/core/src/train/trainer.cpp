#include "ecechain/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "ecechain/errors.hpp"
#include "ecechain/eval/evaluator.hpp"
#include "ecechain/graph/ece.hpp"
#include "ecechain/model/eceformer.hpp"
#include "ecechain/train/adamax.hpp"
#include "ecechain/train/schedule.hpp"
#include "ecechain/util/rng.hpp"

namespace ecechain::train {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5A1F;
constexpr std::uint64_t kMaskStream = 0x3A5C;
constexpr std::uint64_t kChainStream = 0xC4A1;

template <typename T>
FitResult fit_with(const TrainConfig& config, const data::Dataset& dataset, const EpochSink& on_epoch) {
  const auto& vocabs = dataset.vocabs;
  model::EceFormer<T> model(config.model_config(vocabs));
  model.initialize(config.seed);

  const auto index = graph::build_index(dataset.split.train, vocabs);
  const auto queries = data::augment_reciprocal(dataset.split.train, vocabs);
  if (queries.empty()) throw ConfigError("training split is empty");
  const auto valid = data::augment_reciprocal(dataset.split.valid, vocabs);
  const eval::FilterIndex filter(dataset.split, vocabs);
  const auto ece_options = config.ece_options();

  eval::EvalOptions eval_options;
  eval_options.protocol = config.protocol;
  eval_options.tie = config.tie_policy;
  eval_options.ece = ece_options;
  eval_options.seed = config.seed;
  eval_options.batch_size = config.eval_batch_size;
  eval_options.threads = config.device_threads;
  eval_options.mask_query_time = config.eval_masks_query_time();

  AdamaxOptions adamax_options;
  adamax_options.weight_decay = config.weight_decay;
  adamax_options.decay_mode = config.decay_mode;
  Adamax<T> optimizer(model.parameters(), adamax_options);

  const std::size_t batches = (queries.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * config.max_epochs;
  std::size_t global_step = 0;

  FitResult result;
  std::vector<StoredTensor> best_parameters;
  double best_mrr = -1.0;
  std::size_t stale = 0;
  std::vector<std::size_t> order(queries.size());
  std::vector<graph::Ece> eces;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = derive_rng(config.seed, {kShuffleStream, epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord record;
    record.epoch = epoch;
    double loss_sum = 0.0, link_sum = 0.0, time_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(queries.size(), begin + config.batch_size);
      Rng mask_rng = derive_rng(config.seed, {kMaskStream, epoch, b});
      const auto masked = graph::mask_batch(end - begin, config.time_mask_rate, mask_rng);
      eces.clear();
      for (std::size_t pos = begin; pos < end; ++pos) {
        Rng chain_rng = derive_rng(config.seed, {kChainStream, epoch, pos});
        eces.push_back(graph::build_ece(queries[order[pos]], index, ece_options, masked[pos - begin], chain_rng));
      }
      const double lr = lr_schedule(global_step, total_steps, config.lr, config.warmup_fraction);
      try {
        model.parameters().zero_grad();
        const auto terms = model.loss(eces, T(config.time_loss_weight));
        terms.total.backward();
        for (const auto& e : model.parameters().entries()) {
          for (const T g : e.tensor.grad()) {
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + e.name);
          }
        }
        const double n = double(end - begin);
        loss_sum += double(terms.total.item()) * n;
        link_sum += double(terms.link.item()) * n;
        time_sum += double(terms.time.item()) * n;
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
      }
      optimizer.step(lr);
      ++global_step;
      record.lr = lr;
    }
    record.train_loss = loss_sum / double(queries.size());
    record.link_loss = link_sum / double(queries.size());
    record.time_loss = time_sum / double(queries.size());

    bool keep = true;
    if (!valid.empty()) {
      record.valid = eval::evaluate<T>(model, valid, index, filter, eval_options).overall;
      record.improved = record.valid.mrr > best_mrr;
      // A tie keeps the later, longer-trained weights but does not reset patience.
      keep = record.valid.mrr >= best_mrr;
    } else {
      record.improved = true;
    }
    if (keep) {
      best_mrr = record.valid.mrr;
      best_parameters = capture<T>(model.parameters());
      result.checkpoint.best = {epoch, record.valid.mrr};
    }
    if (record.improved) {
      stale = 0;
    } else {
      ++stale;
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (stale >= config.patience) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }

  auto& cp = result.checkpoint;
  cp.config = config_entries(config);
  cp.precision = config.precision;
  store_vocabularies(cp, vocabs);
  cp.parameters = std::move(best_parameters);
  cp.optimizer_step = optimizer.step_count();
  cp.first_moments = capture_state<T>(model.parameters(), optimizer.first_moments());
  cp.inf_norms = capture_state<T>(model.parameters(), optimizer.inf_norms());
  return result;
}

std::string fixed(double v) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << v;
  return out.str();
}

}  // namespace

FitResult fit(const TrainConfig& config, const data::Dataset& dataset, const EpochSink& on_epoch) {
  config.validate();
  if (config.precision == 64) return fit_with<double>(config, dataset, on_epoch);
  return fit_with<float>(config, dataset, on_epoch);
}

std::string metrics_header() {
  return "epoch train_loss link_loss time_loss lr valid_mrr valid_hits1 valid_hits3 valid_hits10";
}

std::string metrics_line(const EpochRecord& r) {
  std::ostringstream out;
  out << r.epoch << ' ' << fixed(r.train_loss) << ' ' << fixed(r.link_loss) << ' ' << fixed(r.time_loss) << ' '
      << r.lr << ' ' << fixed(r.valid.mrr) << ' ' << fixed(r.valid.hits1) << ' ' << fixed(r.valid.hits3) << ' '
      << fixed(r.valid.hits10);
  return out.str();
}

}  // namespace ecechain::train
