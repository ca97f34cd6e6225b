#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ecechain/data/dataset.hpp"
#include "ecechain/eval/ranking.hpp"
#include "ecechain/train/checkpoint.hpp"
#include "ecechain/train/config.hpp"

namespace ecechain::train {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double link_loss = 0.0;
  double time_loss = 0.0;
  double lr = 0.0;  // rate used by the last step of the epoch
  eval::MetricSummary valid;
  bool improved = false;
};

struct FitResult {
  // Parameters of the best validation epoch, optimizer state at the end.
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

using EpochSink = std::function<void(const EpochRecord&)>;

/// Trains on both directions of every training fact and keeps the epoch with
/// the best validation MRR. Precision follows config.precision. A non-finite
/// value aborts with NumericError naming the epoch and batch.
FitResult fit(const TrainConfig& config, const data::Dataset& dataset, const EpochSink& on_epoch = {});

/// Whitespace-separated "epoch train_loss link_loss time_loss lr mrr hits1 hits3 hits10".
std::string metrics_header();
std::string metrics_line(const EpochRecord& record);

}  // namespace ecechain::train
