#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecechain/data/dataset.hpp"
#include "ecechain/model/eceformer.hpp"
#include "ecechain/nn/parameters.hpp"
#include "ecechain/train/config.hpp"

namespace ecechain::train {

/// A named tensor detached from any graph. Values are held as double in
/// memory and written at the checkpoint's precision.
struct StoredTensor {
  std::string name;
  nn::Shape shape;
  std::vector<double> values;
};

struct BestRecord {
  std::size_t epoch = 0;
  double valid_mrr = 0.0;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> config;
  int precision = 32;
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  std::vector<std::string> timestamps;
  std::optional<data::TimeId> unknown_time;
  std::string vocabulary_hash;
  std::vector<StoredTensor> parameters;
  std::uint64_t optimizer_step = 0;
  std::vector<StoredTensor> first_moments;
  std::vector<StoredTensor> inf_norms;
  BestRecord best;

  TrainConfig train_config() const;
  data::Vocabularies vocabularies() const;
};

/// Single-file container: "ECECKPT1", u64 header length, JSON header, raw
/// little-endian payload. Writing the same checkpoint twice gives the same bytes.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file);
/// Throws IoError for unreadable files and ParseError for corrupt ones.
Checkpoint load_checkpoint(const std::filesystem::path& file);

/// SHA-256 of the file contents.
std::string file_hash(const std::filesystem::path& file);

/// Fills the vocabulary fields of a checkpoint.
void store_vocabularies(Checkpoint& checkpoint, const data::Vocabularies& vocabs);

template <typename T>
std::vector<StoredTensor> capture(const nn::ParameterGroup<T>& params);

template <typename T>
std::vector<StoredTensor> capture_state(const nn::ParameterGroup<T>& params, std::span<const std::vector<T>> blocks);

/// Copies stored values into matching parameters. Throws ContractError on a
/// missing name or a shape mismatch.
template <typename T>
void restore(nn::ParameterGroup<T>& params, std::span<const StoredTensor> stored);

/// Rebuilds a model from a checkpoint's config, vocabularies and parameters.
template <typename T>
model::EceFormer<T> restore_model(const Checkpoint& checkpoint);

}  // namespace ecechain::train
