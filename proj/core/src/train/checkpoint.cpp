#include "ecechain/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "ecechain/errors.hpp"
#include "ecechain/util/hash.hpp"

namespace ecechain::train {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

constexpr char kMagic[8] = {'E', 'C', 'E', 'C', 'K', 'P', 'T', '1'};

template <typename Stored>
void append_values(std::string& payload, const std::vector<double>& values) {
  for (double v : values) {
    const Stored s = static_cast<Stored>(v);
    char raw[sizeof(Stored)];
    std::memcpy(raw, &s, sizeof(Stored));
    payload.append(raw, sizeof(Stored));
  }
}

template <typename Stored>
std::vector<double> read_values(std::string_view payload, std::size_t offset, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Stored s;
    std::memcpy(&s, payload.data() + offset + i * sizeof(Stored), sizeof(Stored));
    out[i] = static_cast<double>(s);
  }
  return out;
}

void write_section(nlohmann::ordered_json& directory, std::string& payload, const char* section,
                   const std::vector<StoredTensor>& tensors, int precision) {
  for (const auto& t : tensors) {
    if (t.values.size() != nn::element_count(t.shape)) {
      throw ContractError("checkpoint tensor " + t.name + " has " + std::to_string(t.values.size()) +
                          " values for shape " + nn::to_string(t.shape));
    }
    nlohmann::ordered_json entry;
    entry["section"] = section;
    entry["name"] = t.name;
    entry["shape"] = t.shape;
    entry["offset"] = payload.size();
    directory.push_back(entry);
    if (precision == 64) {
      append_values<double>(payload, t.values);
    } else {
      append_values<float>(payload, t.values);
    }
  }
}

}  // namespace

TrainConfig Checkpoint::train_config() const {
  TrainConfig cfg;
  for (const auto& [k, v] : config) set_config_value(cfg, k, v);
  return cfg;
}

data::Vocabularies Checkpoint::vocabularies() const {
  data::Vocabularies v;
  for (const auto& n : entities) v.entities.intern(n);
  for (const auto& n : relations) v.relations.intern(n);
  for (const auto& n : timestamps) v.timestamps.intern(n);
  v.unknown_time = unknown_time;
  return v;
}

void store_vocabularies(Checkpoint& checkpoint, const data::Vocabularies& vocabs) {
  checkpoint.entities.assign(vocabs.entities.names().begin(), vocabs.entities.names().end());
  checkpoint.relations.assign(vocabs.relations.names().begin(), vocabs.relations.names().end());
  checkpoint.timestamps.assign(vocabs.timestamps.names().begin(), vocabs.timestamps.names().end());
  checkpoint.unknown_time = vocabs.unknown_time;
  checkpoint.vocabulary_hash = data::vocabulary_hash(vocabs);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file) {
  if (checkpoint.precision != 32 && checkpoint.precision != 64) {
    throw ContractError("checkpoint precision must be 32 or 64");
  }
  nlohmann::ordered_json header;
  header["format"] = "ecechain-checkpoint";
  header["version"] = 1;
  header["precision"] = checkpoint.precision;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [k, v] : checkpoint.config) config[k] = v;
  header["config"] = config;
  header["vocabulary_hash"] = checkpoint.vocabulary_hash;
  header["entities"] = checkpoint.entities;
  header["relations"] = checkpoint.relations;
  header["timestamps"] = checkpoint.timestamps;
  header["unknown_time"] = checkpoint.unknown_time ? nlohmann::ordered_json(*checkpoint.unknown_time)
                                                   : nlohmann::ordered_json(nullptr);
  header["optimizer_step"] = checkpoint.optimizer_step;
  header["best"] = {{"epoch", checkpoint.best.epoch}, {"valid_mrr", checkpoint.best.valid_mrr}};

  std::string payload;
  nlohmann::ordered_json directory = nlohmann::ordered_json::array();
  write_section(directory, payload, "parameter", checkpoint.parameters, checkpoint.precision);
  write_section(directory, payload, "first_moment", checkpoint.first_moments, checkpoint.precision);
  write_section(directory, payload, "inf_norm", checkpoint.inf_norms, checkpoint.precision);
  header["tensors"] = directory;
  header["payload_bytes"] = payload.size();

  const std::string text = header.dump();
  const std::uint64_t length = text.size();
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + file.string());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), std::streamsize(text.size()));
  out.write(payload.data(), std::streamsize(payload.size()));
  if (!out) throw IoError("failed writing checkpoint " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + file.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string origin = file.string();
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(origin + ": not a checkpoint file");
  }
  std::uint64_t length = 0;
  std::memcpy(&length, bytes.data() + sizeof(kMagic), sizeof(length));
  const std::size_t header_start = sizeof(kMagic) + sizeof(length);
  if (length > bytes.size() - header_start) throw ParseError(origin + ": truncated header");

  Checkpoint cp;
  try {
    const auto header = nlohmann::ordered_json::parse(bytes.substr(header_start, length));
    cp.precision = header.at("precision").get<int>();
    if (cp.precision != 32 && cp.precision != 64) throw ParseError(origin + ": unsupported precision");
    for (const auto& [k, v] : header.at("config").items()) cp.config.emplace_back(k, v.get<std::string>());
    cp.vocabulary_hash = header.at("vocabulary_hash").get<std::string>();
    cp.entities = header.at("entities").get<std::vector<std::string>>();
    cp.relations = header.at("relations").get<std::vector<std::string>>();
    cp.timestamps = header.at("timestamps").get<std::vector<std::string>>();
    if (!header.at("unknown_time").is_null()) cp.unknown_time = header.at("unknown_time").get<data::TimeId>();
    cp.optimizer_step = header.at("optimizer_step").get<std::uint64_t>();
    cp.best.epoch = header.at("best").at("epoch").get<std::size_t>();
    cp.best.valid_mrr = header.at("best").at("valid_mrr").get<double>();

    const std::string_view payload = std::string_view(bytes).substr(header_start + length);
    if (payload.size() != header.at("payload_bytes").get<std::size_t>()) {
      throw ParseError(origin + ": payload size mismatch");
    }
    const std::size_t width = cp.precision == 64 ? 8 : 4;
    for (const auto& entry : header.at("tensors")) {
      StoredTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<nn::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = nn::element_count(t.shape);
      if (offset > payload.size() || count * width > payload.size() - offset) {
        throw ParseError(origin + ": tensor " + t.name + " exceeds the payload");
      }
      t.values = cp.precision == 64 ? read_values<double>(payload, offset, count)
                                    : read_values<float>(payload, offset, count);
      const auto section = entry.at("section").get<std::string>();
      if (section == "parameter") {
        cp.parameters.push_back(std::move(t));
      } else if (section == "first_moment") {
        cp.first_moments.push_back(std::move(t));
      } else if (section == "inf_norm") {
        cp.inf_norms.push_back(std::move(t));
      } else {
        throw ParseError(origin + ": unknown tensor section '" + section + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": corrupt header: " + e.what());
  }
  if (data::vocabulary_hash(cp.vocabularies()) != cp.vocabulary_hash) {
    throw ParseError(origin + ": vocabulary hash mismatch");
  }
  return cp;
}

std::string file_hash(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got > 0) h.update(std::string_view(buf, got));
  }
  return h.hex();
}

template <typename T>
std::vector<StoredTensor> capture(const nn::ParameterGroup<T>& params) {
  std::vector<StoredTensor> out;
  for (const auto& e : params.entries()) {
    const auto v = e.tensor.values();
    out.push_back({e.name, e.tensor.shape(), std::vector<double>(v.begin(), v.end())});
  }
  return out;
}

template <typename T>
std::vector<StoredTensor> capture_state(const nn::ParameterGroup<T>& params, std::span<const std::vector<T>> blocks) {
  const auto entries = params.entries();
  if (blocks.size() != entries.size()) throw ContractError("optimizer state does not match the parameter group");
  std::vector<StoredTensor> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.push_back({entries[i].name, entries[i].tensor.shape(), std::vector<double>(blocks[i].begin(), blocks[i].end())});
  }
  return out;
}

template <typename T>
void restore(nn::ParameterGroup<T>& params, std::span<const StoredTensor> stored) {
  for (const auto& t : stored) {
    if (!params.contains(t.name)) throw ContractError("checkpoint tensor " + t.name + " has no matching parameter");
  }
  for (auto& e : params.entries()) {
    const StoredTensor* match = nullptr;
    for (const auto& t : stored) {
      if (t.name == e.name) match = &t;
    }
    if (match == nullptr) throw ContractError("checkpoint lacks parameter " + e.name);
    if (match->shape != e.tensor.shape()) {
      throw ContractError("parameter " + e.name + " has shape " + nn::to_string(e.tensor.shape()) +
                          " but the checkpoint stores " + nn::to_string(match->shape));
    }
    auto dst = e.tensor.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(match->values[i]);
  }
}

template <typename T>
model::EceFormer<T> restore_model(const Checkpoint& checkpoint) {
  const auto cfg = checkpoint.train_config();
  model::EceFormer<T> m(cfg.model_config(checkpoint.vocabularies()));
  restore<T>(m.parameters(), checkpoint.parameters);
  return m;
}

template std::vector<StoredTensor> capture<float>(const nn::ParameterGroup<float>&);
template std::vector<StoredTensor> capture<double>(const nn::ParameterGroup<double>&);
template std::vector<StoredTensor> capture_state<float>(const nn::ParameterGroup<float>&,
                                                        std::span<const std::vector<float>>);
template std::vector<StoredTensor> capture_state<double>(const nn::ParameterGroup<double>&,
                                                         std::span<const std::vector<double>>);
template void restore<float>(nn::ParameterGroup<float>&, std::span<const StoredTensor>);
template void restore<double>(nn::ParameterGroup<double>&, std::span<const StoredTensor>);
template model::EceFormer<float> restore_model<float>(const Checkpoint&);
template model::EceFormer<double> restore_model<double>(const Checkpoint&);

}  // namespace ecechain::train
