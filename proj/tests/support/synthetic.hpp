#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>

#include "ecechain/data/dataset.hpp"

namespace ecechain::fixtures {

/// Periodic temporal graph: at step t relation r = t mod relations is active
/// and every entity e links to (e + r + 1) mod entities. Steps [0, train)
/// train, the next valid steps validate, the remaining steps test.
inline data::Dataset periodic_dataset(std::size_t entities = 20, std::size_t relations = 4, std::size_t steps = 24,
                                      std::size_t train_steps = 20, std::size_t valid_steps = 2) {
  data::Dataset ds;
  for (std::size_t e = 0; e < entities; ++e) ds.vocabs.entities.intern("e" + std::to_string(e));
  for (std::size_t r = 0; r < relations; ++r) ds.vocabs.relations.intern("r" + std::to_string(r));
  for (std::size_t t = 0; t < steps; ++t) ds.vocabs.timestamps.intern(std::to_string(t));
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t r = t % relations;
    auto& split = t < train_steps ? ds.split.train : t < train_steps + valid_steps ? ds.split.valid : ds.split.test;
    for (std::size_t e = 0; e < entities; ++e) {
      split.push_back({data::EntityId(e), data::RelationId(r), data::EntityId((e + r + 1) % entities),
                       data::TimeId(t)});
    }
  }
  return ds;
}

/// Writes the splits as tab-separated name files train.txt, valid.txt, test.txt.
inline void write_named_splits(const data::Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const char* file, const std::vector<data::Quadruple>& facts) {
    std::ofstream out(dir / file);
    for (const auto& q : facts) {
      out << ds.vocabs.entities.name(q.subject) << '\t' << ds.vocabs.relations.name(q.predicate) << '\t'
          << ds.vocabs.entities.name(q.object) << '\t' << ds.vocabs.timestamps.name(q.timestamp) << '\n';
    }
  };
  dump("train.txt", ds.split.train);
  dump("valid.txt", ds.split.valid);
  dump("test.txt", ds.split.test);
}

}  // namespace ecechain::fixtures
