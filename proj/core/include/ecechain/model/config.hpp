#pragma once

#include <cstddef>

namespace ecechain::model {

struct ModelConfig {
  std::size_t entity_count = 0;
  // Base relations; the embedding table holds 2x for reciprocals.
  std::size_t relation_count = 0;
  std::size_t time_count = 0;

  std::size_t dim = 320;
  std::size_t heads = 4;
  std::size_t ff_hidden = 1024;
  std::size_t mixer_hidden = 1024;
  std::size_t encoder_units = 3;
  std::size_t mixer_units = 6;
  std::size_t max_neighbors = 50;
  double ln_eps = 1e-5;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Row layout of the shared semantic embedding table:
/// entities | relations (base then reciprocal) | timestamps | CLS MASK PAD.
class TokenSpace {
 public:
  TokenSpace() = default;
  TokenSpace(std::size_t entities, std::size_t relations, std::size_t times)
      : entities_(entities), relations_(relations), times_(times) {}

  std::size_t entity(std::size_t e) const;
  std::size_t relation(std::size_t r) const;
  std::size_t time(std::size_t t) const;
  std::size_t cls() const { return special_offset(); }
  std::size_t mask() const { return special_offset() + 1; }
  std::size_t pad() const { return special_offset() + 2; }

  std::size_t entity_offset() const { return 0; }
  std::size_t time_offset() const { return entities_ + 2 * relations_; }
  std::size_t size() const { return special_offset() + 3; }

 private:
  std::size_t special_offset() const { return entities_ + 2 * relations_ + times_; }

  std::size_t entities_ = 0;
  std::size_t relations_ = 0;
  std::size_t times_ = 0;
};

}  // namespace ecechain::model
