#include "ecechain/model/config.hpp"

#include <string>

#include "ecechain/errors.hpp"

namespace ecechain::model {

void ModelConfig::validate() const {
  if (entity_count == 0) throw ConfigError("model: entity vocabulary is empty");
  if (relation_count == 0) throw ConfigError("model: relation vocabulary is empty");
  if (time_count == 0) throw ConfigError("model: timestamp vocabulary is empty");
  if (dim == 0 || ff_hidden == 0 || mixer_hidden == 0) throw ConfigError("model: widths must be positive");
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("model: heads (" + std::to_string(heads) + ") must divide dim (" + std::to_string(dim) + ")");
  }
  if (encoder_units == 0) throw ConfigError("model: at least one encoder unit is required");
  if (!(ln_eps > 0.0)) throw ConfigError("model: ln_eps must be positive");
}

std::size_t TokenSpace::entity(std::size_t e) const {
  if (e >= entities_) throw IndexError("token space: entity " + std::to_string(e) + " out of range");
  return e;
}

std::size_t TokenSpace::relation(std::size_t r) const {
  if (r >= 2 * relations_) throw IndexError("token space: relation " + std::to_string(r) + " out of range");
  return entities_ + r;
}

std::size_t TokenSpace::time(std::size_t t) const {
  if (t >= times_) throw IndexError("token space: timestamp " + std::to_string(t) + " out of range");
  return time_offset() + t;
}

}  // namespace ecechain::model
