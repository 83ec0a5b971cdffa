#include "bmamba/data.hpp"

#include <string>

#include "bmamba/errors.hpp"

namespace bmamba {

void EmotionBatch::validate(const std::vector<Modality>& required) const {
  if (labels.empty()) throw ConfigError("dialogue has no utterances");
  for (Modality m : required) {
    const Matrix& f = feature(m);
    if (f.rows() != length()) {
      throw ConfigError(std::string(to_string(m)) + " features have " + std::to_string(f.rows()) +
                        " rows for " + std::to_string(length()) + " labels");
    }
    if (!f.allFinite()) throw ConfigError(std::string(to_string(m)) + " features contain non-finite values");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw ConfigError("label " + std::to_string(y) + " outside [0, classes)");
  }
}

std::size_t Dataset::utterances() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.labels.size();
  return n;
}

}  // namespace bmamba
