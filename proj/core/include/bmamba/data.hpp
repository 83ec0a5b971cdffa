#pragma once

#include <array>
#include <vector>

#include "bmamba/types.hpp"

namespace bmamba {

/// One dialogue: aligned per-utterance features for each modality plus the
/// utterance labels. Absent modalities are left as empty matrices.
struct EmotionBatch {
  std::array<Matrix, 3> features;
  std::vector<int> labels;
  int classes = 0;

  Index length() const { return static_cast<Index>(labels.size()); }
  const Matrix& feature(Modality m) const { return features[static_cast<std::size_t>(m)]; }
  Matrix& feature(Modality m) { return features[static_cast<std::size_t>(m)]; }

  /// Throws ConfigError unless every listed modality has one row per label
  /// and every label lies in [0, classes).
  void validate(const std::vector<Modality>& required) const;
};

struct Dataset {
  int classes = 0;
  std::array<Index, 3> widths{};  // feature width per modality, 0 when absent
  std::vector<EmotionBatch> dialogues;

  std::size_t utterances() const;
  Index width(Modality m) const { return widths[static_cast<std::size_t>(m)]; }
};

}  // namespace bmamba
