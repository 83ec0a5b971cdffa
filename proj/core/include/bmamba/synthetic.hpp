#pragma once

// Synthetic multi-modal conversations with a known class structure.
//
// Each class c owns a latent prototype of +/- separation entries. Every
// modality sees the prototype through its own fixed random linear map, plus
// i.i.d. Gaussian noise, so classes are linearly separable per modality
// whenever the noise is small against the separation.

#include <array>
#include <cstdint>

#include "bmamba/data.hpp"

namespace bmamba::synthetic {

inline constexpr Index kLatentWidth = 16;

struct SyntheticSpec {
  int classes = 4;
  Index utterances = 10;  // per dialogue
  Index dialogues = 200;
  std::array<Index, 3> widths{32, 24, 16};
  double noise = 0.1;
  std::array<double, 3> modality_noise{-1.0, -1.0, -1.0};  // negative: use `noise`
  double separation = 1.0;
  std::uint64_t seed = 1;

  double noise_for(Modality m) const;
  void validate() const;
};

/// The fixed part of a synthetic task: prototypes (classes x latent) and one
/// latent -> modality map per modality.
struct SyntheticWorld {
  Matrix prototypes;
  std::array<Matrix, 3> maps;

  /// Noise-free feature row of class c in modality m.
  Matrix image(Modality m) const { return prototypes * maps[static_cast<std::size_t>(m)]; }
};

SyntheticWorld make_world(const SyntheticSpec& spec);

/// Deterministic in spec.seed. Dialogues are drawn in sequence, so a longer
/// request extends a shorter one with the same seed.
Dataset generate(const SyntheticSpec& spec);

}  // namespace bmamba::synthetic
