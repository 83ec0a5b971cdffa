#include "bmamba/synthetic.hpp"

#include <cmath>

#include "bmamba/errors.hpp"

namespace bmamba::synthetic {

double SyntheticSpec::noise_for(Modality m) const {
  const double own = modality_noise[static_cast<std::size_t>(m)];
  return own >= 0.0 ? own : noise;
}

void SyntheticSpec::validate() const {
  if (classes < 2) throw ConfigError("synthetic task needs at least two classes");
  if (utterances < 1 || dialogues < 1) throw ConfigError("synthetic task needs dialogues with utterances");
  for (Index w : widths) {
    if (w < 1) throw ConfigError("synthetic modality widths must be positive");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (!(separation > 0.0)) throw ConfigError("separation must be positive");
}

SyntheticWorld make_world(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 1));
  SyntheticWorld world;
  world.prototypes.resize(spec.classes, kLatentWidth);
  std::bernoulli_distribution sign(0.5);
  for (Index i = 0; i < world.prototypes.size(); ++i) {
    world.prototypes.data()[i] = sign(rng) ? spec.separation : -spec.separation;
  }
  for (Modality m : kAllModalities) {
    auto& map = world.maps[static_cast<std::size_t>(m)];
    map.resize(kLatentWidth, spec.widths[static_cast<std::size_t>(m)]);
    fill_normal(map, 1.0 / std::sqrt(static_cast<double>(kLatentWidth)), rng);
  }
  return world;
}

Dataset generate(const SyntheticSpec& spec) {
  const SyntheticWorld world = make_world(spec);
  std::array<Matrix, 3> images;
  for (Modality m : kAllModalities) images[static_cast<std::size_t>(m)] = world.image(m);

  Rng rng(derive_seed(spec.seed, 2));
  std::uniform_int_distribution<int> pick(0, spec.classes - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset data;
  data.classes = spec.classes;
  data.widths = spec.widths;
  data.dialogues.reserve(static_cast<std::size_t>(spec.dialogues));
  for (Index d = 0; d < spec.dialogues; ++d) {
    EmotionBatch batch;
    batch.classes = spec.classes;
    for (Modality m : kAllModalities) batch.feature(m).resize(spec.utterances, spec.widths[static_cast<std::size_t>(m)]);
    for (Index u = 0; u < spec.utterances; ++u) {
      const int c = pick(rng);
      batch.labels.push_back(c);
      for (Modality m : kAllModalities) {
        const auto mi = static_cast<std::size_t>(m);
        const double sigma = spec.noise_for(m);
        auto row = batch.features[mi].row(u);
        row = images[mi].row(c);
        for (Index j = 0; j < row.size(); ++j) row[j] += sigma * gauss(rng);
      }
    }
    data.dialogues.push_back(std::move(batch));
  }
  return data;
}

}  // namespace bmamba::synthetic
