#pragma once

// Plain-text run configuration: one `key = value` per line, '#' starts a
// comment. Every key has a default and unknown keys are rejected.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bmamba/synthetic.hpp"
#include "bmamba/train.hpp"

namespace bmamba::config {

/// Splits `key = value` lines; throws ConfigError on malformed lines or
/// repeated keys. Keys and values are trimmed.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

std::string format_double(double v);

struct RunConfig {
  std::uint64_t seed = 1;
  int classes = 4;
  int epochs = 200;
  double lr = 1e-4;
  double weight_decay = 1e-2;
  Index d_m = 32;
  Index state_size = 16;
  Index layers = 1;
  Index conv_width = 3;
  Index n_feature_nodes = 10;
  Index m_enhance_nodes = 30;
  Index d_z = 16;
  Index d_h = 16;
  double lambda = 1e-2;
  ssm::Discretization discretization = ssm::Discretization::zoh;
  fusion::FusionMode fusion = fusion::FusionMode::probability;
  model::BlsTarget bls_target = model::BlsTarget::self;
  Index hidden_fusion = 64;
  Index hidden_classifier = 128;
  Index probe_utterances = 256;
  std::vector<Modality> modalities{Modality::text, Modality::audio, Modality::video};
  // Dataset directories; empty means synthetic data.
  std::string train_data;
  std::string test_data;
  // Synthetic task.
  Index data_seed = -1;  // negative: use `seed`
  Index dialogues = 200;
  Index test_dialogues = 50;
  Index utterances = 10;
  Index width_text = 32;
  Index width_audio = 24;
  Index width_video = 16;
  double noise = 0.1;
  double noise_text = -1.0;  // negative: inherit `noise`
  double noise_audio = -1.0;
  double noise_video = -1.0;
  double separation = 1.0;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  /// Every key in a fixed order, one per line; parse(to_text()) == *this.
  std::string to_text() const;

  /// Synthetic spec covering dialogues + test_dialogues, seeded with
  /// data_seed (or `seed` when data_seed is negative).
  synthetic::SyntheticSpec synthetic_spec() const;
  /// Model configuration for data with the given per-modality widths.
  model::ModelConfig model_config(const std::array<Index, 3>& widths) const;
  train::TrainConfig train_config(const std::array<Index, 3>& widths) const;
};

/// Model shape as stored alongside checkpoints.
std::string model_config_text(const model::ModelConfig& cfg);
model::ModelConfig parse_model_config(std::string_view text);

}  // namespace bmamba::config
