#pragma once

// A checkpoint is a directory:
//   model.txt      model shape (key = value)
//   manifest.txt   one line per tensor: name rows cols file
//   tensors/*.bmt  one float64 tensor file per entry
// Frozen broad maps are stored too, so a reload is bit-exact.

#include <filesystem>

#include "bmamba/model.hpp"

namespace bmamba::io {

void save_checkpoint(const model::Model& model, const std::filesystem::path& dir);

/// Rebuilds the model from model.txt and overwrites every tensor from the
/// manifest. Missing entries or shape mismatches throw ConfigError.
model::Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace bmamba::io
