#pragma once

// Dataset directory layout:
//   text.bmt, audio.bmt, video.bmt   rank-2 float32, one row per utterance
//                                    (absent modalities have no file)
//   labels.csv                       header "dialogue,label", one row per
//                                    utterance, dialogues contiguous
// Utterance rows appear in the same order in every file.

#include <filesystem>

#include "bmamba/data.hpp"

namespace bmamba::io {

void write_dataset(const Dataset& data, const std::filesystem::path& dir);

/// Throws ConfigError when the directory is unreadable and FormatError on
/// inconsistent contents.
Dataset read_dataset(const std::filesystem::path& dir, int classes);

}  // namespace bmamba::io
