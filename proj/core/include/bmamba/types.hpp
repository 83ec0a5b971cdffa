#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bmamba {

using Index = Eigen::Index;

// Sequences are stored time-major: one row per step, one column per channel.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

enum class Modality : std::uint8_t { text = 0, audio = 1, video = 2 };

inline constexpr Modality kAllModalities[] = {Modality::text, Modality::audio, Modality::video};

std::string_view to_string(Modality m);

/// Accepts the long names ("text") and the single-letter tags ("t").
Modality parse_modality(std::string_view name);

/// Parses a comma-separated modality list such as "t,a,v". Order is
/// normalized to text, audio, video and duplicates are rejected.
std::vector<Modality> parse_modality_list(std::string_view list);

std::string modality_list_string(const std::vector<Modality>& list);

struct ModalitySequence {
  Modality modality = Modality::text;
  Matrix data;

  Index length() const { return data.rows(); }
  Index width() const { return data.cols(); }
};

/// Independent seed for a named sub-stream (splitmix64 of seed and stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

void fill_normal(Matrix& m, double stddev, Rng& rng);
void fill_normal(Vector& v, double stddev, Rng& rng);

}  // namespace bmamba
