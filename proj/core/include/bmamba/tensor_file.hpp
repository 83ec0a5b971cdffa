#pragma once

// Binary tensor container, little-endian throughout:
//
//   "BMTF" | version u8 (=1) | dtype u8 | rank u8 | dims: rank x u32 |
//   payload (row-major) | crc32(payload) u32
//
// dtype 1 is 32-bit IEEE float; dtype 2 (64-bit float) is used for
// checkpoints so that saved parameters reload bit-exactly.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "bmamba/types.hpp"

namespace bmamba::io {

enum class DType : std::uint8_t { float32 = 1, float64 = 2 };

inline constexpr std::uint8_t kTensorFormatVersion = 1;

struct Tensor {
  DType dtype = DType::float32;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;  // held in double; rounded to dtype on encode

  std::size_t element_count() const;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// Throws FormatError on bad magic/version/dtype, size mismatch or CRC mismatch.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Rank-2 tensor (rows x cols) from a matrix.
Tensor from_matrix(const Matrix& m, DType dtype = DType::float32);
/// Rank-1 tensors become a single column; rank-2 map to rows x cols.
Matrix to_matrix(const Tensor& t);

}  // namespace bmamba::io
