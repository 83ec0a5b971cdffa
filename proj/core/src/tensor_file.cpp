#include "bmamba/tensor_file.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "bmamba/errors.hpp"

namespace bmamba::io {

namespace {

constexpr std::uint8_t kMagic[4] = {'B', 'M', 'T', 'F'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::size_t element_size(DType d) {
  switch (d) {
    case DType::float32:
      return 4;
    case DType::float64:
      return 8;
  }
  throw FormatError("unknown tensor dtype");
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.dims.size() > 255) throw FormatError("tensor rank exceeds 255");
  if (t.values.size() != t.element_count()) throw FormatError("tensor value count does not match its dims");
  const std::size_t esize = element_size(t.dtype);
  std::vector<std::uint8_t> out;
  out.reserve(4 + 3 + 4 * t.dims.size() + esize * t.values.size() + 4);
  for (std::uint8_t b : kMagic) out.push_back(b);
  out.push_back(kTensorFormatVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  const std::size_t payload_start = out.size();
  for (double v : t.values) {
    if (t.dtype == DType::float32) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  const std::span<const std::uint8_t> payload(out.data() + payload_start, out.size() - payload_start);
  put_u32(out, crc32(payload));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 7 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("not a BMTF tensor file");
  }
  if (bytes[4] != kTensorFormatVersion) throw FormatError("unsupported tensor format version " + std::to_string(bytes[4]));
  Tensor t;
  if (bytes[5] != 1 && bytes[5] != 2) throw FormatError("unsupported tensor dtype " + std::to_string(bytes[5]));
  t.dtype = static_cast<DType>(bytes[5]);
  const std::size_t rank = bytes[6];
  std::size_t pos = 7;
  if (bytes.size() < pos + 4 * rank) throw FormatError("truncated tensor header");
  for (std::size_t i = 0; i < rank; ++i, pos += 4) t.dims.push_back(get_u32(bytes.data() + pos));
  const std::size_t count = t.element_count();
  const std::size_t esize = element_size(t.dtype);
  if (count > (std::numeric_limits<std::size_t>::max() - 4) / esize) throw FormatError("tensor too large");
  const std::size_t payload_bytes = count * esize;
  if (bytes.size() != pos + payload_bytes + 4) throw FormatError("tensor payload length does not match its dims");
  const std::span<const std::uint8_t> payload(bytes.data() + pos, payload_bytes);
  if (crc32(payload) != get_u32(bytes.data() + pos + payload_bytes)) throw FormatError("tensor checksum mismatch");
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* p = payload.data() + i * esize;
    t.values[i] = t.dtype == DType::float32 ? static_cast<double>(std::bit_cast<float>(get_u32(p)))
                                            : std::bit_cast<double>(get_u64(p));
  }
  return t;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file_atomic(path, encode_tensor(t)); }

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Tensor from_matrix(const Matrix& m, DType dtype) {
  Tensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.values.assign(m.data(), m.data() + m.size());
  return t;
}

Matrix to_matrix(const Tensor& t) {
  if (t.dims.size() == 1) {
    Matrix m(static_cast<Index>(t.dims[0]), 1);
    std::copy(t.values.begin(), t.values.end(), m.data());
    return m;
  }
  if (t.dims.size() != 2) throw FormatError("expected a rank-1 or rank-2 tensor");
  Matrix m(static_cast<Index>(t.dims[0]), static_cast<Index>(t.dims[1]));
  std::copy(t.values.begin(), t.values.end(), m.data());
  return m;
}

}  // namespace bmamba::io
