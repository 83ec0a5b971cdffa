#include "bmamba/types.hpp"

#include <array>
#include <string>

#include "bmamba/errors.hpp"

namespace bmamba {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::text:
      return "text";
    case Modality::audio:
      return "audio";
    case Modality::video:
      return "video";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  if (name == "t" || name == "text") return Modality::text;
  if (name == "a" || name == "audio") return Modality::audio;
  if (name == "v" || name == "video") return Modality::video;
  throw ConfigError("unknown modality '" + std::string(name) + "' (expected t, a or v)");
}

std::vector<Modality> parse_modality_list(std::string_view list) {
  std::array<bool, 3> seen{};
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::size_t end = comma == std::string_view::npos ? list.size() : comma;
    std::string_view item = list.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    const auto m = parse_modality(item);
    auto& flag = seen[static_cast<std::size_t>(m)];
    if (flag) throw ConfigError("modality listed twice: " + std::string(item));
    flag = true;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  std::vector<Modality> out;
  for (Modality m : kAllModalities) {
    if (seen[static_cast<std::size_t>(m)]) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("empty modality list");
  return out;
}

std::string modality_list_string(const std::vector<Modality>& list) {
  std::string out;
  for (Modality m : list) {
    if (!out.empty()) out += ',';
    out += to_string(m).front();
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void fill_normal(Matrix& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void fill_normal(Vector& v, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
}

}  // namespace bmamba
