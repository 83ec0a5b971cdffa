#include "bmamba/checkpoint.hpp"

#include <map>
#include <sstream>
#include <string>

#include "bmamba/config.hpp"
#include "bmamba/errors.hpp"
#include "bmamba/tensor_file.hpp"

namespace bmamba::io {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

struct ManifestEntry {
  Index rows = 0;
  Index cols = 0;
  std::string file;
};

}  // namespace

void save_checkpoint(const model::Model& model, const fs::path& dir) {
  fs::create_directories(dir / "tensors");
  model::Model copy = model;
  std::ostringstream manifest;
  for (const auto& v : model::parameter_views(copy, false)) {
    const std::string file = "tensors/" + v.name + ".bmt";
    Tensor t;
    t.dtype = DType::float64;
    t.dims = {static_cast<std::uint32_t>(v.rows), static_cast<std::uint32_t>(v.cols)};
    t.values.assign(v.data, v.data + v.size());
    write_tensor(dir / file, t);
    manifest << v.name << ' ' << v.rows << ' ' << v.cols << ' ' << file << '\n';
  }
  write_file_atomic(dir / "manifest.txt", manifest.str());
  write_file_atomic(dir / "model.txt", config::model_config_text(model.config));
}

model::Model load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("checkpoint directory not found: " + dir.string());
  model::Model model = model::make_model(config::parse_model_config(read_text(dir / "model.txt")));

  std::map<std::string, ManifestEntry> entries;
  std::istringstream manifest(read_text(dir / "manifest.txt"));
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name;
    ManifestEntry e;
    if (!(fields >> name >> e.rows >> e.cols >> e.file)) throw FormatError("malformed manifest line: " + line);
    if (!entries.emplace(name, e).second) throw FormatError("tensor listed twice in manifest: " + name);
  }

  const auto views = model::parameter_views(model, false);
  if (views.size() != entries.size()) {
    throw ConfigError("checkpoint has " + std::to_string(entries.size()) + " tensors but the model has " +
                      std::to_string(views.size()));
  }
  for (const auto& v : views) {
    const auto it = entries.find(v.name);
    if (it == entries.end()) throw ConfigError("checkpoint is missing tensor " + v.name);
    const auto& e = it->second;
    const Tensor t = read_tensor(dir / e.file);
    if (e.rows != v.rows || e.cols != v.cols || t.dims.size() != 2 || t.dims[0] != v.rows ||
        t.dims[1] != v.cols) {
      throw ConfigError("shape mismatch for tensor " + v.name);
    }
    std::copy(t.values.begin(), t.values.end(), v.data);
  }
  return model;
}

}  // namespace bmamba::io
