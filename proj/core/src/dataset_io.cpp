#include "bmamba/dataset_io.hpp"

#include <charconv>
#include <sstream>
#include <string>

#include "bmamba/errors.hpp"
#include "bmamba/tensor_file.hpp"

namespace bmamba::io {

namespace fs = std::filesystem;

namespace {

fs::path modality_file(const fs::path& dir, Modality m) { return dir / (std::string(to_string(m)) + ".bmt"); }

long long parse_int(std::string_view s, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("labels.csv line " + std::to_string(line) + ": expected an integer, got '" + std::string(s) +
                      "'");
  }
  return v;
}

}  // namespace

void write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  const Index rows = static_cast<Index>(data.utterances());
  for (Modality m : kAllModalities) {
    if (data.width(m) == 0) continue;
    Matrix all(rows, data.width(m));
    Index r = 0;
    for (const auto& d : data.dialogues) {
      all.middleRows(r, d.length()) = d.feature(m);
      r += d.length();
    }
    write_tensor(modality_file(dir, m), from_matrix(all, DType::float32));
  }
  std::string labels = "dialogue,label\n";
  for (std::size_t i = 0; i < data.dialogues.size(); ++i) {
    for (int y : data.dialogues[i].labels) labels += std::to_string(i) + ',' + std::to_string(y) + '\n';
  }
  write_file_atomic(dir / "labels.csv", labels);
}

Dataset read_dataset(const fs::path& dir, int classes) {
  if (!fs::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir.string());
  if (classes < 2) throw ConfigError("classes must be at least 2");
  const auto bytes = read_file(dir / "labels.csv");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  if (!std::getline(in, line) || line != "dialogue,label") {
    throw FormatError("labels.csv must start with the header 'dialogue,label'");
  }

  Dataset data;
  data.classes = classes;
  long long current = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("labels.csv line " + std::to_string(line_no) + ": missing ','");
    const long long dialogue = parse_int(std::string_view(line).substr(0, comma), line_no);
    const long long label = parse_int(std::string_view(line).substr(comma + 1), line_no);
    if (label < 0 || label >= classes) {
      throw FormatError("labels.csv line " + std::to_string(line_no) + ": label out of range");
    }
    if (dialogue != current) {
      if (dialogue < current) throw FormatError("labels.csv: dialogues must be contiguous and increasing");
      current = dialogue;
      data.dialogues.emplace_back();
      data.dialogues.back().classes = classes;
    }
    data.dialogues.back().labels.push_back(static_cast<int>(label));
  }
  if (data.dialogues.empty()) throw FormatError("labels.csv has no rows");

  const Index rows = static_cast<Index>(data.utterances());
  bool any = false;
  for (Modality m : kAllModalities) {
    const auto path = modality_file(dir, m);
    if (!fs::exists(path)) continue;
    const Matrix all = to_matrix(read_tensor(path));
    if (all.rows() != rows) {
      throw FormatError(path.filename().string() + " has " + std::to_string(all.rows()) + " rows but labels.csv has " +
                        std::to_string(rows));
    }
    data.widths[static_cast<std::size_t>(m)] = all.cols();
    Index r = 0;
    for (auto& d : data.dialogues) {
      d.feature(m) = all.middleRows(r, d.length());
      r += d.length();
    }
    any = true;
  }
  if (!any) throw FormatError("dataset has no modality files");
  return data;
}

}  // namespace bmamba::io
