#include "bmamba/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "bmamba/errors.hpp"

namespace bmamba::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
  }
  return out;
}

Index parse_index(std::string_view key, std::string_view value) {
  return static_cast<Index>(parse_number<long long>(key, value));
}

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field index_field(std::string_view key, T RunConfig::*member) {
  return {key, [key, member](RunConfig& c, std::string_view v) { c.*member = static_cast<T>(parse_index(key, v)); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(std::string_view key, double RunConfig::*member) {
  return {key, [key, member](RunConfig& c, std::string_view v) { c.*member = parse_number<double>(key, v); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field string_field(std::string_view key, std::string RunConfig::*member) {
  return {key, [member](RunConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      index_field("classes", &RunConfig::classes),
      index_field("epochs", &RunConfig::epochs),
      double_field("lr", &RunConfig::lr),
      double_field("weight_decay", &RunConfig::weight_decay),
      index_field("d_m", &RunConfig::d_m),
      index_field("state_size", &RunConfig::state_size),
      index_field("layers", &RunConfig::layers),
      index_field("conv_width", &RunConfig::conv_width),
      index_field("n_feature_nodes", &RunConfig::n_feature_nodes),
      index_field("m_enhance_nodes", &RunConfig::m_enhance_nodes),
      index_field("d_z", &RunConfig::d_z),
      index_field("d_h", &RunConfig::d_h),
      double_field("lambda", &RunConfig::lambda),
      {"discretization", [](RunConfig& c, std::string_view v) { c.discretization = ssm::parse_discretization(v); },
       [](const RunConfig& c) { return std::string(ssm::to_string(c.discretization)); }},
      {"fusion", [](RunConfig& c, std::string_view v) { c.fusion = fusion::parse_fusion_mode(v); },
       [](const RunConfig& c) { return std::string(fusion::to_string(c.fusion)); }},
      {"bls_target", [](RunConfig& c, std::string_view v) { c.bls_target = model::parse_bls_target(v); },
       [](const RunConfig& c) { return std::string(model::to_string(c.bls_target)); }},
      index_field("hidden_fusion", &RunConfig::hidden_fusion),
      index_field("hidden_classifier", &RunConfig::hidden_classifier),
      index_field("probe_utterances", &RunConfig::probe_utterances),
      {"modalities", [](RunConfig& c, std::string_view v) { c.modalities = parse_modality_list(v); },
       [](const RunConfig& c) { return modality_list_string(c.modalities); }},
      string_field("train_data", &RunConfig::train_data),
      string_field("test_data", &RunConfig::test_data),
      index_field("data_seed", &RunConfig::data_seed),
      index_field("dialogues", &RunConfig::dialogues),
      index_field("test_dialogues", &RunConfig::test_dialogues),
      index_field("utterances", &RunConfig::utterances),
      index_field("width_text", &RunConfig::width_text),
      index_field("width_audio", &RunConfig::width_audio),
      index_field("width_video", &RunConfig::width_video),
      double_field("noise", &RunConfig::noise),
      double_field("noise_text", &RunConfig::noise_text),
      double_field("noise_audio", &RunConfig::noise_audio),
      double_field("noise_video", &RunConfig::noise_video),
      double_field("separation", &RunConfig::separation),
  };
  return table;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!seen.emplace(key).second) throw ConfigError("key '" + std::string(key) + "' given twice");
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(c, value);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

synthetic::SyntheticSpec RunConfig::synthetic_spec() const {
  synthetic::SyntheticSpec s;
  s.classes = classes;
  s.utterances = utterances;
  s.dialogues = dialogues + test_dialogues;
  s.widths = {width_text, width_audio, width_video};
  s.noise = noise;
  s.modality_noise = {noise_text, noise_audio, noise_video};
  s.separation = separation;
  s.seed = data_seed >= 0 ? static_cast<std::uint64_t>(data_seed) : seed;
  return s;
}

model::ModelConfig RunConfig::model_config(const std::array<Index, 3>& widths) const {
  model::ModelConfig m;
  m.classes = classes;
  m.modalities = modalities;
  m.input_widths = widths;
  m.d_m = d_m;
  m.state_size = state_size;
  m.layers = layers;
  m.conv_width = conv_width;
  m.broad.feature_groups = n_feature_nodes;
  m.broad.enhancement_groups = m_enhance_nodes;
  m.broad.feature_width = d_z;
  m.broad.enhancement_width = d_h;
  m.broad.lambda = lambda;
  m.hidden_fusion = hidden_fusion;
  m.hidden_classifier = hidden_classifier;
  m.discretization = discretization;
  m.fusion = fusion;
  m.bls_target = bls_target;
  m.seed = seed;
  m.validate();
  return m;
}

train::TrainConfig RunConfig::train_config(const std::array<Index, 3>& widths) const {
  train::TrainConfig t;
  t.model = model_config(widths);
  t.optimizer.lr = lr;
  t.optimizer.weight_decay = weight_decay;
  t.epochs = epochs;
  t.probe_utterances = probe_utterances;
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("lr and weight_decay must be non-negative");
  if (probe_utterances < 1) throw ConfigError("probe_utterances must be positive");
  return t;
}

std::string model_config_text(const model::ModelConfig& cfg) {
  std::ostringstream out;
  out << "classes = " << cfg.classes << '\n'
      << "modalities = " << modality_list_string(cfg.modalities) << '\n'
      << "width_text = " << cfg.input_widths[0] << '\n'
      << "width_audio = " << cfg.input_widths[1] << '\n'
      << "width_video = " << cfg.input_widths[2] << '\n'
      << "d_m = " << cfg.d_m << '\n'
      << "state_size = " << cfg.state_size << '\n'
      << "layers = " << cfg.layers << '\n'
      << "conv_width = " << cfg.conv_width << '\n'
      << "n_feature_nodes = " << cfg.broad.feature_groups << '\n'
      << "m_enhance_nodes = " << cfg.broad.enhancement_groups << '\n'
      << "d_z = " << cfg.broad.feature_width << '\n'
      << "d_h = " << cfg.broad.enhancement_width << '\n'
      << "lambda = " << format_double(cfg.broad.lambda) << '\n'
      << "hidden_fusion = " << cfg.hidden_fusion << '\n'
      << "hidden_classifier = " << cfg.hidden_classifier << '\n'
      << "discretization = " << ssm::to_string(cfg.discretization) << '\n'
      << "fusion = " << fusion::to_string(cfg.fusion) << '\n'
      << "bls_target = " << model::to_string(cfg.bls_target) << '\n'
      << "seed = " << cfg.seed << '\n';
  return out.str();
}

model::ModelConfig parse_model_config(std::string_view text) {
  // The model keys are a subset of the run keys, so reuse the run parser.
  const RunConfig run = RunConfig::parse(text);
  return run.model_config({run.width_text, run.width_audio, run.width_video});
}

}  // namespace bmamba::config
