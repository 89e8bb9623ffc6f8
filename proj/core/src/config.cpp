#include "dsva/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dsva/errors.hpp"

namespace dsva {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a real");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a bool");
}

}  // namespace

std::string to_string(ClassNorm norm) {
  switch (norm) {
    case ClassNorm::L2: return "l2";
    case ClassNorm::None: return "none";
    case ClassNorm::ZScore: return "zscore";
  }
  return "l2";
}

std::string to_string(AccuracyMode mode) {
  return mode == AccuracyMode::Overall ? "overall" : "per-class-mean";
}

ClassNorm parse_class_norm(std::string_view text) {
  if (text == "l2") return ClassNorm::L2;
  if (text == "none") return ClassNorm::None;
  if (text == "zscore") return ClassNorm::ZScore;
  throw ConfigError("unknown class_norm '" + std::string(text) + "' (expected l2|none|zscore)");
}

AccuracyMode parse_accuracy_mode(std::string_view text) {
  if (text == "overall") return AccuracyMode::Overall;
  if (text == "per-class-mean") return AccuracyMode::PerClassMean;
  throw ConfigError("unknown accuracy mode '" + std::string(text) +
                    "' (expected overall|per-class-mean)");
}

void Config::validate() const {
  if (lambda_scale < 0) throw ValidationError("lambda_scale must be >= 0");
  if (gamma_calibration < 0) throw ValidationError("gamma_calibration must be >= 0");
  if (probe_count < 1) throw ValidationError("probe_count must be >= 1");
  if (tau_init <= 0) throw ValidationError("tau_init must be > 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (layers < 0) throw ValidationError("layers must be >= 0");
  if (heads < 1) throw ValidationError("heads must be >= 1");
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (head_dim < 0) throw ValidationError("head_dim must be >= 0");
  if (head_dim == 0 && dim % heads != 0)
    throw ValidationError("dim must be divisible by heads when head_dim is derived");
  if (grid_side < 1) throw ValidationError("grid_side must be >= 1");
  if (image_size < 1 || image_size % grid_side != 0)
    throw ValidationError("image_size must be a positive multiple of grid_side");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ValidationError("Adam betas must lie in [0, 1)");
  if (warmup_epochs < 0 || main_epochs < 0)
    throw ValidationError("epoch counts must be >= 0");
  if (warmup_lr < 0 || main_lr < 0) throw ValidationError("learning rates must be >= 0");
}

void apply_tiny_preset(Config& config) {
  config.layers = 2;
  config.heads = 4;
  config.dim = 32;
  config.head_dim = 0;
  config.grid_side = 4;
  config.image_size = 64;
}

Config parse_config(std::string_view text) {
  Config config;
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": missing '=' in '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");

    if (key == "lambda_scale") config.lambda_scale = parse_double(key, value);
    else if (key == "gamma_calibration") config.gamma_calibration = parse_double(key, value);
    else if (key == "probe_count") config.probe_count = static_cast<int>(parse_int(key, value));
    else if (key == "tau_init") config.tau_init = parse_double(key, value);
    else if (key == "batch_size") config.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "layers") config.layers = static_cast<int>(parse_int(key, value));
    else if (key == "heads") config.heads = static_cast<int>(parse_int(key, value));
    else if (key == "dim") config.dim = static_cast<int>(parse_int(key, value));
    else if (key == "head_dim") config.head_dim = static_cast<int>(parse_int(key, value));
    else if (key == "grid_side") config.grid_side = static_cast<int>(parse_int(key, value));
    else if (key == "image_size") config.image_size = static_cast<int>(parse_int(key, value));
    else if (key == "beta1") config.beta1 = parse_double(key, value);
    else if (key == "beta2") config.beta2 = parse_double(key, value);
    else if (key == "warmup_epochs") config.warmup_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "warmup_lr") config.warmup_lr = parse_double(key, value);
    else if (key == "main_epochs") config.main_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "main_lr") config.main_lr = parse_double(key, value);
    else if (key == "seed") config.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "freeze_backbone") config.freeze_backbone = parse_bool(key, value);
    else if (key == "class_norm") config.class_norm = parse_class_norm(value);
    else if (key == "zsl_accuracy") config.zsl_accuracy = parse_accuracy_mode(value);
    else if (key == "gzsl_accuracy") config.gzsl_accuracy = parse_accuracy_mode(value);
    else if (key == "preset") {
      if (value == "tiny") apply_tiny_preset(config);
      else throw ConfigError("config key 'preset': unknown preset '" + value + "'");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const Config& config) {
  std::ostringstream out;
  out.precision(17);
  out << "lambda_scale=" << config.lambda_scale << '\n'
      << "gamma_calibration=" << config.gamma_calibration << '\n'
      << "probe_count=" << config.probe_count << '\n'
      << "tau_init=" << config.tau_init << '\n'
      << "batch_size=" << config.batch_size << '\n'
      << "layers=" << config.layers << '\n'
      << "heads=" << config.heads << '\n'
      << "dim=" << config.dim << '\n'
      << "head_dim=" << config.head_dim << '\n'
      << "grid_side=" << config.grid_side << '\n'
      << "image_size=" << config.image_size << '\n'
      << "beta1=" << config.beta1 << '\n'
      << "beta2=" << config.beta2 << '\n'
      << "warmup_epochs=" << config.warmup_epochs << '\n'
      << "warmup_lr=" << config.warmup_lr << '\n'
      << "main_epochs=" << config.main_epochs << '\n'
      << "main_lr=" << config.main_lr << '\n'
      << "seed=" << config.seed << '\n'
      << "freeze_backbone=" << (config.freeze_backbone ? "true" : "false") << '\n'
      << "class_norm=" << to_string(config.class_norm) << '\n'
      << "zsl_accuracy=" << to_string(config.zsl_accuracy) << '\n'
      << "gzsl_accuracy=" << to_string(config.gzsl_accuracy) << '\n';
  return out.str();
}

}  // namespace dsva
