#include "tumorseg/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tumorseg/errors.hpp"

namespace tumorseg {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects an unsigned integer, got '" +
                      value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects a number, got '" + value + "'");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& RunConfig::key_names() {
  static const std::vector<std::string> kKeys = {
      "data_root",        "output_dir",
      "seed",             "epochs",
      "batch_size",       "learning_rate",
      "adam_beta1",       "adam_beta2",
      "adam_eps",         "early_stop_patience",
      "early_stop_min_delta", "monitor",
      "in_channels",      "num_classes",
      "base_features",    "depth",
      "input_height",     "input_width",
      "window_start",     "window_length",
      "split_ratios",     "partition",
      "decision_mode"};
  return kKeys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "data_root") {
    data_root = value;
  } else if (key == "output_dir") {
    output_dir = value;
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "epochs") {
    epochs = parse_int(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_int(key, value);
  } else if (key == "learning_rate") {
    learning_rate = parse_double(key, value);
  } else if (key == "adam_beta1") {
    adam_beta1 = parse_double(key, value);
  } else if (key == "adam_beta2") {
    adam_beta2 = parse_double(key, value);
  } else if (key == "adam_eps") {
    adam_eps = parse_double(key, value);
  } else if (key == "early_stop_patience") {
    early_stop_patience = parse_int(key, value);
  } else if (key == "early_stop_min_delta") {
    early_stop_min_delta = parse_double(key, value);
  } else if (key == "monitor") {
    monitor = value;
  } else if (key == "in_channels") {
    in_channels = parse_int(key, value);
  } else if (key == "num_classes") {
    num_classes = parse_int(key, value);
  } else if (key == "base_features") {
    base_features = parse_int(key, value);
  } else if (key == "depth") {
    depth = parse_int(key, value);
  } else if (key == "input_height") {
    input_height = parse_int(key, value);
  } else if (key == "input_width") {
    input_width = parse_int(key, value);
  } else if (key == "window_start") {
    window_start = parse_int(key, value);
  } else if (key == "window_length") {
    window_length = parse_int(key, value);
  } else if (key == "split_ratios") {
    split_ratios = value;
  } else if (key == "partition") {
    partition = value;
  } else if (key == "decision_mode") {
    decision_mode = value;
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "data_root") return data_root;
  if (key == "output_dir") return output_dir;
  if (key == "seed") return std::to_string(seed);
  if (key == "epochs") return std::to_string(epochs);
  if (key == "batch_size") return std::to_string(batch_size);
  if (key == "learning_rate") return format_double(learning_rate);
  if (key == "adam_beta1") return format_double(adam_beta1);
  if (key == "adam_beta2") return format_double(adam_beta2);
  if (key == "adam_eps") return format_double(adam_eps);
  if (key == "early_stop_patience") return std::to_string(early_stop_patience);
  if (key == "early_stop_min_delta") return format_double(early_stop_min_delta);
  if (key == "monitor") return monitor;
  if (key == "in_channels") return std::to_string(in_channels);
  if (key == "num_classes") return std::to_string(num_classes);
  if (key == "base_features") return std::to_string(base_features);
  if (key == "depth") return std::to_string(depth);
  if (key == "input_height") return std::to_string(input_height);
  if (key == "input_width") return std::to_string(input_width);
  if (key == "window_start") return std::to_string(window_start);
  if (key == "window_length") return std::to_string(window_length);
  if (key == "split_ratios") return split_ratios;
  if (key == "partition") return partition;
  if (key == "decision_mode") return decision_mode;
  throw ConfigError("unknown config key: " + key);
}

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file: " + file.string());
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not 'key = value': " + t);
    }
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::apply_overrides(const std::map<std::string, std::string>& overrides) {
  for (const auto& [k, v] : overrides) set(k, v);
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& key : key_names()) os << key << " = " << get(key) << '\n';
  return os.str();
}

Hyperparameters RunConfig::hyperparameters() const {
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  Hyperparameters hp;
  hp.epochs = epochs;
  hp.batch_size = batch_size;
  hp.learning_rate = learning_rate;
  hp.adam_beta1 = adam_beta1;
  hp.adam_beta2 = adam_beta2;
  hp.adam_eps = adam_eps;
  hp.early_stop_patience = early_stop_patience;
  hp.early_stop_min_delta = early_stop_min_delta;
  hp.monitor = monitor;
  hp.seed = seed;
  return hp;
}

UNetConfig RunConfig::unet_config() const {
  UNetConfig cfg;
  cfg.in_channels = in_channels;
  cfg.num_classes = num_classes;
  cfg.base_features = base_features;
  cfg.depth = depth;
  cfg.input_height = input_height;
  cfg.input_width = input_width;
  cfg.init_seed = seed;
  cfg.validate();
  return cfg;
}

SliceWindow RunConfig::window() const { return {window_start, window_length}; }

std::array<double, 3> RunConfig::ratios() const {
  std::array<double, 3> out{};
  std::stringstream ss(split_ratios);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw BadRatiosError("split_ratios needs exactly 3 values");
    try {
      out[static_cast<std::size_t>(i)] = std::stod(trim(part));
    } catch (const std::exception&) {
      throw BadRatiosError("split_ratios has a non-numeric entry: " + part);
    }
    ++i;
  }
  if (i != 3) throw BadRatiosError("split_ratios needs exactly 3 values");
  return out;
}

}  // namespace tumorseg
