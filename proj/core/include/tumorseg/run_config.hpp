#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tumorseg/preprocess.hpp"
#include "tumorseg/report.hpp"
#include "tumorseg/trainer.hpp"
#include "tumorseg/unet.hpp"

namespace tumorseg {

// Flat key-value run configuration. Every key has a matching CLI flag
// (underscores become dashes), so a config file plus overrides fully captures
// a run. Unknown keys are rejected.
struct RunConfig {
  std::string data_root;
  std::string output_dir = "run_out";
  std::uint64_t seed = 0;
  int epochs = 235;
  int batch_size = 1;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-7;
  int early_stop_patience = 10;
  double early_stop_min_delta = 0.0;
  std::string monitor = "val_loss";
  int in_channels = 2;
  int num_classes = 4;
  int base_features = 32;
  int depth = 4;
  int input_height = 128;
  int input_width = 128;
  int window_start = 22;
  int window_length = 100;
  std::string split_ratios = "0.68,0.20,0.12";
  std::string partition = "test";
  std::string decision_mode = "hard";

  static const std::vector<std::string>& key_names();

  void set(const std::string& key, const std::string& value);  // ConfigError
  std::string get(const std::string& key) const;

  static RunConfig from_file(const std::filesystem::path& file);
  void apply_overrides(const std::map<std::string, std::string>& overrides);
  std::string serialize() const;

  Hyperparameters hyperparameters() const;
  UNetConfig unet_config() const;
  SliceWindow window() const;
  std::array<double, 3> ratios() const;  // BadRatiosError on parse failure
};

}  // namespace tumorseg
