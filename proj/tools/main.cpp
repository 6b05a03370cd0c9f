#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "tumorseg/data_pipeline.hpp"
#include "tumorseg/errors.hpp"
#include "tumorseg/plot.hpp"
#include "tumorseg/report.hpp"
#include "tumorseg/run_config.hpp"
#include "tumorseg/trainer.hpp"
#include "tumorseg/unet.hpp"
#include "tumorseg/volume_io.hpp"

namespace fs = std::filesystem;
using namespace tumorseg;

namespace {

// Exit codes: 0 success, 1 usage/config, 2 data error, 3 runtime error.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

std::string kebab(const std::string& key) {
  std::string out = key;
  for (char& c : out) {
    if (c == '_') c = '-';
  }
  return out;
}

const char* key_description(const std::string& key) {
  static const std::map<std::string, const char*> kDesc = {
      {"data_root", "Dataset root holding one directory per case"},
      {"output_dir", "Directory for logs, checkpoints, reports and plots"},
      {"seed", "Seed for splitting, shuffling and weight init"},
      {"epochs", "Number of training epochs"},
      {"batch_size", "Samples per optimizer update"},
      {"learning_rate", "Adam learning rate"},
      {"adam_beta1", "Adam first-moment decay"},
      {"adam_beta2", "Adam second-moment decay"},
      {"adam_eps", "Adam denominator epsilon"},
      {"early_stop_patience", "Epochs without improvement before stopping"},
      {"early_stop_min_delta", "Minimum change that counts as improvement"},
      {"monitor", "Metric watched by early stopping and checkpointing"},
      {"in_channels", "Model input channels (FLAIR, T1CE => 2)"},
      {"num_classes", "Segmentation classes"},
      {"base_features", "Feature maps at the first encoder level"},
      {"depth", "Number of down-sampling steps"},
      {"input_height", "Model input height (slices are resized to this)"},
      {"input_width", "Model input width"},
      {"window_start", "First axial slice of the training window"},
      {"window_length", "Number of axial slices per volume"},
      {"split_ratios", "Train,validation,test fractions (sum to 1)"},
      {"partition", "Partition to evaluate: train|validation|test|all"},
      {"decision_mode", "Dice reporting mode: hard|soft"},
  };
  const auto it = kDesc.find(key);
  return it == kDesc.end() ? "" : it->second;
}

// Config keys exposed one-to-one as flags; only flags the user actually set
// override the config file.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "Run configuration file (key = value lines)");
    for (const auto& key : RunConfig::key_names()) {
      options[key] = cmd->add_option("--" + kebab(key), values[key], key_description(key));
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg = RunConfig::from_file(config_file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) cfg.set(key, values.at(key));
    }
    return cfg;
  }
};

std::vector<CaseRef> cases_for_partition(const fs::path& root, const RunConfig& cfg) {
  std::vector<CaseRef> cases = discover_cases(root);
  const Partition part = partition_from_name(cfg.partition);
  if (part == Partition::all) return cases;
  DatasetSplit split = split_cases(std::move(cases), cfg.ratios(), cfg.seed);
  switch (part) {
    case Partition::train:
      return split.train;
    case Partition::validation:
      return split.validation;
    default:
      return split.test;
  }
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.data_root.empty()) {
    throw ConfigError("train needs --data-root (or data_root in the config file)");
  }
  std::vector<CaseRef> cases = discover_cases(cfg.data_root);
  DatasetSplit split = split_cases(std::move(cases), cfg.ratios(), cfg.seed);

  const fs::path out_dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }
  {
    std::ofstream snapshot(out_dir / "run_config.txt", std::ios::trunc);
    snapshot << cfg.serialize();
    if (!snapshot) throw IoError("cannot write run config snapshot");
  }

  UNet model(cfg.unet_config());
  std::printf("model: %lld parameters, encoder widths",
              static_cast<long long>(model.count_parameters()));
  for (int w : model.config().encoder_widths()) std::printf(" %d", w);
  std::printf(" (bottleneck %d)\n", model.config().bottleneck_width());
  std::printf("split: %zu train / %zu validation / %zu test cases\n", split.train.size(),
              split.validation.size(), split.test.size());

  const TrainingHistory history =
      train(model, split, cfg.hyperparameters(), out_dir, cfg.window());

  const EpochRecord& last = history.rows.back();
  std::printf("trained %zu epochs (%s); final loss %.6f, val_loss %.6f\n",
              history.rows.size(), history.stop_reason.c_str(), last.train.loss,
              last.validation.loss);
  std::printf("history: %s\n", (out_dir / "history.csv").string().c_str());
  std::printf("checkpoints: %s, %s\n", (out_dir / "best.ckpt").string().c_str(),
              (out_dir / "last.ckpt").string().c_str());
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 const std::vector<std::string>& extra_roots) {
  std::vector<std::string> roots;
  if (!cfg.data_root.empty()) roots.push_back(cfg.data_root);
  roots.insert(roots.end(), extra_roots.begin(), extra_roots.end());
  if (roots.empty()) throw ConfigError("evaluate needs at least one dataset root");

  UNet model = UNet::load_checkpoint(checkpoint);
  const DiceMode mode = decision_mode_from_name(cfg.decision_mode);
  const Partition part = partition_from_name(cfg.partition);

  std::vector<MetricsReport> reports;
  for (const auto& root : roots) {
    const std::vector<CaseRef> cases = cases_for_partition(root, cfg);
    if (cases.empty()) {
      throw DataError("partition '" + cfg.partition + "' of " + root + " is empty");
    }
    const std::string label = fs::path(root).filename().string();
    reports.push_back(evaluate(model, cases, cfg.window(), mode,
                               label.empty() ? root : label, part));
  }

  const ComparisonTable table = compare_reports(reports);
  std::fputs(render_comparison_text(table).c_str(), stdout);

  const fs::path out_dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path report_file = out_dir / "report.csv";
  std::ofstream os(report_file, std::ios::trunc);
  os << comparison_to_csv(table);
  if (!os) throw IoError("cannot write report: " + report_file.string());
  std::printf("report: %s\n", report_file.string().c_str());
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg, const std::string& checkpoint,
                const std::string& case_dir) {
  UNet model = UNet::load_checkpoint(checkpoint);
  const CaseRef c = case_from_dir(case_dir);
  const LabelVolume pred = predict_case(model, c, cfg.window());

  const fs::path out_dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path out_file = out_dir / (c.case_id + "_pred.nii.gz");
  write_label_volume(out_file, pred);

  long long counts[5] = {0, 0, 0, 0, 0};
  for (std::uint8_t v : pred.data) ++counts[v];
  std::printf("prediction: %s\n", out_file.string().c_str());
  for (int label : {0, 1, 2, 4}) {
    std::printf("label %d: %lld voxels\n", label, counts[label]);
  }
  return kExitOk;
}

int cmd_plot(const RunConfig& cfg, const std::vector<std::string>& csvs) {
  std::vector<fs::path> files(csvs.begin(), csvs.end());
  const auto written = write_history_plots(files, cfg.output_dir);
  for (const auto& f : written) std::printf("plot: %s\n", f.string().c_str());
  return kExitOk;
}

int cmd_make_fixtures(const std::string& out_dir, int n_cases, std::uint64_t seed,
                      const std::string& shape) {
  int h = 0, w = 0, d = 0;
  if (std::sscanf(shape.c_str(), "%dx%dx%d", &h, &w, &d) != 3) {
    throw ConfigError("--shape expects HxWxD, got '" + shape + "'");
  }
  if (n_cases < 1) throw ConfigError("--cases must be >= 1");
  for (int i = 0; i < n_cases; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "case_%03d", i);
    const CaseRef c =
        generate_synthetic_case(seed + static_cast<std::uint64_t>(i),
                                fs::path(out_dir) / name, h, w, d);
    std::printf("fixture: %s\n", c.root_path.string().c_str());
  }
  return kExitOk;
}

template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: data: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BraTS-style 2D U-Net brain tumor segmentation pipeline"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset root");
  ConfigFlags train_flags;
  train_flags.attach(train_cmd);

  auto* eval_cmd =
      app.add_subcommand("evaluate", "Evaluate a checkpoint and print a comparison table");
  ConfigFlags eval_flags;
  eval_flags.attach(eval_cmd);
  std::string eval_checkpoint;
  std::vector<std::string> eval_extra_roots;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file to evaluate")
      ->required();
  eval_cmd->add_option("roots", eval_extra_roots,
                       "Additional dataset roots to evaluate and compare");

  auto* predict_cmd =
      app.add_subcommand("predict", "Write a predicted segmentation for one case");
  ConfigFlags predict_flags;
  predict_flags.attach(predict_cmd);
  std::string predict_checkpoint;
  std::string predict_case_dir;
  predict_cmd->add_option("--checkpoint", predict_checkpoint, "Checkpoint file")
      ->required();
  predict_cmd->add_option("--case-dir", predict_case_dir, "Case directory to segment")
      ->required();

  auto* plot_cmd = app.add_subcommand("plot", "Render curve images from history CSV logs");
  ConfigFlags plot_flags;
  plot_flags.attach(plot_cmd);
  std::vector<std::string> plot_csvs;
  plot_cmd->add_option("csv", plot_csvs, "History CSV file(s); several logs are overlaid")
      ->required();

  auto* fix_cmd =
      app.add_subcommand("make-fixtures", "Generate a synthetic dataset for smoke tests");
  std::string fix_out = "fixtures";
  int fix_cases = 6;
  std::uint64_t fix_seed = 0;
  std::string fix_shape = "64x64x24";
  fix_cmd->add_option("--output-dir", fix_out, "Directory to create cases under");
  fix_cmd->add_option("--cases", fix_cases, "Number of cases to generate");
  fix_cmd->add_option("--seed", fix_seed, "Base seed; case i uses seed+i");
  fix_cmd->add_option("--shape", fix_shape, "Volume shape as HxWxD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (app.got_subcommand(train_cmd)) {
    return run_guarded([&] { return cmd_train(train_flags.resolve()); });
  }
  if (app.got_subcommand(eval_cmd)) {
    return run_guarded(
        [&] { return cmd_evaluate(eval_flags.resolve(), eval_checkpoint, eval_extra_roots); });
  }
  if (app.got_subcommand(predict_cmd)) {
    return run_guarded(
        [&] { return cmd_predict(predict_flags.resolve(), predict_checkpoint, predict_case_dir); });
  }
  if (app.got_subcommand(plot_cmd)) {
    return run_guarded([&] { return cmd_plot(plot_flags.resolve(), plot_csvs); });
  }
  if (app.got_subcommand(fix_cmd)) {
    return run_guarded(
        [&] { return cmd_make_fixtures(fix_out, fix_cases, fix_seed, fix_shape); });
  }
  return kExitUsage;
}
