#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tumorseg/data_pipeline.hpp"
#include "tumorseg/metrics.hpp"
#include "tumorseg/preprocess.hpp"
#include "tumorseg/unet.hpp"

namespace tumorseg {

struct Hyperparameters {
  int epochs = 235;
  int batch_size = 1;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-7;
  int early_stop_patience = 10;
  double early_stop_min_delta = 0.0;
  std::string monitor = "val_loss";
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  MetricValues train;
  MetricValues validation;
  double seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> rows;
  std::uint64_t seed = 0;
  std::string stop_reason;  // "completed" or "early_stop"
  std::string config_summary;
  long long optimizer_updates = 0;

  // Looks a monitored value up by CSV column name ("loss", "val_dice", ...).
  double metric(std::size_t row, const std::string& name) const;
  static bool lower_is_better(const std::string& name);
};

// Exact history CSV column order; also the contract cmd_plot parses against.
const std::vector<std::string>& history_csv_columns();

enum class StopSignal { continue_training, stop };

// Stops once the monitored series has gone `patience` consecutive epochs past
// its best value without improving by more than min_delta.
StopSignal early_stopping_check(const TrainingHistory& history, const std::string& monitor,
                                int patience, double min_delta);

// Appends one row, writing the header first when the file is new or empty.
void append_csv_log(const EpochRecord& row, const std::filesystem::path& file);

enum class CheckpointAction { saved, skipped };

// Writes best.ckpt when the last row's monitored value is the best seen;
// always refreshes last.ckpt.
CheckpointAction checkpoint_if_best(const UNet& model, const TrainingHistory& history,
                                    const std::string& monitor,
                                    const std::filesystem::path& out_dir);

struct TrainContext {
  UNet& model;
  TrainingHistory& history;
  const Hyperparameters& hp;
  std::filesystem::path out_dir;
  bool stop_requested = false;
};

struct Callback {
  virtual ~Callback() = default;
  virtual std::string name() const = 0;
  virtual void on_epoch_end(TrainContext& ctx) = 0;
};

struct TrainHooks {
  // Run after the built-in callbacks each epoch.
  std::vector<Callback*> extra_callbacks;
  // Invoked as each callback fires: (callback name, epoch). Lets tests record
  // the callback order.
  std::function<void(const std::string&, int)> observer;
};

// The training loop: per epoch, one Adam update per training batch, then a
// validation pass, then callbacks in the order csv_logger -> checkpoint ->
// early_stopping. Deterministic for a fixed seed.
TrainingHistory train(UNet& model, const DatasetSplit& split, const Hyperparameters& hp,
                      const std::filesystem::path& out_dir, const SliceWindow& window,
                      const TrainHooks& hooks = {});

}  // namespace tumorseg
