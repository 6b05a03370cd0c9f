#include "tumorseg/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "tumorseg/adam.hpp"
#include "tumorseg/errors.hpp"

namespace tumorseg {

namespace {

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void validate_monitor(const std::string& name) {
  std::string base = name;
  if (base.rfind("val_", 0) == 0) base = base.substr(4);
  MetricValues{}.by_name(base);  // throws UnknownMetricError when invalid
}

struct CsvLoggerCallback final : Callback {
  std::string name() const override { return "csv_logger"; }
  void on_epoch_end(TrainContext& ctx) override {
    append_csv_log(ctx.history.rows.back(), ctx.out_dir / "history.csv");
  }
};

struct CheckpointCallback final : Callback {
  std::string name() const override { return "checkpoint"; }
  void on_epoch_end(TrainContext& ctx) override {
    checkpoint_if_best(ctx.model, ctx.history, ctx.hp.monitor, ctx.out_dir);
  }
};

struct EarlyStoppingCallback final : Callback {
  std::string name() const override { return "early_stopping"; }
  void on_epoch_end(TrainContext& ctx) override {
    if (early_stopping_check(ctx.history, ctx.hp.monitor, ctx.hp.early_stop_patience,
                             ctx.hp.early_stop_min_delta) == StopSignal::stop) {
      ctx.stop_requested = true;
      ctx.history.stop_reason = "early_stop";
    }
  }
};

}  // namespace

const std::vector<std::string>& history_csv_columns() {
  static const std::vector<std::string> kColumns = [] {
    std::vector<std::string> cols;
    cols.push_back("epoch");
    for (const auto& m : MetricValues::names()) cols.push_back(m);
    for (const auto& m : MetricValues::names()) cols.push_back("val_" + m);
    cols.push_back("seconds");
    return cols;
  }();
  return kColumns;
}

double TrainingHistory::metric(std::size_t row, const std::string& name) const {
  const EpochRecord& r = rows.at(row);
  if (name == "seconds") return r.seconds;
  if (name.rfind("val_", 0) == 0) return r.validation.by_name(name.substr(4));
  return r.train.by_name(name);
}

bool TrainingHistory::lower_is_better(const std::string& name) {
  return name.find("loss") != std::string::npos;
}

StopSignal early_stopping_check(const TrainingHistory& history, const std::string& monitor,
                                int patience, double min_delta) {
  if (history.rows.empty()) {
    throw ConfigInvalidError("early stopping needs at least one epoch");
  }
  validate_monitor(monitor);
  const bool lower = TrainingHistory::lower_is_better(monitor);
  double best = history.metric(0, monitor);
  std::size_t best_idx = 0;
  for (std::size_t i = 1; i < history.rows.size(); ++i) {
    const double v = history.metric(i, monitor);
    const bool improved = lower ? (v < best - min_delta) : (v > best + min_delta);
    if (improved) {
      best = v;
      best_idx = i;
    }
  }
  const std::size_t since_best = history.rows.size() - 1 - best_idx;
  return since_best >= static_cast<std::size_t>(patience) ? StopSignal::stop
                                                          : StopSignal::continue_training;
}

void append_csv_log(const EpochRecord& row, const std::filesystem::path& file) {
  const bool need_header =
      !std::filesystem::exists(file) || std::filesystem::file_size(file) == 0;
  std::ofstream os(file, std::ios::app);
  if (!os) throw IoError("cannot open csv log: " + file.string());
  if (need_header) {
    const auto& cols = history_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) os << ',';
      os << cols[i];
    }
    os << '\n';
  }
  os << row.epoch;
  for (const auto& m : MetricValues::names()) os << ',' << format_value(row.train.by_name(m));
  for (const auto& m : MetricValues::names()) {
    os << ',' << format_value(row.validation.by_name(m));
  }
  os << ',' << format_value(row.seconds) << '\n';
  os.flush();
  if (!os) throw IoError("csv log write failed: " + file.string());
}

CheckpointAction checkpoint_if_best(const UNet& model, const TrainingHistory& history,
                                    const std::string& monitor,
                                    const std::filesystem::path& out_dir) {
  if (history.rows.empty()) {
    throw ConfigInvalidError("checkpointing needs at least one epoch");
  }
  validate_monitor(monitor);
  const bool lower = TrainingHistory::lower_is_better(monitor);
  const std::size_t last = history.rows.size() - 1;
  const double current = history.metric(last, monitor);

  bool best = true;
  for (std::size_t i = 0; i < last; ++i) {
    const double v = history.metric(i, monitor);
    if (lower ? v <= current : v >= current) {
      best = false;
      break;
    }
  }

  std::map<std::string, std::string> meta;
  meta["monitor"] = monitor;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", current);
  meta["monitor_value"] = buf;
  meta["epoch"] = std::to_string(history.rows[last].epoch);
  meta["seed"] = std::to_string(history.seed);

  model.save_checkpoint(out_dir / "last.ckpt", meta);
  if (!best) return CheckpointAction::skipped;
  model.save_checkpoint(out_dir / "best.ckpt", meta);
  return CheckpointAction::saved;
}

TrainingHistory train(UNet& model, const DatasetSplit& split, const Hyperparameters& hp,
                      const std::filesystem::path& out_dir, const SliceWindow& window,
                      const TrainHooks& hooks) {
  if (hp.epochs < 1) throw ConfigInvalidError("epochs must be >= 1");
  if (hp.batch_size < 1) throw ConfigInvalidError("batch size must be >= 1");
  if (hp.learning_rate < 0.0) throw ConfigInvalidError("learning rate must be >= 0");
  if (split.train.empty()) throw ConfigInvalidError("training partition is empty");
  if (split.validation.empty()) throw ConfigInvalidError("validation partition is empty");
  validate_monitor(hp.monitor);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }
  std::filesystem::remove(out_dir / "history.csv", ec);

  const std::pair<int, int> size{model.config().input_height, model.config().input_width};
  BatchGenerator train_gen(split.train, window, hp.batch_size, /*shuffle=*/true, hp.seed,
                           size);
  BatchGenerator val_gen(split.validation, window, hp.batch_size, /*shuffle=*/false, 0,
                         size);

  AdamOptimizer adam(hp.learning_rate, hp.adam_beta1, hp.adam_beta2, hp.adam_eps);
  std::vector<Tensor*> params, grads;
  for (auto& p : model.parameters()) {
    params.push_back(p.value);
    grads.push_back(p.grad);
  }

  TrainingHistory history;
  history.seed = hp.seed;
  history.stop_reason = "completed";
  history.config_summary = "epochs=" + std::to_string(hp.epochs) +
                           " batch_size=" + std::to_string(hp.batch_size) +
                           " learning_rate=" + format_value(hp.learning_rate) +
                           " monitor=" + hp.monitor + " seed=" + std::to_string(hp.seed);

  CsvLoggerCallback csv_cb;
  CheckpointCallback ckpt_cb;
  EarlyStoppingCallback stop_cb;
  std::vector<Callback*> callbacks = {&csv_cb, &ckpt_cb, &stop_cb};
  for (Callback* cb : hooks.extra_callbacks) callbacks.push_back(cb);

  UNet::Cache cache;
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    train_gen.begin_epoch(epoch);
    MetricAccumulator train_acc(model.config().num_classes);
    while (auto batch = train_gen.next()) {
      const Tensor probs = model.forward(batch->inputs, cache);
      train_acc.add(batch->targets, probs);

      // Fused softmax + cross-entropy gradient, averaged over pixels.
      Tensor dlogits(probs.shape());
      const double inv_pixels =
          1.0 / (static_cast<double>(batch->size()) * size.first * size.second);
      for (std::int64_t i = 0; i < probs.size(); ++i) {
        dlogits[i] = (probs[i] - batch->targets[i]) * inv_pixels;
      }
      model.zero_grad();
      model.backward(cache, dlogits);
      adam.step(params, grads);
      ++history.optimizer_updates;
    }

    val_gen.begin_epoch(0);
    MetricAccumulator val_acc(model.config().num_classes);
    while (auto batch = val_gen.next()) {
      val_acc.add(batch->targets, model.forward(batch->inputs));
    }

    EpochRecord row;
    row.epoch = epoch;
    row.train = train_acc.values(DiceMode::soft);
    row.validation = val_acc.values(DiceMode::soft);
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.rows.push_back(row);

    TrainContext ctx{model, history, hp, out_dir};
    for (Callback* cb : callbacks) {
      cb->on_epoch_end(ctx);
      if (hooks.observer) hooks.observer(cb->name(), epoch);
    }
    if (ctx.stop_requested) break;
  }
  return history;
}

}  // namespace tumorseg
