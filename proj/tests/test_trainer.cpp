#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_support.hpp"
#include "tumorseg/data_pipeline.hpp"
#include "tumorseg/errors.hpp"
#include "tumorseg/plot.hpp"
#include "tumorseg/report.hpp"
#include "tumorseg/trainer.hpp"

using namespace tumorseg;

TEST_SUITE_BEGIN("trainer");

namespace {

// History with a scripted val_loss series; other fields stay zero.
TrainingHistory scripted_val_loss(const std::vector<double>& losses) {
  TrainingHistory h;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    EpochRecord r;
    r.epoch = static_cast<int>(i) + 1;
    r.validation.loss = losses[i];
    h.rows.push_back(r);
  }
  return h;
}

struct TinyRun {
  std::filesystem::path out;
  DatasetSplit split;
  SliceWindow window{1, 4};
  UNetConfig net;
  Hyperparameters hp;
};

TinyRun make_tiny_run(const std::string& name, std::uint64_t seed = 7) {
  TinyRun r;
  r.out = test::make_temp_dir(name);
  const auto data = r.out / "data";
  std::vector<CaseRef> cases;
  cases.push_back(generate_synthetic_case(seed, data / "a", 24, 24, 8));
  cases.push_back(generate_synthetic_case(seed + 1, data / "b", 24, 24, 8));
  r.split.train = {cases[0]};
  r.split.validation = {cases[1]};
  r.net.base_features = 2;
  r.net.depth = 1;
  r.net.input_height = 16;
  r.net.input_width = 16;
  r.net.init_seed = seed;
  r.hp.epochs = 2;
  r.hp.seed = seed;
  r.hp.early_stop_patience = 50;
  return r;
}

}  // namespace

TEST_CASE("early stopping stops at best epoch plus patience") {
  // best at epoch 2, patience 2 -> stop after epoch 4
  const auto h = scripted_val_loss({1.0, 0.9, 0.91, 0.92});
  CHECK(early_stopping_check(h, "val_loss", 2, 0.0) == StopSignal::stop);
  const auto h3 = scripted_val_loss({1.0, 0.9, 0.91});
  CHECK(early_stopping_check(h3, "val_loss", 2, 0.0) == StopSignal::continue_training);
}

TEST_CASE("early stopping continues on strictly decreasing series") {
  const auto h = scripted_val_loss({1.0, 0.9, 0.8, 0.7, 0.6});
  CHECK(early_stopping_check(h, "val_loss", 2, 0.0) == StopSignal::continue_training);
}

TEST_CASE("early stopping min_delta: tiny improvements do not count") {
  // improvements of 0.001 with min_delta 0.01 never register, so the best
  // stays at epoch 1 and patience 3 trips at epoch 4.
  const auto h = scripted_val_loss({1.0, 0.999, 0.998, 0.997});
  CHECK(early_stopping_check(h, "val_loss", 3, 0.01) == StopSignal::stop);
  // with min_delta 0 the same series improves every epoch
  CHECK(early_stopping_check(h, "val_loss", 3, 0.0) == StopSignal::continue_training);
}

TEST_CASE("early stopping handles higher-is-better metrics and bad names") {
  TrainingHistory h;
  for (double d : {0.5, 0.6, 0.59, 0.58}) {
    EpochRecord r;
    r.epoch = static_cast<int>(h.rows.size()) + 1;
    r.validation.dice = d;
    h.rows.push_back(r);
  }
  CHECK(early_stopping_check(h, "val_dice", 2, 0.0) == StopSignal::stop);
  CHECK(early_stopping_check(h, "val_dice", 3, 0.0) == StopSignal::continue_training);
  CHECK_THROWS_AS(early_stopping_check(h, "val_bogus", 2, 0.0), UnknownMetricError);
}

TEST_CASE("csv log: header once, one row per epoch, parse round trip") {
  const auto dir = test::make_temp_dir("csvlog");
  const auto file = dir / "history.csv";

  Rng rng(3);
  std::vector<EpochRecord> rows;
  for (int e = 1; e <= 2; ++e) {
    EpochRecord r;
    r.epoch = e;
    r.seconds = rng.uniform(0.0, 2.0);
    r.train.loss = rng.uniform();
    r.train.accuracy = rng.uniform();
    r.train.mean_iou = rng.uniform();
    r.train.precision = rng.uniform();
    r.train.sensitivity = rng.uniform();
    r.train.specificity = rng.uniform();
    r.train.dice = rng.uniform();
    r.train.dice_necrotic = rng.uniform();
    r.train.dice_edema = rng.uniform();
    r.train.dice_enhancing = rng.uniform();
    r.validation = r.train;
    r.validation.loss += 0.125;
    rows.push_back(r);
    append_csv_log(r, file);
  }

  std::ifstream is(file);
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 3);  // header + 2 rows

  const HistoryCsv parsed = parse_history_csv(file);
  REQUIRE(parsed.rows.size() == 2);
  CHECK(parsed.columns == history_csv_columns());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::fabs(parsed.column("epoch")[i] - rows[i].epoch) < 1e-12);
    for (const auto& name : MetricValues::names()) {
      CHECK(std::fabs(parsed.column(name)[i] - rows[i].train.by_name(name)) < 1e-6);
      CHECK(std::fabs(parsed.column("val_" + name)[i] -
                      rows[i].validation.by_name(name)) < 1e-6);
    }
    CHECK(std::fabs(parsed.column("seconds")[i] - rows[i].seconds) < 1e-6);
  }
}

TEST_CASE("checkpoint_if_best writes best only on improvement") {
  const auto dir = test::make_temp_dir("ckpt_best");
  UNetConfig cfg;
  cfg.base_features = 1;
  cfg.depth = 1;
  cfg.input_height = 8;
  cfg.input_width = 8;
  UNet model(cfg);

  TrainingHistory h = scripted_val_loss({1.0});
  CHECK(checkpoint_if_best(model, h, "val_loss", dir) == CheckpointAction::saved);
  h = scripted_val_loss({1.0, 0.8});
  CHECK(checkpoint_if_best(model, h, "val_loss", dir) == CheckpointAction::saved);
  h = scripted_val_loss({1.0, 0.8, 0.7});
  CHECK(checkpoint_if_best(model, h, "val_loss", dir) == CheckpointAction::saved);

  // a worse epoch skips best.ckpt but still refreshes last.ckpt
  std::filesystem::remove(dir / "last.ckpt");
  h = scripted_val_loss({1.0, 0.8, 0.7, 0.9});
  CHECK(checkpoint_if_best(model, h, "val_loss", dir) == CheckpointAction::skipped);
  CHECK(std::filesystem::exists(dir / "last.ckpt"));
  CHECK(std::filesystem::exists(dir / "best.ckpt"));

  std::map<std::string, std::string> meta;
  UNet::load_checkpoint(dir / "last.ckpt", &meta);
  CHECK(meta.at("monitor") == "val_loss");
  CHECK(meta.at("epoch") == "4");
}

TEST_CASE("train: loss descends on an overfittable set") {
  TinyRun r = make_tiny_run("train_descent");
  r.hp.epochs = 15;
  UNet model(r.net);
  const TrainingHistory h = train(model, r.split, r.hp, r.out / "run", r.window);
  REQUIRE(h.rows.size() >= 2);
  CHECK(h.rows.back().train.loss < h.rows.front().train.loss);
  CHECK(h.stop_reason == "completed");
  CHECK(std::filesystem::exists(r.out / "run" / "history.csv"));
  CHECK(std::filesystem::exists(r.out / "run" / "best.ckpt"));
  CHECK(std::filesystem::exists(r.out / "run" / "last.ckpt"));
}

TEST_CASE("train: one optimizer update per batch") {
  TinyRun r = make_tiny_run("train_updates");
  r.hp.epochs = 3;
  r.hp.batch_size = 3;  // 4 slices -> batches of 3,1 -> 2 updates per epoch
  UNet model(r.net);
  const TrainingHistory h = train(model, r.split, r.hp, r.out / "run", r.window);
  CHECK(h.optimizer_updates == 3 * 2);
}

TEST_CASE("train: learning rate zero leaves parameters bit-identical") {
  TinyRun r = make_tiny_run("train_lr0");
  r.hp.learning_rate = 0.0;
  UNet model(r.net);
  std::vector<double> before;
  for (const auto& [name, t] : model.named_parameters()) {
    for (std::int64_t i = 0; i < t->size(); ++i) before.push_back((*t)[i]);
  }
  train(model, r.split, r.hp, r.out / "run", r.window);
  std::size_t k = 0;
  bool identical = true;
  for (const auto& [name, t] : model.named_parameters()) {
    for (std::int64_t i = 0; i < t->size(); ++i) {
      if ((*t)[i] != before[k++]) identical = false;
    }
  }
  CHECK(identical);
}

TEST_CASE("train: epochs must be positive") {
  TinyRun r = make_tiny_run("train_epochs0");
  r.hp.epochs = 0;
  UNet model(r.net);
  CHECK_THROWS_AS(train(model, r.split, r.hp, r.out / "run", r.window),
                  ConfigInvalidError);
}

TEST_CASE("train: callback order is csv -> checkpoint -> early stop, then extras") {
  TinyRun r = make_tiny_run("train_cborder");
  r.hp.epochs = 2;

  struct Recorder final : Callback {
    std::string name() const override { return "recorder"; }
    void on_epoch_end(TrainContext&) override {}
  } recorder;

  std::vector<std::string> order;
  TrainHooks hooks;
  hooks.extra_callbacks = {&recorder};
  hooks.observer = [&](const std::string& name, int epoch) {
    order.push_back(name + "@" + std::to_string(epoch));
  };

  UNet model(r.net);
  train(model, r.split, r.hp, r.out / "run", r.window, hooks);
  const std::vector<std::string> expected = {
      "csv_logger@1", "checkpoint@1", "early_stopping@1", "recorder@1",
      "csv_logger@2", "checkpoint@2", "early_stopping@2", "recorder@2"};
  CHECK(order == expected);
}

TEST_CASE("train: early stopping fires when nothing can improve enough") {
  TinyRun r = make_tiny_run("train_earlystop");
  r.hp.epochs = 10;
  r.hp.early_stop_patience = 1;
  r.hp.early_stop_min_delta = 1e9;  // no epoch can improve by this much
  UNet model(r.net);
  const TrainingHistory h = train(model, r.split, r.hp, r.out / "run", r.window);
  CHECK(h.rows.size() == 2);  // best stays at epoch 1, patience 1 trips at epoch 2
  CHECK(h.stop_reason == "early_stop");
}

TEST_CASE("train: same seed reproduces every logged value") {
  TinyRun a = make_tiny_run("train_repro_a");
  UNet model_a(a.net);
  const TrainingHistory ha = train(model_a, a.split, a.hp, a.out / "run", a.window);

  TinyRun b = make_tiny_run("train_repro_b");
  UNet model_b(b.net);
  const TrainingHistory hb = train(model_b, b.split, b.hp, b.out / "run", b.window);

  REQUIRE(ha.rows.size() == hb.rows.size());
  for (std::size_t i = 0; i < ha.rows.size(); ++i) {
    for (const auto& name : MetricValues::names()) {
      CHECK(ha.rows[i].train.by_name(name) == hb.rows[i].train.by_name(name));
      CHECK(ha.rows[i].validation.by_name(name) == hb.rows[i].validation.by_name(name));
    }
  }
}

TEST_CASE("train: best checkpoint reload reproduces the recorded monitored value") {
  TinyRun r = make_tiny_run("train_reload");
  r.hp.epochs = 4;
  UNet model(r.net);
  train(model, r.split, r.hp, r.out / "run", r.window);

  std::map<std::string, std::string> meta;
  UNet best = UNet::load_checkpoint(r.out / "run" / "best.ckpt", &meta);
  const double recorded = std::stod(meta.at("monitor_value"));

  const MetricsReport rep = evaluate(best, r.split.validation, r.window, DiceMode::soft);
  CHECK(std::fabs(rep.values.loss - recorded) < 1e-6);
}

TEST_SUITE_END();
