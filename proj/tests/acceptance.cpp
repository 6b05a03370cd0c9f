// Acceptance suite: runs the project's release gate end to end and prints one
// PASS/FAIL line per criterion. Each criterion enforces its own tolerance and
// wall-clock budget. Exit code 0 only when every selected criterion passes.
//
//   acceptance_tests [--only N] [--cli PATH_TO_TUMORSEG_BINARY]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tumorseg/data_pipeline.hpp"
#include "tumorseg/metrics.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/plot.hpp"
#include "tumorseg/preprocess.hpp"
#include "tumorseg/report.hpp"
#include "tumorseg/rng.hpp"
#include "tumorseg/trainer.hpp"
#include "tumorseg/unet.hpp"
#include "tumorseg/volume_io.hpp"

using namespace tumorseg;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

void require_close(double a, double b, double tol, const std::string& what) {
  if (std::fabs(a - b) > tol) {
    std::ostringstream os;
    os << what << ": " << a << " vs " << b << " (tol " << tol << ")";
    throw Failure(os.str());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Metric oracle equivalence: 1,000 random <=8x8 target/hard-prediction
//    pairs against the per-pixel enumeration oracle, within 1e-6. < 10 s.
// ---------------------------------------------------------------------------
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = 1 + static_cast<int>(rng.uniform_index(8));
    const int w = 1 + static_cast<int>(rng.uniform_index(8));
    const Tensor target = test::random_one_hot(rng, h, w, 4);
    const Tensor pred = test::random_one_hot(rng, h, w, 4);

    const auto arg = test::oracle_confusion_argmax(target, pred);
    const auto thr = test::oracle_confusion_threshold(target, pred, 0.5);

    require_close(dice(target, pred), test::oracle_dice_joint(arg, 1e-6), 1e-6,
                  "joint dice");
    require_close(dice(target, pred, DiceClass::necrotic),
                  test::oracle_dice(arg[1], 1e-6), 1e-6, "necrotic dice");
    require_close(dice(target, pred, DiceClass::edema), test::oracle_dice(arg[2], 1e-6),
                  1e-6, "edema dice");
    require_close(dice(target, pred, DiceClass::enhancing),
                  test::oracle_dice(arg[3], 1e-6), 1e-6, "enhancing dice");
    require_close(mean_iou(target, pred), test::oracle_iou_mean(arg), 1e-6, "mean iou");

    MetricAccumulator acc;
    acc.add(target, pred);
    const MetricValues v = acc.values(DiceMode::hard);
    long long correct = 0;
    for (const auto& c : arg) correct += c.tp;
    require_close(v.accuracy, static_cast<double>(correct) / (h * w), 1e-6, "accuracy");
    const auto opm = test::oracle_pixel_metrics(thr);
    require_close(v.precision, opm.precision, 1e-6, "precision");
    require_close(v.sensitivity, opm.sensitivity, 1e-6, "sensitivity");
    require_close(v.specificity, opm.specificity, 1e-6, "specificity");
  }
  require(seconds_since(t0) < 10.0, "metric oracle run exceeded 10 s");
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness: micro U-Net (8x8, depth 1, base 2), analytic vs
//    central finite differences, relative error < 1e-3 across ALL
//    parameters. < 60 s.
// ---------------------------------------------------------------------------
void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  UNetConfig cfg;
  cfg.in_channels = 2;
  cfg.num_classes = 4;
  cfg.base_features = 2;
  cfg.depth = 1;
  cfg.input_height = 8;
  cfg.input_width = 8;
  cfg.init_seed = 2024;
  UNet model(cfg);

  Rng rng(2002);
  Tensor x({1, 8, 8, 2});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  Tensor target({1, 8, 8, 4});
  for (int y = 0; y < 8; ++y) {
    for (int xx = 0; xx < 8; ++xx) {
      target(0, y, xx, static_cast<int>(rng.uniform_index(4))) = 1.0;
    }
  }

  UNet::Cache cache;
  const Tensor probs = model.forward(x, cache);
  Tensor dlogits(probs.shape());
  for (std::int64_t i = 0; i < probs.size(); ++i) {
    dlogits[i] = (probs[i] - target[i]) / 64.0;
  }
  model.zero_grad();
  model.backward(cache, dlogits);

  const double h = 1e-6;
  long long checked = 0;
  double worst = 0.0;
  for (auto& p : model.parameters()) {
    for (std::int64_t j = 0; j < p.value->size(); ++j) {
      const double orig = (*p.value)[j];
      (*p.value)[j] = orig + h;
      const double up = categorical_cross_entropy(target, model.forward(x));
      (*p.value)[j] = orig - h;
      const double down = categorical_cross_entropy(target, model.forward(x));
      (*p.value)[j] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = (*p.grad)[j];
      const double rel = std::fabs(analytic - numeric) /
                         std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
      worst = std::max(worst, rel);
      if (rel >= 1e-3) {
        std::ostringstream os;
        os << "gradient mismatch at " << p.name << "[" << j << "]: analytic " << analytic
           << " numeric " << numeric << " rel " << rel;
        throw Failure(os.str());
      }
      ++checked;
    }
  }
  require(checked == model.count_parameters(), "did not cover every parameter");
  std::printf("        (checked %lld parameters, worst rel err %.3g)\n", checked, worst);
  require(seconds_since(t0) < 60.0, "gradient check exceeded 60 s");
}

// ---------------------------------------------------------------------------
// 3. Shape/normalization: (B,128,128,2) -> (B,128,128,4) with per-pixel
//    softmax sums within 1e-5; widths [32,64,128,256,512] from base 32.
// ---------------------------------------------------------------------------
void criterion_3() {
  UNetConfig cfg;  // defaults: base 32, depth 4, 128x128, 2 channels
  require(cfg.encoder_widths() == std::vector<int>({32, 64, 128, 256}),
          "encoder widths are not [32,64,128,256]");
  require(cfg.bottleneck_width() == 512, "bottleneck width is not 512");

  UNet model(cfg);
  const std::map<std::string, std::vector<int>> expected_shapes = {
      {"enc0.conv2.weight", {3, 3, 32, 32}},
      {"enc1.conv2.weight", {3, 3, 64, 64}},
      {"enc2.conv2.weight", {3, 3, 128, 128}},
      {"enc3.conv2.weight", {3, 3, 256, 256}},
      {"bottleneck.conv2.weight", {3, 3, 512, 512}},
  };
  for (const auto& [name, t] : model.named_parameters()) {
    const auto it = expected_shapes.find(name);
    if (it != expected_shapes.end()) {
      require(t->shape() == it->second, "parameter " + name + " has shape " +
                                            t->shape_str() + ", doubling law violated");
    }
  }

  Rng rng(3003);
  Tensor x({2, 128, 128, 2});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  const Tensor probs = model.forward(x);
  require(probs.shape() == std::vector<int>({2, 128, 128, 4}),
          "forward output shape is " + probs.shape_str());
  for (std::int64_t p = 0; p < probs.size() / 4; ++p) {
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) sum += probs[p * 4 + c];
    require(std::fabs(sum - 1.0) < 1e-5, "softmax per-pixel sum off by more than 1e-5");
  }
}

// ---------------------------------------------------------------------------
// 4. Preprocessing invariants over 500 random synthetic slices.
// ---------------------------------------------------------------------------
void criterion_4() {
  const auto dir = test::make_temp_dir("acceptance_prep");
  struct Loaded {
    Volume flair, t1ce;
    LabelVolume seg;
    std::string id;
  };
  std::vector<Loaded> cases;
  for (int i = 0; i < 5; ++i) {
    const CaseRef c = generate_synthetic_case(4000 + static_cast<std::uint64_t>(i),
                                              dir / ("c" + std::to_string(i)), 32, 32, 12);
    cases.push_back({load_modality(c, Modality::FLAIR), load_modality(c, Modality::T1CE),
                     load_segmentation(c), c.case_id});
  }
  const SliceWindow window{1, 10};

  Rng rng(4004);
  for (int trial = 0; trial < 500; ++trial) {
    const auto& c = cases[rng.uniform_index(cases.size())];
    const int z = window.start + static_cast<int>(rng.uniform_index(
                                     static_cast<std::size_t>(window.length)));
    const SliceSample s =
        build_sample_from(c.flair, c.t1ce, c.seg, c.id, z, window, {128, 128});

    require(s.input.shape() == std::vector<int>({128, 128, 2}), "input shape");
    require(s.target.shape() == std::vector<int>({128, 128, 4}), "target shape");
    for (std::int64_t i = 0; i < s.input.size(); ++i) {
      require(s.input[i] >= 0.0 && s.input[i] <= 1.0, "input outside [0,1]");
    }
    for (std::int64_t p = 0; p < s.target.size() / 4; ++p) {
      double sum = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double v = s.target[p * 4 + k];
        require(v == 0.0 || v == 1.0, "target not 0/1");
        sum += v;
      }
      require(sum == 1.0, "one-hot channel sum not exactly 1");
    }

    if (trial % 50 == 0) {  // chain determinism
      const SliceSample again =
          build_sample_from(c.flair, c.t1ce, c.seg, c.id, z, window, {128, 128});
      for (std::int64_t i = 0; i < s.input.size(); ++i) {
        require(s.input[i] == again.input[i], "chain is not deterministic (input)");
      }
      for (std::int64_t i = 0; i < s.target.size(); ++i) {
        require(s.target[i] == again.target[i], "chain is not deterministic (target)");
      }
    }
  }

  // label-resize set closure and remap bijectivity on random label slices
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 8 + static_cast<int>(rng.uniform_index(56));
    const int w = 8 + static_cast<int>(rng.uniform_index(56));
    LabelImage img;
    img.height = h;
    img.width = w;
    img.v.resize(static_cast<std::size_t>(h) * w);
    const std::uint8_t values[4] = {0, 1, 2, 4};
    bool present[5] = {false, false, false, false, false};
    for (auto& v : img.v) {
      v = values[rng.uniform_index(4)];
      present[v] = true;
    }
    const LabelImage resized = resize_slice(img, 128, 128);
    for (auto v : resized.v) {
      require(v <= 4 && v != 3, "resize produced a non-label value");
      require(present[v], "label resize invented a value absent from the input");
    }
    const LabelImage back = remap_labels_inverse(remap_labels(img));
    require(back.v == img.v, "remap is not a bijection");
  }
}

// ---------------------------------------------------------------------------
// 5. Overfit sanity: 8 synthetic slices, <=200 epochs, batch 1, Adam 1e-3,
//    hard mean dice on the training slices > 0.95. < 15 min.
// ---------------------------------------------------------------------------
void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = test::make_temp_dir("acceptance_overfit");
  const CaseRef c = generate_synthetic_case(5005, dir / "case", 128, 128, 12);
  const SliceWindow window{2, 8};  // exactly 8 training slices

  UNetConfig net;
  net.base_features = 8;
  net.depth = 2;
  net.input_height = 128;
  net.input_width = 128;
  net.init_seed = 5005;
  UNet model(net);

  Hyperparameters hp;
  hp.epochs = 200;
  hp.batch_size = 1;
  hp.learning_rate = 1e-3;
  hp.seed = 5005;
  hp.early_stop_patience = 200;  // disabled; the dice target stops the run

  DatasetSplit split;
  split.train = {c};
  split.validation = {c};  // stand-in; the criterion scores the training slices

  struct DiceTarget final : Callback {
    const CaseRef* c;
    SliceWindow window;
    double joint = 0.0, mean3 = 0.0;
    int reached_epoch = -1;
    std::string name() const override { return "dice_target"; }
    void on_epoch_end(TrainContext& ctx) override {
      const int epoch = ctx.history.rows.back().epoch;
      if (epoch % 5 != 0 && epoch != 200) return;
      const MetricsReport r = evaluate(ctx.model, {*c}, window, DiceMode::hard);
      joint = r.values.dice;
      mean3 = (r.values.dice_necrotic + r.values.dice_edema + r.values.dice_enhancing) / 3.0;
      if (joint > 0.95 && mean3 > 0.95) {
        reached_epoch = epoch;
        ctx.stop_requested = true;
        ctx.history.stop_reason = "dice_target";
      }
    }
  } target_cb;
  target_cb.c = &c;
  target_cb.window = window;

  TrainHooks hooks;
  hooks.extra_callbacks = {&target_cb};
  const TrainingHistory history = train(model, split, hp, dir / "run", window, hooks);

  std::printf("        (epochs run: %zu, joint hard dice %.4f, tumor-class mean %.4f)\n",
              history.rows.size(), target_cb.joint, target_cb.mean3);
  require(target_cb.joint > 0.95, "joint hard dice did not exceed 0.95 within 200 epochs");
  require(target_cb.mean3 > 0.95,
          "mean tumor-class hard dice did not exceed 0.95 within 200 epochs");
  require(seconds_since(t0) < 900.0, "overfit run exceeded 15 minutes");
}

// ---------------------------------------------------------------------------
// 6. Split contract: N=10 -> (6,2,2); N=335 -> (227,67,41); disjoint,
//    exhaustive, seed-deterministic.
// ---------------------------------------------------------------------------
void criterion_6() {
  const auto make = [](int n) {
    std::vector<CaseRef> cases(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      cases[static_cast<std::size_t>(i)].case_id = "case_" + std::to_string(i);
    }
    return cases;
  };
  const std::array<double, 3> ratios{0.68, 0.20, 0.12};

  const DatasetSplit s10 = split_cases(make(10), ratios, 6);
  require(s10.train.size() == 6 && s10.validation.size() == 2 && s10.test.size() == 2,
          "N=10 sizes are not (6,2,2)");
  const DatasetSplit s335 = split_cases(make(335), ratios, 6);
  require(s335.train.size() == 227 && s335.validation.size() == 67 &&
              s335.test.size() == 41,
          "N=335 sizes are not (227,67,41)");

  for (const auto* s : {&s10, &s335}) {
    std::vector<std::string> all;
    for (const auto* part : {&s->train, &s->validation, &s->test}) {
      for (const auto& c : *part) all.push_back(c.case_id);
    }
    std::sort(all.begin(), all.end());
    require(std::adjacent_find(all.begin(), all.end()) == all.end(),
            "partitions are not disjoint");
    require(all.size() == (s == &s10 ? 10u : 335u), "partitions are not exhaustive");
  }

  const DatasetSplit again = split_cases(make(335), ratios, 6);
  for (std::size_t i = 0; i < s335.train.size(); ++i) {
    require(s335.train[i].case_id == again.train[i].case_id, "split is not deterministic");
  }
}

// ---------------------------------------------------------------------------
// 7. Callback contract: scripted early stopping, CSV round trip, best
//    checkpoint reload.
// ---------------------------------------------------------------------------
void criterion_7() {
  // early stopping halts at exactly best-epoch + patience
  for (const auto& [best_epoch, patience] : std::vector<std::pair<int, int>>{
           {2, 2}, {1, 3}, {4, 1}, {3, 5}}) {
    TrainingHistory h;
    const auto val_at = [&](int epoch) {
      // strictly improves until best_epoch, then strictly worsens
      return epoch <= best_epoch ? 1.0 - 0.1 * epoch : 1.0 - 0.1 * best_epoch + 0.01 * epoch;
    };
    int stopped_after = -1;
    for (int epoch = 1; epoch <= best_epoch + patience + 3; ++epoch) {
      EpochRecord r;
      r.epoch = epoch;
      r.validation.loss = val_at(epoch);
      h.rows.push_back(r);
      if (early_stopping_check(h, "val_loss", patience, 0.0) == StopSignal::stop) {
        stopped_after = epoch;
        break;
      }
    }
    require(stopped_after == best_epoch + patience,
            "early stopping halted after epoch " + std::to_string(stopped_after) +
                ", expected " + std::to_string(best_epoch + patience));
  }

  // CSV round trip within 1e-6
  const auto dir = test::make_temp_dir("acceptance_callbacks");
  Rng rng(7007);
  std::vector<EpochRecord> rows;
  for (int e = 1; e <= 5; ++e) {
    EpochRecord r;
    r.epoch = e;
    r.seconds = rng.uniform(0.0, 100.0);
    double* fields[] = {&r.train.loss,        &r.train.accuracy,    &r.train.mean_iou,
                        &r.train.precision,   &r.train.sensitivity, &r.train.specificity,
                        &r.train.dice,        &r.train.dice_necrotic, &r.train.dice_edema,
                        &r.train.dice_enhancing};
    for (double* f : fields) *f = rng.uniform();
    r.validation = r.train;
    r.validation.loss = rng.uniform(0.0, 3.0);
    rows.push_back(r);
    append_csv_log(r, dir / "history.csv");
  }
  const HistoryCsv parsed = parse_history_csv(dir / "history.csv");
  require(parsed.rows.size() == rows.size(), "csv row count mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& name : MetricValues::names()) {
      require_close(parsed.column(name)[i], rows[i].train.by_name(name), 1e-6,
                    "csv round trip " + name);
      require_close(parsed.column("val_" + name)[i], rows[i].validation.by_name(name),
                    1e-6, "csv round trip val_" + name);
    }
    require_close(parsed.column("seconds")[i], rows[i].seconds, 1e-6, "csv seconds");
  }

  // best-checkpoint reload reproduces its recorded monitored value
  const auto data = dir / "data";
  DatasetSplit split;
  split.train = {generate_synthetic_case(7008, data / "a", 24, 24, 8)};
  split.validation = {generate_synthetic_case(7009, data / "b", 24, 24, 8)};
  const SliceWindow window{1, 4};
  UNetConfig net;
  net.base_features = 2;
  net.depth = 1;
  net.input_height = 16;
  net.input_width = 16;
  net.init_seed = 7;
  Hyperparameters hp;
  hp.epochs = 4;
  hp.seed = 7;
  hp.early_stop_patience = 100;
  UNet model(net);
  train(model, split, hp, dir / "run", window);

  std::map<std::string, std::string> meta;
  UNet best = UNet::load_checkpoint(dir / "run" / "best.ckpt", &meta);
  const double recorded = std::stod(meta.at("monitor_value"));
  const MetricsReport rep = evaluate(best, split.validation, window, DiceMode::soft);
  require_close(rep.values.loss, recorded, 1e-6, "best checkpoint monitored value");
}

// ---------------------------------------------------------------------------
// 8. End-to-end CLI: make-fixtures -> train (3 epochs) -> evaluate ->
//    predict -> plot, all exit 0, artifacts present. < 10 min.
// ---------------------------------------------------------------------------
void criterion_8(const std::string& cli) {
  require(!cli.empty(), "criterion 8 needs --cli <path to the tumorseg binary>");
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = test::make_temp_dir("acceptance_cli");

  const auto run = [&](const std::string& args) {
    const std::string log = (dir / "last_command.log").string();
    const std::string cmd = cli + " " + args + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    const int code = rc < 0 ? rc : WEXITSTATUS(rc);
    if (code != 0) {
      std::ifstream is(log);
      std::string output((std::istreambuf_iterator<char>(is)), {});
      throw Failure("command failed (exit " + std::to_string(code) + "): " + args + "\n" +
                    output);
    }
  };

  const std::string fx = (dir / "fixtures").string();
  const std::string out = (dir / "run").string();
  const std::string common = " --window-start 4 --window-length 8 --seed 7"
                             " --split-ratios 0.68,0.20,0.12";

  run("make-fixtures --output-dir " + fx + " --cases 6 --seed 7 --shape 48x48x16");
  run("train --data-root " + fx + " --output-dir " + out +
      " --epochs 3 --base-features 4 --depth 2 --learning-rate 0.001 --batch-size 1" +
      common);
  run("evaluate --checkpoint " + out + "/best.ckpt --data-root " + fx +
      " --partition test --output-dir " + out + common);
  run("predict --checkpoint " + out + "/best.ckpt --case-dir " + fx +
      "/case_000 --output-dir " + out + " --window-start 4 --window-length 8");
  run("plot " + out + "/history.csv --output-dir " + out + "/plots");

  // artifacts
  const HistoryCsv history = parse_history_csv(dir / "run" / "history.csv");
  require(history.rows.size() == 3, "history.csv does not have 3 epochs");
  for (const char* f : {"best.ckpt", "last.ckpt", "report.csv", "run_config.txt",
                        "case_000_pred.nii.gz"}) {
    require(fs::exists(dir / "run" / f), std::string("missing artifact: ") + f);
  }
  for (const char* f : {"loss.svg", "accuracy.svg", "dice.svg"}) {
    require(fs::exists(dir / "run" / "plots" / f), std::string("missing plot: ") + f);
  }

  // prediction labels stay in the raw label set
  const NiftiImage pred = nifti_read(dir / "run" / "case_000_pred.nii.gz");
  for (float v : pred.data) {
    require(v == 0.0f || v == 1.0f || v == 2.0f || v == 4.0f,
            "prediction contains a non-label value");
  }

  require(seconds_since(t0) < 600.0, "end-to-end run exceeded 10 minutes");
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  std::string cli;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (arg == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--only N] [--cli PATH]\n", argv[0]);
      return 2;
    }
  }

  struct Criterion {
    int id;
    const char* name;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence (1000 pairs, 1e-6)", [] { criterion_1(); }},
      {2, "gradient correctness (micro U-Net, rel err < 1e-3)", [] { criterion_2(); }},
      {3, "shape/normalization suite (softmax sums, doubling law)", [] { criterion_3(); }},
      {4, "preprocessing invariants (500 random slices)", [] { criterion_4(); }},
      {5, "overfit sanity (8 slices, hard mean dice > 0.95)", [] { criterion_5(); }},
      {6, "split contract (N=10 and N=335)", [] { criterion_6(); }},
      {7, "callback contract (early stop, csv, checkpoint)", [] { criterion_7(); }},
      {8, "end-to-end CLI (fixtures -> train -> evaluate -> predict -> plot)",
       [&cli] { criterion_8(cli); }},
  };

  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run();
      std::printf("[PASS] criterion %d: %s (%.1fs)\n", c.id, c.name, seconds_since(t0));
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] criterion %d: %s (%.1fs)\n       %s\n", c.id, c.name,
                  seconds_since(t0), e.what());
    }
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion selected\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
