#include <doctest.h>

#include <fstream>

#include "test_support.hpp"
#include "tumorseg/errors.hpp"
#include "tumorseg/run_config.hpp"

using namespace tumorseg;

TEST_SUITE_BEGIN("run_config");

TEST_CASE("defaults carry the published hyperparameters") {
  const RunConfig cfg;
  CHECK(cfg.epochs == 235);
  CHECK(cfg.batch_size == 1);
  CHECK(cfg.learning_rate == doctest::Approx(1e-3));
  CHECK(cfg.window_start == 22);
  CHECK(cfg.window_length == 100);
  CHECK(cfg.split_ratios == "0.68,0.20,0.12");
  CHECK(cfg.base_features == 32);
  CHECK(cfg.depth == 4);
  CHECK(cfg.in_channels == 2);
  CHECK(cfg.num_classes == 4);
  const auto r = cfg.ratios();
  CHECK(r[0] == doctest::Approx(0.68));
  CHECK(r[1] == doctest::Approx(0.20));
  CHECK(r[2] == doctest::Approx(0.12));
}

TEST_CASE("file parse, overrides, serialize round trip") {
  const auto dir = test::make_temp_dir("runcfg");
  {
    std::ofstream os(dir / "run.cfg");
    os << "# comment line\n";
    os << "epochs = 3\n";
    os << "learning_rate = 0.01\n";
    os << "data_root = /tmp/data\n";
    os << "\n";
    os << "monitor = val_dice\n";
  }
  RunConfig cfg = RunConfig::from_file(dir / "run.cfg");
  CHECK(cfg.epochs == 3);
  CHECK(cfg.learning_rate == doctest::Approx(0.01));
  CHECK(cfg.data_root == "/tmp/data");
  CHECK(cfg.monitor == "val_dice");
  CHECK(cfg.batch_size == 1);  // untouched default

  cfg.apply_overrides({{"epochs", "7"}, {"seed", "42"}});
  CHECK(cfg.epochs == 7);
  CHECK(cfg.seed == 42);

  // serialize -> parse reproduces every key
  const auto snapshot = dir / "snapshot.cfg";
  {
    std::ofstream os(snapshot);
    os << cfg.serialize();
  }
  const RunConfig back = RunConfig::from_file(snapshot);
  for (const auto& key : RunConfig::key_names()) {
    CHECK(back.get(key) == cfg.get(key));
  }
}

TEST_CASE("unknown keys and malformed values are rejected") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("bogus_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("epochs", "three"), ConfigError);
  CHECK_THROWS_AS(cfg.set("learning_rate", "fast"), ConfigError);

  const auto dir = test::make_temp_dir("runcfg_bad");
  {
    std::ofstream os(dir / "bad.cfg");
    os << "no_such_key = 1\n";
  }
  CHECK_THROWS_AS(RunConfig::from_file(dir / "bad.cfg"), ConfigError);
  {
    std::ofstream os(dir / "noeq.cfg");
    os << "epochs 3\n";
  }
  CHECK_THROWS_AS(RunConfig::from_file(dir / "noeq.cfg"), ConfigError);
}

TEST_CASE("derived objects validate their invariants") {
  RunConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.hyperparameters(), ConfigError);
  cfg.learning_rate = 1e-3;
  CHECK_NOTHROW(cfg.hyperparameters());

  cfg.split_ratios = "0.5,0.5";
  CHECK_THROWS_AS(cfg.ratios(), BadRatiosError);
  cfg.split_ratios = "a,b,c";
  CHECK_THROWS_AS(cfg.ratios(), BadRatiosError);

  cfg.split_ratios = "0.68,0.20,0.12";
  cfg.input_height = 100;  // not divisible by 2^4
  CHECK_THROWS_AS(cfg.unet_config(), ConfigInvalidError);
}

TEST_CASE("every key has a kebab-case flag spelling") {
  for (const auto& key : RunConfig::key_names()) {
    std::string flag = key;
    for (char& c : flag) {
      if (c == '_') c = '-';
    }
    CHECK(flag.find('_') == std::string::npos);
    // set/get round trip through the string interface
    RunConfig cfg;
    CHECK_NOTHROW(cfg.get(key));
  }
}

TEST_SUITE_END();
