#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "tumorseg/run_config.hpp"
#include "tumorseg/unet.hpp"

using namespace tumorseg;
namespace fs = std::filesystem;

#ifndef TUMORSEG_CLI_BIN
#error "TUMORSEG_CLI_BIN must point at the tumorseg binary"
#endif

TEST_SUITE_BEGIN("cli");

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args, const fs::path& workdir) {
  const fs::path log = workdir / "cli.log";
  const std::string cmd =
      std::string(TUMORSEG_CLI_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = rc < 0 ? rc : WEXITSTATUS(rc);
  std::ifstream is(log);
  r.output.assign(std::istreambuf_iterator<char>(is), {});
  return r;
}

// Strips the wall-clock seconds column so reruns can be compared.
std::string csv_without_seconds(const fs::path& file) {
  std::ifstream is(file);
  std::ostringstream out;
  std::string line;
  while (std::getline(is, line)) {
    const auto comma = line.rfind(',');
    out << line.substr(0, comma) << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("missing data root exits nonzero and names the path") {
  const auto dir = test::make_temp_dir("cli_missing_root");
  const auto r = run_cli("train --data-root /no/such/dataset --output-dir " +
                             (dir / "out").string(),
                         dir);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("/no/such/dataset") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  const auto dir = test::make_temp_dir("cli_usage");
  CHECK(run_cli("no-such-command", dir).exit_code == 1);
  CHECK(run_cli("train --epochs nope --data-root x", dir).exit_code == 1);
}

TEST_CASE("same seed twice produces identical logs apart from timing") {
  const auto dir = test::make_temp_dir("cli_repro");
  REQUIRE(run_cli("make-fixtures --output-dir " + (dir / "fx").string() +
                      " --cases 5 --seed 3 --shape 24x24x8",
                  dir).exit_code == 0);
  const std::string common =
      " --data-root " + (dir / "fx").string() +
      " --epochs 2 --base-features 2 --depth 1 --input-height 16 --input-width 16"
      " --window-start 1 --window-length 4 --seed 3";
  REQUIRE(run_cli("train --output-dir " + (dir / "a").string() + common, dir).exit_code ==
          0);
  REQUIRE(run_cli("train --output-dir " + (dir / "b").string() + common, dir).exit_code ==
          0);
  CHECK(csv_without_seconds(dir / "a" / "history.csv") ==
        csv_without_seconds(dir / "b" / "history.csv"));

  // config snapshots agree on everything but the differing output_dir
  const auto snapshot_lines = [](const fs::path& p) {
    std::ifstream is(p);
    std::string line, out;
    while (std::getline(is, line)) {
      if (line.rfind("output_dir", 0) != 0) out += line + '\n';
    }
    return out;
  };
  CHECK(snapshot_lines(dir / "a" / "run_config.txt") ==
        snapshot_lines(dir / "b" / "run_config.txt"));
}

TEST_CASE("checkpoint with mismatched channels reports a shape error") {
  const auto dir = test::make_temp_dir("cli_badckpt");
  REQUIRE(run_cli("make-fixtures --output-dir " + (dir / "fx").string() +
                      " --cases 4 --seed 1 --shape 24x24x8",
                  dir).exit_code == 0);

  UNetConfig cfg;
  cfg.in_channels = 3;  // pipeline always produces 2 channels
  cfg.base_features = 1;
  cfg.depth = 1;
  cfg.input_height = 16;
  cfg.input_width = 16;
  UNet model(cfg);
  model.save_checkpoint(dir / "bad.ckpt");

  const auto r = run_cli("evaluate --checkpoint " + (dir / "bad.ckpt").string() +
                             " --data-root " + (dir / "fx").string() +
                             " --partition all --window-start 1 --window-length 4" +
                             " --output-dir " + (dir / "out").string(),
                         dir);
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("expects") != std::string::npos);  // shape mismatch message
}

TEST_CASE("evaluating two dataset roots yields a two-row comparison") {
  const auto dir = test::make_temp_dir("cli_two_roots");
  for (const char* fx : {"fxA", "fxB"}) {
    REQUIRE(run_cli(std::string("make-fixtures --output-dir ") + (dir / fx).string() +
                        " --cases 5 --seed 5 --shape 24x24x8",
                    dir).exit_code == 0);
  }
  const std::string flags =
      " --base-features 2 --depth 1 --input-height 16 --input-width 16"
      " --window-start 1 --window-length 4 --seed 5";
  REQUIRE(run_cli("train --data-root " + (dir / "fxA").string() + " --output-dir " +
                      (dir / "run").string() + " --epochs 1" + flags,
                  dir).exit_code == 0);

  const auto r = run_cli("evaluate --checkpoint " + (dir / "run" / "best.ckpt").string() +
                             " --data-root " + (dir / "fxA").string() + " " +
                             (dir / "fxB").string() + " --partition all --output-dir " +
                             (dir / "run").string() + flags,
                         dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("fxA") != std::string::npos);
  CHECK(r.output.find("fxB") != std::string::npos);

  std::ifstream is(dir / "run" / "report.csv");
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);  // header + one row per dataset
}

TEST_CASE("predict without a t1ce volume fails with a data error") {
  const auto dir = test::make_temp_dir("cli_no_t1ce");
  REQUIRE(run_cli("make-fixtures --output-dir " + (dir / "fx").string() +
                      " --cases 5 --seed 2 --shape 24x24x8",
                  dir).exit_code == 0);
  const std::string flags =
      " --base-features 2 --depth 1 --input-height 16 --input-width 16"
      " --window-start 1 --window-length 4 --seed 2";
  REQUIRE(run_cli("train --data-root " + (dir / "fx").string() + " --output-dir " +
                      (dir / "run").string() + " --epochs 1" + flags,
                  dir).exit_code == 0);
  fs::remove(dir / "fx" / "case_000" / "case_000_t1ce.nii.gz");

  const auto r = run_cli("predict --checkpoint " + (dir / "run" / "best.ckpt").string() +
                             " --case-dir " + (dir / "fx" / "case_000").string() +
                             " --output-dir " + (dir / "run").string() +
                             " --window-start 1 --window-length 4",
                         dir);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("t1ce") != std::string::npos);
}

TEST_CASE("plot rejects a csv with a missing column and names it") {
  const auto dir = test::make_temp_dir("cli_badcsv");
  {
    std::ofstream os(dir / "broken.csv");
    os << "epoch,loss\n1,0.5\n";
  }
  const auto r = run_cli("plot " + (dir / "broken.csv").string() + " --output-dir " +
                             (dir / "plots").string(),
                         dir);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("accuracy") != std::string::npos);
}

TEST_CASE("help lists every config key as a flag") {
  const auto dir = test::make_temp_dir("cli_help");
  for (const char* sub : {"train", "evaluate", "predict"}) {
    const auto r = run_cli(std::string(sub) + " --help", dir);
    CHECK(r.exit_code == 0);
    for (const auto& key : RunConfig::key_names()) {
      std::string flag = "--" + key;
      for (char& c : flag) {
        if (c == '_') c = '-';
      }
      const std::string message = std::string(sub) + " --help is missing " + flag;
      CHECK_MESSAGE(r.output.find(flag) != std::string::npos, message);
    }
  }
}

TEST_SUITE_END();
