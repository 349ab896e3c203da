// Copyright 2026 The fairsample Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fis/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "serialize.hpp"

namespace fis {
namespace {

namespace fs = std::filesystem;

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fis_experiment_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path write(const std::string& name, const std::string& body) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(Command c, const fs::path& config, const fs::path& out, std::string* err_text = nullptr) const {
    CliOptions opts;
    opts.command = c;
    opts.config = config;
    opts.out = out;
    std::ostringstream out_stream;
    std::ostringstream err_stream;
    const int code = run_cli(opts, out_stream, err_stream);
    if (err_text) *err_text = err_stream.str();
    return code;
  }

  fs::path dir_;
};

constexpr const char* kSmallFis = R"({
  "seed": 3,
  "dataset": {"group_shift": {"train_size": 120, "pool_size": 300, "validation_size": 100, "test_size": 150}},
  "train": {"epochs": 20},
  "fis": {"rounds": 2, "budget_per_round": 8, "hidden": [6], "retrain_epochs": 5}
})";

TEST_F(ExperimentTest, ParsesDefaultsAndMaterializesThem) {
  const ExperimentConfig cfg = parse_experiment_config(kSmallFis, dir_);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.fis.rounds, 2u);
  EXPECT_EQ(cfg.fis.train.epochs, 20u);
  EXPECT_DOUBLE_EQ(cfg.fis.tolerance, 0.05);
  const std::string resolved = resolved_config_text(cfg);
  const json j = json::parse(resolved);
  EXPECT_TRUE(j.contains("fis"));
  EXPECT_TRUE(j.at("fis").contains("tolerance"));
  EXPECT_TRUE(j.at("train").contains("new_data_weight"));
  // The echo is itself a valid config and resolves to the same text.
  const ExperimentConfig again = parse_experiment_config(resolved, dir_);
  EXPECT_EQ(resolved_config_text(again), resolved);
  EXPECT_EQ(config_hash(again), config_hash(cfg));
}

TEST_F(ExperimentTest, HashIgnoresLocationButNotContent) {
  ExperimentConfig a = parse_experiment_config(kSmallFis, dir_);
  ExperimentConfig b = a;
  b.output_dir = "/somewhere/else";
  b.threads = 8;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 4;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_NE(stage_seed(a, "split"), stage_seed(a, "init"));
}

void expect_error_mentions(const std::string& text, const std::string& needle) {
  try {
    parse_experiment_config(text, fs::temp_directory_path());
    FAIL() << "expected failure mentioning " << needle;
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST_F(ExperimentTest, ValidationErrorsNameTheField) {
  expect_error_mentions(R"({"dataset": {"group_shift": {}}, "fis": {"budget_per_round": 0}})", "budget_per_round");
  expect_error_mentions(R"({"dataset": {"group_shift": {}}, "fis": {"bogus": 1}})", "fis.bogus");
  expect_error_mentions(R"({"seed": 1})", "dataset");
  expect_error_mentions(R"({"dataset": {"group_shift": {}, "mixture": {}}})", "dataset");
  expect_error_mentions(R"({"dataset": {"mixture": {"frequencies_train": [0.25,0.25,0.25,0.25]}}})",
                        "frequencies_test");
  expect_error_mentions(R"({"dataset": {"mixture": {"frequencies_train": [0.5,0.5,0.0,0.1],
                            "frequencies_test": [0.25,0.25,0.25,0.25]}}})", "frequencies_train");
  expect_error_mentions(R"({"dataset": {"group_shift": {}}, "influence": {"checkpoint": "nope.txt"}})",
                        "influence.checkpoint");
  expect_error_mentions(R"({"dataset": {"csv": {"path": "missing.csv", "schema": {"features": ["a"],
                            "label": "y", "group": "g"}}}})", "dataset.csv.path");
  expect_error_mentions(R"({"dataset": {"group_shift": {}}, "bounds": {"delta": 0}})", "delta");
  expect_error_mentions(R"({"dataset": {"group_shift": {}}, "fis": {"metric": "XYZ"}})", "fis");
  expect_error_mentions("{not json", "config");
}

TEST_F(ExperimentTest, RunFisWritesArtifacts) {
  const fs::path cfg = write("fis.json", kSmallFis);
  const fs::path out = dir_ / "out";
  ASSERT_EQ(run(Command::RunFis, cfg, out), 0);
  for (const char* name : {"records.jsonl", "summary.json", "config.resolved", "run.log"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  for (int t = 0; t <= 2; ++t) EXPECT_TRUE(fs::exists(out / "checkpoints" / ("round_" + std::to_string(t) + ".txt")));

  const json summary = json::parse(read(out / "summary.json"));
  for (const char* part : {"warm_start", "final"}) {
    EXPECT_TRUE(summary.at(part).at("accuracy").is_number());
    EXPECT_TRUE(summary.at(part).at("dp_gap").is_number());
  }
  const ExperimentConfig parsed = load_experiment_config(cfg);
  std::istringstream lines(read(out / "records.jsonl"));
  std::string line;
  int rounds = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 3u);
    EXPECT_TRUE(j.at("config_hash").is_string());
    rounds += j.at("type") == "round" ? 1 : 0;
  }
  EXPECT_EQ(rounds, 3);
  EXPECT_EQ(read(out / "records.jsonl").find("T0"), std::string::npos);
  EXPECT_NE(read(out / "run.log").find("Z "), std::string::npos);
}

TEST_F(ExperimentTest, RunsAreByteIdenticalAndEchoReproduces) {
  const fs::path cfg = write("fis.json", kSmallFis);
  ASSERT_EQ(run(Command::RunFis, cfg, dir_ / "a"), 0);
  ASSERT_EQ(run(Command::RunFis, cfg, dir_ / "b"), 0);
  EXPECT_EQ(read(dir_ / "a" / "records.jsonl"), read(dir_ / "b" / "records.jsonl"));
  ASSERT_EQ(run(Command::RunFis, dir_ / "a" / "config.resolved", dir_ / "c"), 0);
  EXPECT_EQ(read(dir_ / "a" / "records.jsonl"), read(dir_ / "c" / "records.jsonl"));
}

TEST_F(ExperimentTest, SeedOverrideChangesRecords) {
  const fs::path cfg = write("fis.json", kSmallFis);
  CliOptions opts;
  opts.command = Command::RunErm;
  opts.config = cfg;
  opts.out = dir_ / "s9";
  opts.seed = 9;
  std::ostringstream o, e;
  ASSERT_EQ(run_cli(opts, o, e), 0);
  const json summary = json::parse(read(dir_ / "s9" / "summary.json"));
  EXPECT_EQ(summary.at("seed").get<std::uint64_t>(), 9u);
  EXPECT_EQ(summary.at("strategy"), "ERM");
}

TEST_F(ExperimentTest, BudgetZeroFailsBeforeTraining) {
  const fs::path cfg = write("bad.json", R"({"dataset": {"group_shift": {}}, "fis": {"budget_per_round": 0}})");
  std::string err;
  EXPECT_NE(run(Command::RunFis, cfg, dir_ / "bad", &err), 0);
  EXPECT_NE(err.find("budget_per_round"), std::string::npos) << err;
  EXPECT_FALSE(fs::exists(dir_ / "bad" / "records.jsonl"));
}

TEST_F(ExperimentTest, CommandMismatchAndSourceRules) {
  const fs::path cfg = write("cmd.json", R"({"command": "run-erm", "dataset": {"group_shift": {}}})");
  std::string err;
  EXPECT_NE(run(Command::RunFis, cfg, dir_ / "x", &err), 0);
  EXPECT_NE(err.find("command"), std::string::npos);
  const fs::path gs = write("gs.json", R"({"dataset": {"group_shift": {}}})");
  EXPECT_NE(run(Command::VerifyBounds, gs, dir_ / "y", &err), 0);
  EXPECT_NE(err.find("mixture"), std::string::npos);
}

TEST_F(ExperimentTest, CsvPipeline) {
  std::ostringstream csv;
  csv << "a,b,label,grp\n";
  for (int i = 0; i < 200; ++i) {
    const int y = i % 2;
    const int g = (i / 2) % 2;
    csv << (y ? 1.0 : -1.0) + 0.01 * (i % 17) << "," << 0.5 * g + 0.02 * (i % 11) << "," << y << "," << g << "\n";
  }
  write("data.csv", csv.str());
  const fs::path cfg = write("csv.json", R"({
    "dataset": {"csv": {"path": "data.csv", "schema": {"features": ["a", "b"], "label": "label", "group": "grp"},
                        "balance": true}},
    "train": {"epochs": 10},
    "fis": {"rounds": 1, "budget_per_round": 5, "hidden": [4], "retrain_epochs": 2}
  })");
  ASSERT_EQ(run(Command::RunBaseline, cfg, dir_ / "csv"), 0);
  const json summary = json::parse(read(dir_ / "csv" / "summary.json"));
  EXPECT_EQ(summary.at("strategy"), "Random");
  const json resolved = json::parse(read(dir_ / "csv" / "config.resolved"));
  EXPECT_TRUE(fs::path(resolved.at("dataset").at("csv").at("path").get<std::string>()).is_absolute());
}

TEST_F(ExperimentTest, VerifyInfluenceZeroStep) {
  const fs::path cfg = write("vi.json", R"({
    "dataset": {"group_shift": {"train_size": 80, "pool_size": 60, "validation_size": 50, "test_size": 50}},
    "train": {"epochs": 5}, "fis": {"hidden": [4]},
    "influence": {"num_candidates": 20, "eta": 0}
  })");
  ASSERT_EQ(run(Command::VerifyInfluence, cfg, dir_ / "vi"), 0);
  std::istringstream lines(read(dir_ / "vi" / "records.jsonl"));
  std::string line;
  int pairs = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    if (j.at("type") != "influence_pair") continue;
    EXPECT_EQ(j.at("exact").get<double>(), 0.0);
    EXPECT_EQ(j.at("first_order").get<double>(), 0.0);
    ++pairs;
  }
  EXPECT_EQ(pairs, 20);
}

TEST_F(ExperimentTest, VerifyInfluenceFromCheckpoint) {
  const fs::path cfg = write("fis.json", kSmallFis);
  ASSERT_EQ(run(Command::RunErm, cfg, dir_ / "erm"), 0);
  const fs::path vi = write("vi.json", R"({
    "dataset": {"group_shift": {"train_size": 120, "pool_size": 300, "validation_size": 100, "test_size": 150}},
    "fis": {"hidden": [6]},
    "influence": {"checkpoint": "erm/checkpoints/round_0.txt", "num_candidates": 30}
  })");
  ASSERT_EQ(run(Command::VerifyInfluence, vi, dir_ / "vi"), 0);
  const json summary = json::parse(read(dir_ / "vi" / "summary.json"));
  EXPECT_EQ(summary.at("candidates").get<int>(), 30);
  EXPECT_LT(summary.at("median_relative_error").get<double>(), 0.05);
}

TEST_F(ExperimentTest, VerifyBoundsWritesOneLinePerTrial) {
  const fs::path cfg = write("vb.json", R"({
    "dataset": {"mixture": {"frequencies_train": [0.25, 0.25, 0.25, 0.25],
                            "frequencies_test": [0.25, 0.25, 0.25, 0.25], "train_size": 800, "test_size": 800}},
    "bounds": {"trials": 3, "samples_per_component": 100, "reference_size": 400, "train": {"epochs": 5}}
  })");
  ASSERT_EQ(run(Command::VerifyBounds, cfg, dir_ / "vb"), 0);
  std::istringstream lines(read(dir_ / "vb" / "records.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    EXPECT_EQ(j.at("type"), "bound_trial");
    EXPECT_TRUE(j.at("generalization").contains("slack"));
    ++n;
  }
  EXPECT_EQ(n, 3);
}

TEST(CommandNames, RoundTrip) {
  for (Command c : {Command::RunErm, Command::RunFis, Command::RunBaseline, Command::VerifyInfluence,
                    Command::VerifyBounds}) {
    EXPECT_EQ(parse_command(to_string(c)), c);
  }
  EXPECT_THROW(parse_command("run"), std::exception);
}

}  // namespace
}  // namespace fis
