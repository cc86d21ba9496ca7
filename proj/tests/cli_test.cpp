// Copyright 2026 The PRMPPI Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "prmppi/cli.hpp"

namespace prmppi::cli {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       ("prmppi_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

FlatConfig small_run(const std::string& env, const std::string& controller,
                     const fs::path& out) {
  FlatConfig cfg;
  apply_override(cfg, "environment=" + env);
  apply_override(cfg, "controller=" + controller);
  apply_override(cfg, "trials=2");
  apply_override(cfg, "seed=7");
  apply_override(cfg, "rollouts=16");
  apply_override(cfg, "horizon=8");
  apply_override(cfg, "particles=16");
  apply_override(cfg, "env.episode_length=6");
  apply_override(cfg, "env.laps=2");
  apply_override(cfg, "output=" + out.string());
  return cfg;
}

TEST(ConfigTest, NestedAndDottedKeysAreEquivalent) {
  const FlatConfig a =
      parse_config_text(R"({"svgd": {"iterations": 5}, "env": {"laps": 2}})");
  const FlatConfig b =
      parse_config_text(R"({"svgd.iterations": 5, "env.laps": 2})");
  EXPECT_EQ(a, b);
  EXPECT_THROW(parse_config_text("[1, 2]"), ConfigError);
  EXPECT_THROW(parse_config_text("{oops"), ConfigError);
}

TEST(ConfigTest, OverridesParseJsonOrFallBackToStrings) {
  FlatConfig cfg;
  apply_override(cfg, "delta=0.05");
  apply_override(cfg, "environment=quad2d");
  apply_override(cfg, "timing=true");
  EXPECT_EQ(cfg["delta"], "0.05");
  EXPECT_EQ(cfg["environment"], "\"quad2d\"");
  EXPECT_EQ(cfg["timing"], "true");
  EXPECT_THROW(apply_override(cfg, "novalue"), UsageError);
}

TEST(ConfigTest, MissingConfigFileIsUsageError) {
  EXPECT_THROW(load_config_file("/nonexistent/prmppi.json"), UsageError);
}

TEST(ConfigTest, RejectsTooFewSamplesCitingTheBound) {
  FlatConfig cfg;
  apply_override(cfg, "environment=cartpole");
  apply_override(cfg, "delta=0.1");
  apply_override(cfg, "samples=3");
  try {
    resolve(cfg);
    FAIL() << "P = 3 accepted";
  } catch (const InsufficientSamples& e) {
    EXPECT_NE(std::string(e.what()).find("needs P >= 9"), std::string::npos)
        << e.what();
  }
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(cfg, out, err), 2);
  EXPECT_NE(err.str().find("needs P >= 9"), std::string::npos);
}

TEST(ConfigTest, DefaultsPairDeltaWithSampleCount) {
  for (auto [delta, p] : {std::pair{"0.2", 5}, {"0.1", 10}, {"0.05", 20}}) {
    FlatConfig cfg;
    apply_override(cfg, "environment=quad2d");
    apply_override(cfg, std::string("delta=") + delta);
    EXPECT_EQ(resolve(cfg).spec.mpc.samples, p) << delta;
  }
}

TEST(ConfigTest, ValidateAndRunShareOneValidator) {
  const fs::path dir = scratch_dir("shared");
  std::vector<FlatConfig> configs;
  configs.push_back(small_run("cartpole", "nominal", dir / "ok"));
  FlatConfig unknown = configs[0];
  apply_override(unknown, "rollout=5");
  configs.push_back(unknown);
  FlatConfig bad_env = configs[0];
  apply_override(bad_env, "environment=pendulum");
  configs.push_back(bad_env);
  FlatConfig bad_override = configs[0];
  apply_override(bad_override, "env.radius=0.3");  // cartpole has no radius
  configs.push_back(bad_override);
  FlatConfig bad_type = configs[0];
  apply_override(bad_type, "trials=many");
  configs.push_back(bad_type);
  FlatConfig bad_samples = configs[0];
  apply_override(bad_samples, "samples=3");
  configs.push_back(bad_samples);
  FlatConfig bad_variant = configs[0];
  apply_override(bad_variant, "controller=gpmpc");
  configs.push_back(bad_variant);

  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::ostringstream out, err;
    const int v = cmd_validate(configs[i], out, err);
    const int r = cmd_run(configs[i], out, err);
    EXPECT_EQ(v == 0, r == 0) << "config " << i << ": " << err.str();
    EXPECT_EQ(v == 0, i == 0) << "config " << i << ": " << err.str();
  }
}

TEST(RunTest, RepeatedRunsAreByteIdentical) {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(small_run("cartpole", "prmppi", a), out, err), 0)
      << err.str();
  ASSERT_EQ(cmd_run(small_run("cartpole", "prmppi", b), out, err), 0)
      << err.str();
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) {
    names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  const std::vector<std::string> expected = {
      "belief_7_lap0.csv", "belief_7_lap1.csv", "belief_7_lap2.csv",
      "belief_8_lap0.csv", "belief_8_lap1.csv", "belief_8_lap2.csv",
      "summary.json",      "trial_7.csv",       "trial_8.csv"};
  EXPECT_EQ(names, expected);
  for (const auto& n : names) {
    EXPECT_EQ(slurp(a / n), slurp(b / n)) << n;
  }
}

TEST(RunTest, OracleSummaryHasNoAccuracyRow) {
  const fs::path dir = scratch_dir("oracle");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(small_run("quad2d", "oracle", dir), out, err), 0)
      << err.str();
  const std::string summary = slurp(dir / "summary.json");
  EXPECT_NE(summary.find("\"RMSE\""), std::string::npos);
  EXPECT_NE(summary.find("\"SR\""), std::string::npos);
  EXPECT_EQ(summary.find("\"PA\""), std::string::npos);
  const std::string table = cmd_table(dir);
  EXPECT_NE(table.find("oracle"), std::string::npos);
  EXPECT_NE(table.find(" - "), std::string::npos);

  const fs::path learn = scratch_dir("learn");
  ASSERT_EQ(cmd_run(small_run("quad2d", "prmppi", learn), out, err), 0);
  EXPECT_NE(slurp(learn / "summary.json").find("\"PA\""), std::string::npos);
}

TEST(RunTest, TimingColumnsAreOptIn) {
  const fs::path plain = scratch_dir("plain"), timed = scratch_dir("timed");
  std::ostringstream out, err;
  FlatConfig cfg = small_run("cartpole", "nominal", plain);
  ASSERT_EQ(cmd_run(cfg, out, err), 0);
  apply_override(cfg, "output=" + timed.string());
  apply_override(cfg, "timing=true");
  ASSERT_EQ(cmd_run(cfg, out, err), 0);
  const std::string a = slurp(plain / "trial_7.csv");
  const std::string b = slurp(timed / "trial_7.csv");
  EXPECT_EQ(a.find("t_step"), std::string::npos);
  EXPECT_NE(b.find("t_step"), std::string::npos);
  EXPECT_EQ(slurp(plain / "summary.json").find("step_time_ms"),
            std::string::npos);
  EXPECT_NE(slurp(timed / "summary.json").find("step_time_ms"),
            std::string::npos);
}

TEST(RunTest, CsvUsesFullPrecision) {
  const fs::path dir = scratch_dir("precision");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(small_run("cartpole", "nominal", dir), out, err), 0);
  std::ifstream in(dir / "trial_7.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  // Third column is x0; %.17g round-trips.
  std::stringstream fields(row);
  std::string lap, step, x0;
  std::getline(fields, lap, ',');
  std::getline(fields, step, ',');
  std::getline(fields, x0, ',');
  EXPECT_EQ(format_number(std::stod(x0)), x0);
  EXPECT_GE(x0.size(), 15u);
}

TEST(IoTest, AtomicWriteReplacesAndLeavesNoTemporaries) {
  const fs::path dir = scratch_dir("atomic");
  write_file_atomic(dir / "f.txt", "first");
  write_file_atomic(dir / "f.txt", "second");
  EXPECT_EQ(slurp(dir / "f.txt"), "second");
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1);
  EXPECT_THROW(write_file_atomic(dir / "missing" / "f.txt", "x"),
               std::exception);
}

TEST(IoTest, UnwritableOutputIsIoError) {
  const fs::path dir = scratch_dir("blocked");
  write_file_atomic(dir / "file", "not a directory");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(small_run("cartpole", "nominal", dir / "file" / "sub"),
                    out, err),
            3);
}

TEST(TableTest, MissingSummariesAreUsageErrors) {
  EXPECT_THROW(cmd_table(scratch_dir("empty")), UsageError);
}

}  // namespace
}  // namespace prmppi::cli
