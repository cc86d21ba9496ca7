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


// Command-line entry point: `prmppi run|validate|table`.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prmppi/cli.hpp"

namespace {

using prmppi::cli::FlatConfig;

struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> env, controller, preset, output;
  std::optional<int> trials, workers, samples, rollouts, horizon;
  std::optional<long long> seed;
  std::optional<double> delta;
  bool timing = false;
  bool no_steps = false;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON configuration file");
    app->add_option("--env", env, "environment name");
    app->add_option("--controller", controller, "controller variant");
    app->add_option("--preset", preset, "desk or full");
    app->add_option("--trials", trials, "number of trials");
    app->add_option("--seed", seed, "base seed; trial i uses seed + i");
    app->add_option("--delta", delta, "violation probability");
    app->add_option("--samples", samples, "parameter samples P");
    app->add_option("--rollouts", rollouts, "rollouts M per branch");
    app->add_option("--horizon", horizon, "planning horizon K");
    app->add_option("-o,--out", output, "output directory");
    app->add_option("-j,--workers", workers,
                    "worker threads (default: available cores)");
    app->add_flag("--timing", timing, "record per-step timings");
    app->add_flag("--no-step-log", no_steps, "skip trial_<seed>.csv files");
    app->add_option("--set", sets, "override, key=value")->take_all();
  }

  FlatConfig build() const {
    using prmppi::cli::quote;
    using prmppi::cli::set_value;
    FlatConfig cfg;
    if (!config_path.empty()) cfg = prmppi::cli::load_config_file(config_path);
    if (env) set_value(cfg, "environment", quote(*env));
    if (controller) set_value(cfg, "controller", quote(*controller));
    if (preset) set_value(cfg, "preset", quote(*preset));
    if (output) set_value(cfg, "output", quote(*output));
    if (trials) set_value(cfg, "trials", std::to_string(*trials));
    if (workers) set_value(cfg, "workers", std::to_string(*workers));
    if (samples) set_value(cfg, "samples", std::to_string(*samples));
    if (rollouts) set_value(cfg, "rollouts", std::to_string(*rollouts));
    if (horizon) set_value(cfg, "horizon", std::to_string(*horizon));
    if (seed) set_value(cfg, "seed", std::to_string(*seed));
    if (delta) set_value(cfg, "delta", prmppi::format_number(*delta));
    if (timing) set_value(cfg, "timing", "true");
    if (no_steps) set_value(cfg, "log.steps", "false");
    for (const auto& s : sets) prmppi::cli::apply_override(cfg, s);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter-robust MPPI benchmark runner"};
  app.require_subcommand(1);

  ConfigFlags run_flags, validate_flags;
  CLI::App* run = app.add_subcommand("run", "run a benchmark");
  run_flags.attach(run);
  CLI::App* validate =
      app.add_subcommand("validate", "check a configuration without running");
  validate_flags.attach(validate);
  std::string table_dir;
  CLI::App* table =
      app.add_subcommand("table", "tabulate summary.json files in a directory");
  table->add_option("dir", table_dir, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return prmppi::cli::cmd_run(run_flags.build(), std::cout, std::cerr);
    if (*validate) {
      return prmppi::cli::cmd_validate(validate_flags.build(), std::cout,
                                       std::cerr);
    }
    std::cout << prmppi::cli::cmd_table(table_dir);
    return 0;
  } catch (const prmppi::cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
