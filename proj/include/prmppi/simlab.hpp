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


#ifndef PRMPPI_SIMLAB_HPP_
#define PRMPPI_SIMLAB_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prmppi/belief.hpp"
#include "prmppi/prmppi.hpp"

namespace prmppi {

// A benchmark task. Time is indexed in control steps of model->dt().
struct Environment {
  std::string name;
  ModelPtr model;
  Box prior;  // randomization box for the true parameters, inside Theta
  std::optional<Eigen::VectorXd> fixed_truth;  // overrides randomization
  Eigen::VectorXd start;
  int episode_length = 0;  // steps per lap
  int laps = 1;
  std::vector<int> position_indices;  // state entries scored by RMSE

  // Position target at step t, defined for every t >= 0.
  std::function<Eigen::VectorXd(int t)> reference;
  // Tracking cost for a plan of `horizon` steps starting at step t.
  std::function<CostFunction(int t, int horizon)> cost;

  // Ground-truth constraint used for success accounting.
  SafeSet safe_set;
  // Constraint the controller sees from state x. Defaults to safe_set.
  std::function<SafeSet(const Eigen::VectorXd& x)> perceived;
  // Constraint for the robust branch. Defaults to the perceived set.
  std::function<SafeSet(const Eigen::VectorXd& x)> robust_perceived;

  Eigen::MatrixXd observation_noise;  // likelihood covariance for learning
  NoiseConfig control_noise;          // default MPPI perturbations
  int horizon = 30;                   // default planning horizon K
  std::optional<double> robust_beta;  // default robust-branch temperature

  void validate() const;
};

using EnvironmentOverrides = std::map<std::string, double>;

// "cartpole", "quad2d", "quad2d-partial" or "quad_payload". Unknown names and
// override keys raise ConfigError.
Environment make_environment(std::string_view name,
                             const EnvironmentOverrides& overrides = {});
std::vector<std::string> registered_environments();

// Root mean squared Euclidean distance between matching rows.
double compute_rmse(const Eigen::MatrixXd& positions,
                    const Eigen::MatrixXd& reference);

// 100 * max(0, 1 - mean_i |estimate_i - truth_i| / |truth_i|). Components
// with a zero true value are skipped with a warning.
double compute_pa(const Eigen::VectorXd& estimate,
                  const Eigen::VectorXd& truth);

enum class ControllerVariant {
  kOracle,          // plain MPPI on the true parameters
  kNominal,         // plain MPPI on the nominal parameters
  kRobust,          // dual structure, samples from the static prior
  kPrmppi,          // dual structure, SVGD belief
  kPrmppiUkf,       // dual structure, UKF belief
  kPrmppiNoBackup,  // SVGD belief, nominal branch only
};

const char* to_string(ControllerVariant v);
ControllerVariant parse_variant(std::string_view name);
std::vector<std::string> registered_variants();
bool estimates_parameters(ControllerVariant v);

struct ControllerSpec {
  ControllerVariant variant = ControllerVariant::kPrmppi;
  ControllerConfig mpc;
  int particles = 100;  // N
  SvgdOptions svgd;
  double ukf_process_noise = 1e-6;  // fraction of the prior variance per step
  int oracle_rollout_factor = 2;    // oracle rollouts = factor * M

  void validate(const Environment& env) const;
};

// Controller settings used when a field is not configured explicitly.
ControllerSpec default_controller(const Environment& env,
                                  ControllerVariant variant);

struct StepLog {
  int lap = 0;
  int step = 0;
  Eigen::VectorXd state;  // after the control was applied
  Eigen::VectorXd control;
  double margin = 0.0;  // true h of the logged state
  ActionSource branch = ActionSource::kNominal;
  int candidate = 1;
  double robustness_nominal = 0.0;
  double robustness_robust = 0.0;
  StepTiming timing;
  double wall_time = 0.0;  // control step plus belief update, seconds
};

struct TimeStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = 0.0;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  Eigen::VectorXd true_params;
  std::vector<double> lap_rmse;
  double rmse = 0.0;
  bool success = false;  // violations == 0 and no error
  int violations = 0;
  double min_margin = 0.0;
  std::vector<double> pa_trace;  // per lap; empty for non-learning variants
  Eigen::VectorXd final_estimate;
  int nominal_steps = 0;
  int robust_steps = 0;
  int belief_updates = 0;
  TimeStats step_time;
  std::string error;  // non-empty if the trial aborted
  std::vector<StepLog> steps;
  std::vector<std::string> belief_snapshots;  // CSV, index 0 = initial
};

struct RunOptions {
  bool keep_steps = true;
  bool keep_snapshots = true;
};

TrialRecord run_episode(const Environment& env, const ControllerSpec& spec,
                        std::uint64_t seed, const RunOptions& options = {});

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  int count = 0;
};

MetricSummary summarize(const std::vector<double>& values);

struct BenchmarkSummary {
  std::string environment;
  std::string controller;
  int trials = 0;
  MetricSummary rmse;
  std::vector<MetricSummary> lap_rmse;
  int successes = 0;
  std::optional<MetricSummary> pa;  // after the last lap; learning variants
  std::vector<MetricSummary> lap_pa;
  MetricSummary step_time;
  int fallback_steps = 0;
  int failed_trials = 0;  // trials that raised an error
};

BenchmarkSummary summarize(const Environment& env, const ControllerSpec& spec,
                           const std::vector<TrialRecord>& records);

struct BenchmarkResult {
  std::vector<TrialRecord> records;  // ordered by seed
  BenchmarkSummary summary;
};

// Trial i uses seed base_seed + i. Trials run on `workers` threads (0 picks
// the hardware concurrency); results do not depend on the worker count.
BenchmarkResult run_benchmark(const Environment& env,
                              const ControllerSpec& spec, int trials,
                              std::uint64_t base_seed, int workers = 0,
                              const RunOptions& options = {});

}  // namespace prmppi

#endif  // PRMPPI_SIMLAB_HPP_
