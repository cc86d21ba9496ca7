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


#ifndef PRMPPI_PRMPPI_HPP_
#define PRMPPI_PRMPPI_HPP_

#include <optional>
#include <span>
#include <vector>

#include "prmppi/belief.hpp"
#include "prmppi/dynamics.hpp"
#include "prmppi/mppi.hpp"
#include "prmppi/safety.hpp"

namespace prmppi {

enum class ActionSource { kNominal, kRobust };

const char* to_string(ActionSource source);

enum class ControllerMode {
  kDual,   // nominal and robust sequences with certified fallback
  kPlain,  // single penalised nominal sequence, always applied
};

struct ControllerConfig {
  double delta = 0.1;
  int samples = 10;    // P
  int rollouts = 200;  // M per branch
  int horizon = 30;    // control steps per sequence
  NoiseConfig noise;
  double penalty = 1e6;  // W
  // Temperature for the robust branch, whose cost -R is measured in units
  // of the margin h rather than of the tracking cost. Unset uses noise.beta.
  std::optional<double> robust_beta;
  // The first of the M perturbations is zero, so each batch also scores the
  // unperturbed (shifted) sequence it was drawn around.
  bool keep_unperturbed = true;
  // Also form a robust candidate from the nominal-based batch and keep the
  // better of the two on re-roll. Off updates the robust sequence from the
  // robust-based batch alone.
  bool robust_from_both_batches = true;
  ControllerMode mode = ControllerMode::kDual;
  bool parallel_batches = false;  // roll the two branches on two threads

  void validate(const Model& model) const;
};

struct ControllerState {
  ControlSequence nominal;
  ControlSequence robust;
  ActionSource last = ActionSource::kNominal;

  static ControllerState zeros(int horizon, int nu);
};

// Wall time per phase, seconds.
struct StepTiming {
  double sampling = 0.0;
  double rollout = 0.0;
  double update = 0.0;
  double check = 0.0;

  double total() const { return sampling + rollout + update + check; }
};

struct StepDiagnostics {
  ActionSource branch = ActionSource::kNominal;
  int candidate = 1;  // nominal candidate kept (1 or 2), dual mode only
  int robust_candidate = 2;  // robust candidate kept (1 or 2), dual mode only
  double robustness_nominal = 0.0;  // of the final nominal sequence
  double robustness_robust = 0.0;   // of the updated robust sequence, robust set
  double nominal_cost = 0.0;        // penalised cost of the final nominal
  bool nominal_degenerate = false;  // both nominal batches were infeasible
  std::vector<Eigen::VectorXd> params;  // the P samples shared by the step
  StepTiming timing;
};

struct StepResult {
  Eigen::VectorXd control;
  StepDiagnostics diagnostics;
};

// Drops u_0, shifts and repeats the last control.
ControlSequence time_shift(const ControlSequence& u);

// E[J] + W 1{R < 0}.
double nominal_cost(double expected_cost, double robustness, double penalty);

// -R of a score batch.
double robust_cost(std::span<const double> scores, double delta);

// One controller period. In dual mode:
//   shift both sequences; draw P parameters from the belief once; perturb
//   both bases with the same M noise sequences; roll all 2M sequences under
//   the P samples; form a nominal candidate from each batch by weighting it
//   against the penalised nominal cost and keep the cheaper one on re-roll
//   (ties keep the nominal-based candidate); update the robust sequence from
//   the robust-based batch against -R, or, with robust_from_both_batches,
//   form a robust candidate from each batch and keep the one with the lower
//   -R on re-roll (ties keep the robust-based candidate); re-roll the final
//   nominal sequence and
//   apply its first control if R > 0, otherwise copy the robust sequence into
//   the nominal one and apply the robust first control.
// Plain mode runs only the nominal batch and always applies its result.
StepResult control_step(ControllerState& state, const Belief& belief,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Model& model, const SafeSet& safe_set,
                        const CostFunction& cost, const ControllerConfig& cfg,
                        Rng& rng);

// As above, with a separate constraint set for the robust branch. The nominal
// penalty and the final certificate use safe_set; the robust cost uses
// robust_set.
StepResult control_step(ControllerState& state, const Belief& belief,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Model& model, const SafeSet& safe_set,
                        const SafeSet& robust_set, const CostFunction& cost,
                        const ControllerConfig& cfg, Rng& rng);

}  // namespace prmppi

#endif  // PRMPPI_PRMPPI_HPP_
