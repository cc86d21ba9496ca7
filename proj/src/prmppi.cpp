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


#include "prmppi/prmppi.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <optional>

namespace prmppi {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Costs and certificates of a batch of sequences under the step's samples.
struct BatchEvaluation {
  Eigen::VectorXd nominal;     // penalised expected cost
  Eigen::VectorXd robust;      // -R under the robust safe set
  Eigen::VectorXd robustness;  // R under the nominal safe set
};

// When every sample is the same parameter vector (point beliefs) the batch
// is rolled once and its score replicated P times, which leaves costs and
// conformal ranks unchanged.
BatchEvaluation evaluate(const Model& model,
                         const Eigen::Ref<const Eigen::VectorXd>& x,
                         std::span<const ControlSequence> seqs,
                         const std::vector<Eigen::VectorXd>& params,
                         bool identical, const SafeSet& safe_set,
                         const SafeSet& robust_set, const CostFunction& cost,
                         const ControllerConfig& cfg) {
  const std::span<const Eigen::VectorXd> hyp =
      identical ? std::span<const Eigen::VectorXd>(params.data(), 1)
                : std::span<const Eigen::VectorXd>(params);
  const StateTensor states =
      batch_rollout(model, x, seqs, hyp, BlowupPolicy::kMark);
  const Eigen::VectorXd expected = expected_cost(states, seqs, cost);
  const int n = static_cast<int>(seqs.size());
  BatchEvaluation out{Eigen::VectorXd(n), Eigen::VectorXd(n),
                      Eigen::VectorXd(n)};
  const bool shared = &safe_set == &robust_set;
  std::vector<double> scores(params.size());
  auto score = [&](int m, const SafeSet& set) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      scores[p] = (identical && p > 0)
                      ? scores[0]
                      : nonconformity(states.trajectory(m, static_cast<int>(p)),
                                      set, params[p]);
    }
    return robustness(scores, cfg.delta).robustness;
  };
  for (int m = 0; m < n; ++m) {
    const double r = score(m, safe_set);
    out.robustness(m) = r;
    out.robust(m) = shared ? -r : -score(m, robust_set);
    out.nominal(m) = nominal_cost(expected(m), r, cfg.penalty);
  }
  return out;
}

std::vector<ControlSequence> perturb(const ControlSequence& base,
                                     const std::vector<ControlSequence>& noise,
                                     const Box& limits) {
  std::vector<ControlSequence> out;
  out.reserve(noise.size());
  for (const auto& eta : noise) {
    ControlSequence v = base + eta;
    for (Eigen::Index k = 0; k < v.rows(); ++k) {
      v.row(k) = limits.project(v.row(k).transpose()).transpose();
    }
    out.push_back(std::move(v));
  }
  return out;
}

bool any_finite(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) return true;
  }
  return false;
}

}  // namespace

const char* to_string(ActionSource source) {
  return source == ActionSource::kNominal ? "nominal" : "robust";
}

void ControllerConfig::validate(const Model& model) const {
  require(delta > 0 && delta < 1, "delta must lie in (0, 1)");
  require(samples >= 1 && rollouts >= 1 && horizon >= 1,
          "controller counts must be positive");
  require(penalty > 0, "penalty W must be positive");
  require(!robust_beta || *robust_beta > 0,
          "robust temperature must be positive");
  noise.validate();
  require(noise.sigma.rows() == model.nu(),
          "control noise dimension must match the model input");
  conformal_rank(samples, delta);
}

ControllerState ControllerState::zeros(int horizon, int nu) {
  return {ControlSequence::Zero(horizon, nu), ControlSequence::Zero(horizon, nu),
          ActionSource::kNominal};
}

ControlSequence time_shift(const ControlSequence& u) {
  ControlSequence out(u.rows(), u.cols());
  if (u.rows() == 0) return out;
  out.topRows(u.rows() - 1) = u.bottomRows(u.rows() - 1);
  out.row(u.rows() - 1) = u.row(u.rows() - 1);
  return out;
}

double nominal_cost(double expected_cost, double robustness, double penalty) {
  return robustness < 0 ? expected_cost + penalty : expected_cost;
}

double robust_cost(std::span<const double> scores, double delta) {
  return -robustness(scores, delta).robustness;
}

StepResult control_step(ControllerState& state, const Belief& belief,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Model& model, const SafeSet& safe_set,
                        const CostFunction& cost, const ControllerConfig& cfg,
                        Rng& rng) {
  return control_step(state, belief, x, model, safe_set, safe_set, cost, cfg,
                      rng);
}

StepResult control_step(ControllerState& state, const Belief& belief,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Model& model, const SafeSet& safe_set,
                        const SafeSet& robust_set, const CostFunction& cost,
                        const ControllerConfig& cfg, Rng& rng) {
  require(state.nominal.rows() == cfg.horizon &&
              state.robust.rows() == cfg.horizon &&
              state.nominal.cols() == model.nu() &&
              state.robust.cols() == model.nu(),
          "controller sequences do not match the horizon");
  const Box& limits = model.descriptor().control_bounds;
  const bool dual = cfg.mode == ControllerMode::kDual;
  StepResult result;
  StepDiagnostics& diag = result.diagnostics;

  auto t0 = Clock::now();
  state.nominal = time_shift(state.nominal);
  state.robust = time_shift(state.robust);
  diag.params = belief.sample(cfg.samples, rng);
  bool identical = true;
  for (const auto& p : diag.params) identical &= (p == diag.params.front());
  std::vector<ControlSequence> noise =
      sample_perturbations(cfg.noise, cfg.rollouts, cfg.horizon, rng);
  if (cfg.keep_unperturbed) noise.front().setZero();
  const std::vector<ControlSequence> nominal_batch =
      perturb(state.nominal, noise, limits);
  std::vector<ControlSequence> robust_batch;
  if (dual) robust_batch = perturb(state.robust, noise, limits);
  diag.timing.sampling = seconds_since(t0);

  t0 = Clock::now();
  auto run = [&](const std::vector<ControlSequence>& batch) {
    return evaluate(model, x, batch, diag.params, identical, safe_set,
                    robust_set, cost, cfg);
  };
  BatchEvaluation first, second;
  if (dual && cfg.parallel_batches) {
    auto pending = std::async(std::launch::async, run, std::cref(robust_batch));
    first = run(nominal_batch);
    second = pending.get();
  } else {
    first = run(nominal_batch);
    if (dual) second = run(robust_batch);
  }
  diag.timing.rollout = seconds_since(t0);

  t0 = Clock::now();
  auto single = [&](const ControlSequence& u) {
    return evaluate(model, x, std::span<const ControlSequence>(&u, 1),
                    diag.params, identical, safe_set, robust_set, cost, cfg);
  };
  if (!dual) {
    state.nominal = weighted_update(
        nominal_batch, importance_weights(first.nominal, cfg.noise.beta),
        limits);
    diag.timing.update = seconds_since(t0);
    t0 = Clock::now();
    const BatchEvaluation final_eval = single(state.nominal);
    diag.robustness_nominal = final_eval.robustness(0);
    diag.robustness_robust = std::numeric_limits<double>::quiet_NaN();
    diag.nominal_cost = final_eval.nominal(0);
    diag.candidate = 1;
    state.last = ActionSource::kNominal;
    diag.branch = ActionSource::kNominal;
    result.control = state.nominal.row(0).transpose();
    diag.timing.check = seconds_since(t0);
    return result;
  }

  const bool ok1 = any_finite(first.nominal);
  const bool ok2 = any_finite(second.nominal);
  if (ok1 || ok2) {
    ControlSequence u1, u2;
    double c1 = std::numeric_limits<double>::infinity(), c2 = c1;
    if (ok1) {
      u1 = weighted_update(nominal_batch,
                           importance_weights(first.nominal, cfg.noise.beta),
                           limits);
      c1 = single(u1).nominal(0);
    }
    if (ok2) {
      u2 = weighted_update(robust_batch,
                           importance_weights(second.nominal, cfg.noise.beta),
                           limits);
      c2 = single(u2).nominal(0);
    }
    // Ties (including two infinite re-rolls) keep the nominal-based candidate.
    if (ok1 && !(c2 < c1)) {
      state.nominal = std::move(u1);
      diag.candidate = 1;
    } else {
      state.nominal = std::move(u2);
      diag.candidate = 2;
    }
  } else {
    diag.nominal_degenerate = true;
    diag.candidate = 0;
  }

  const double robust_beta = cfg.robust_beta.value_or(cfg.noise.beta);
  const bool from_nominal =
      cfg.robust_from_both_batches && any_finite(first.robust);
  const bool from_robust = any_finite(second.robust);
  std::optional<BatchEvaluation> robust_eval;
  if (from_robust || from_nominal) {
    ControlSequence r1, r2;
    double c1 = std::numeric_limits<double>::infinity(), c2 = c1;
    BatchEvaluation e1, e2;
    if (from_nominal) {
      r1 = weighted_update(nominal_batch,
                           importance_weights(first.robust, robust_beta),
                           limits);
      e1 = single(r1);
      c1 = e1.robust(0);
    }
    if (from_robust) {
      r2 = weighted_update(robust_batch,
                           importance_weights(second.robust, robust_beta),
                           limits);
      if (from_nominal) {
        e2 = single(r2);
        c2 = e2.robust(0);
      }
    }
    if (from_robust && !(c1 < c2)) {
      state.robust = std::move(r2);
      diag.robust_candidate = 2;
      if (from_nominal) robust_eval = std::move(e2);
    } else {
      state.robust = std::move(r1);
      diag.robust_candidate = 1;
      robust_eval = std::move(e1);
    }
  } else if (diag.nominal_degenerate) {
    throw DegenerateBatch(
        "both the nominal and the robust batch are infeasible");
  }
  diag.timing.update = seconds_since(t0);

  t0 = Clock::now();
  const BatchEvaluation final_nominal = single(state.nominal);
  const BatchEvaluation final_robust =
      robust_eval ? *robust_eval : single(state.robust);
  diag.robustness_nominal = final_nominal.robustness(0);
  diag.robustness_robust = -final_robust.robust(0);
  if (final_nominal.robustness(0) > 0) {
    diag.branch = ActionSource::kNominal;
    diag.nominal_cost = final_nominal.nominal(0);
  } else {
    state.nominal = state.robust;
    diag.branch = ActionSource::kRobust;
    diag.nominal_cost = final_robust.nominal(0);
  }
  state.last = diag.branch;
  result.control = state.nominal.row(0).transpose();
  diag.timing.check = seconds_since(t0);
  return result;
}

}  // namespace prmppi
