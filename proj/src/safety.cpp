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


#include "prmppi/safety.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace prmppi {
namespace {

// Ceiling that treats values within rounding of an integer as that integer,
// so (P + 1)(1 - delta) = 9 does not become 10 through 9.000000000000002.
int tolerant_ceil(double v) {
  return static_cast<int>(std::ceil(v - 1e-9 * std::max(1.0, std::abs(v))));
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void check_delta(double delta) {
  if (!(delta > 0 && delta < 1)) {
    throw ContractViolation("delta must lie in (0, 1)");
  }
}

}  // namespace

SafeSet constant_safe_set(double value) {
  return {[value](const Eigen::Ref<const Eigen::VectorXd>&) { return value; },
          "constant margin " + format_number(value), {}};
}

namespace {

template <typename MarginFn>
double lowest_margin(const Eigen::Ref<const Trajectory>& trajectory,
                     const MarginFn& margin) {
  double lowest = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < trajectory.rows(); ++k) {
    if (!trajectory.row(k).allFinite()) {
      return -std::numeric_limits<double>::infinity();
    }
    const double h = margin(trajectory.row(k).transpose());
    if (std::isnan(h)) return -std::numeric_limits<double>::infinity();
    lowest = std::min(lowest, h);
  }
  return lowest;
}

}  // namespace

double nonconformity(const Eigen::Ref<const Trajectory>& trajectory,
                     const SafeSet& safe_set) {
  return -lowest_margin(trajectory, [&](const Eigen::VectorXd& x) {
    return safe_set.margin(x);
  });
}

double nonconformity(const Eigen::Ref<const Trajectory>& trajectory,
                     const SafeSet& safe_set,
                     const Eigen::Ref<const Eigen::VectorXd>& theta) {
  return -lowest_margin(trajectory, [&](const Eigen::VectorXd& x) {
    return safe_set.margin(x, theta);
  });
}

int minimum_samples(double delta) {
  check_delta(delta);
  return tolerant_ceil((1 - delta) / delta);
}

int conformal_rank(int samples, double delta) {
  check_delta(delta);
  require(samples >= 1, "conformal_rank needs at least one sample");
  const int r = tolerant_ceil((samples + 1) * (1 - delta));
  if (r > samples) {
    throw InsufficientSamples(
        "conformal rank " + std::to_string(r) + " exceeds P = " +
        std::to_string(samples) + "; delta = " + short_number(delta) +
        " needs P >= " + std::to_string(minimum_samples(delta)));
  }
  return std::max(r, 1);
}

SafetyVerdict robustness(std::span<const double> scores, double delta) {
  SafetyVerdict v;
  v.rank = conformal_rank(static_cast<int>(scores.size()), delta);
  v.scores.assign(scores.begin(), scores.end());
  for (double& s : v.scores) {
    if (std::isnan(s)) s = std::numeric_limits<double>::infinity();
  }
  std::stable_sort(v.scores.begin(), v.scores.end());
  v.robustness = -v.scores[v.rank - 1];
  return v;
}

SequenceEvaluation evaluate_sequences(
    const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x0,
    std::span<const ControlSequence> sequences,
    std::span<const Eigen::VectorXd> params, const SafeSet& safe_set,
    double delta) {
  SequenceEvaluation out;
  out.states = batch_rollout(model, x0, sequences, params, BlowupPolicy::kMark);
  std::vector<double> scores(params.size());
  out.verdicts.reserve(sequences.size());
  for (int m = 0; m < static_cast<int>(sequences.size()); ++m) {
    for (int p = 0; p < static_cast<int>(params.size()); ++p) {
      scores[p] =
          nonconformity(out.states.trajectory(m, p), safe_set, params[p]);
    }
    out.verdicts.push_back(robustness(scores, delta));
  }
  return out;
}

}  // namespace prmppi
