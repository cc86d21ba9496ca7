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


#ifndef PRMPPI_SAFETY_HPP_
#define PRMPPI_SAFETY_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prmppi/common.hpp"
#include "prmppi/dynamics.hpp"

namespace prmppi {

// C = {x : h(x) >= 0}. Sets whose geometry depends on the model parameters
// (a suspended payload of unknown length) provide h_params instead; it takes
// precedence whenever a parameter hypothesis is available.
struct SafeSet {
  using Margin = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;
  using ParamMargin =
      std::function<double(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& theta)>;

  Margin h;
  std::string description;
  ParamMargin h_params;

  double margin(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return h(x);
  }
  double margin(const Eigen::Ref<const Eigen::VectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    return h_params ? h_params(x, theta) : h(x);
  }
};

// A safe set whose margin is `value` everywhere.
SafeSet constant_safe_set(double value);

// rho = -min_k h(x_k) over every row, x_0 included. Rows with non-finite
// entries (marked blow-ups) count as infinitely unsafe.
double nonconformity(const Eigen::Ref<const Trajectory>& trajectory,
                     const SafeSet& safe_set);
double nonconformity(const Eigen::Ref<const Trajectory>& trajectory,
                     const SafeSet& safe_set,
                     const Eigen::Ref<const Eigen::VectorXd>& theta);

// Smallest P with a finite conformal quantile, ceil((1 - delta) / delta).
int minimum_samples(double delta);

// r = ceil((P + 1)(1 - delta)); throws InsufficientSamples when r > P.
int conformal_rank(int samples, double delta);

struct SafetyVerdict {
  double robustness = 0.0;     // R = -scores[rank - 1]
  int rank = 0;                // 1-indexed
  std::vector<double> scores;  // sorted ascending

  // R > 0 certifies the joint chance constraint at level 1 - delta.
  bool certified() const { return robustness > 0; }
};

SafetyVerdict robustness(std::span<const double> scores, double delta);

struct SequenceEvaluation {
  std::vector<SafetyVerdict> verdicts;  // one per sequence
  StateTensor states;
};

// Rolls every sequence out under every parameter sample and certifies each
// sequence from its P scores.
SequenceEvaluation evaluate_sequences(
    const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x0,
    std::span<const ControlSequence> sequences,
    std::span<const Eigen::VectorXd> params, const SafeSet& safe_set,
    double delta);

}  // namespace prmppi

#endif  // PRMPPI_SAFETY_HPP_
