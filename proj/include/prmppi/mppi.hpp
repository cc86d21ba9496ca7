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


#ifndef PRMPPI_MPPI_HPP_
#define PRMPPI_MPPI_HPP_

#include <functional>
#include <span>
#include <vector>

#include "prmppi/common.hpp"
#include "prmppi/dynamics.hpp"

namespace prmppi {

// Per-step control perturbation eta ~ N(0, sigma) and inverse temperature.
// A positive semi-definite sigma is accepted so that sigma = 0 switches the
// exploration off.
struct NoiseConfig {
  Eigen::MatrixXd sigma;
  double beta = 1.0;

  void validate() const;
};

// M sequences of K rows each.
std::vector<ControlSequence> sample_perturbations(const NoiseConfig& noise,
                                                  int count, int horizon,
                                                  Rng& rng);

// w_m = exp(-(J_m - min J) / beta) / eta. NaN costs count as +inf; throws
// DegenerateBatch when nothing is finite.
Eigen::VectorXd importance_weights(const Eigen::Ref<const Eigen::VectorXd>& costs,
                                   double beta);

// sum_m w_m V_m, then clamped into `limits`.
ControlSequence weighted_update(std::span<const ControlSequence> sequences,
                                const Eigen::Ref<const Eigen::VectorXd>& weights,
                                const Box& limits);

// Stage cost l(x_k, u_k, k) and terminal cost L(x_N).
struct CostFunction {
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& u, int k)>
      stage;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>& x)> terminal;
};

double trajectory_cost(const Eigen::Ref<const Trajectory>& states,
                       const ControlSequence& controls,
                       const CostFunction& cost);

// Mean over the P hypotheses of each sequence's trajectory cost; non-finite
// results become +inf.
Eigen::VectorXd expected_cost(const StateTensor& states,
                              std::span<const ControlSequence> sequences,
                              const CostFunction& cost);

}  // namespace prmppi

#endif  // PRMPPI_MPPI_HPP_
