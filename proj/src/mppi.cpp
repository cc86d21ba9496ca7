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


#include "prmppi/mppi.hpp"

#include <cmath>
#include <limits>

namespace prmppi {

void NoiseConfig::validate() const {
  require(sigma.rows() == sigma.cols() && sigma.rows() > 0,
          "control noise covariance must be square");
  require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "control noise covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  require(eig.eigenvalues().minCoeff() >= -1e-12,
          "control noise covariance must be positive semi-definite");
  require(beta > 0, "inverse temperature beta must be positive");
}

std::vector<ControlSequence> sample_perturbations(const NoiseConfig& noise,
                                                  int count, int horizon,
                                                  Rng& rng) {
  noise.validate();
  require(count >= 1 && horizon >= 1, "perturbation counts must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(noise.sigma);
  const Eigen::MatrixXd root =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Eigen::Index nu = noise.sigma.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ControlSequence> out(count, ControlSequence(horizon, nu));
  Eigen::VectorXd z(nu);
  for (auto& seq : out) {
    for (int k = 0; k < horizon; ++k) {
      for (Eigen::Index i = 0; i < nu; ++i) z(i) = normal(rng);
      seq.row(k) = (root * z).transpose();
    }
  }
  return out;
}

Eigen::VectorXd importance_weights(
    const Eigen::Ref<const Eigen::VectorXd>& costs, double beta) {
  require(beta > 0, "inverse temperature beta must be positive");
  require(costs.size() >= 1, "empty cost batch");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double rho = kInf;
  for (Eigen::Index m = 0; m < costs.size(); ++m) {
    if (std::isfinite(costs(m))) rho = std::min(rho, costs(m));
  }
  if (!std::isfinite(rho)) {
    throw DegenerateBatch("every sampled sequence has infinite cost");
  }
  Eigen::VectorXd w(costs.size());
  for (Eigen::Index m = 0; m < costs.size(); ++m) {
    w(m) = std::isfinite(costs(m)) ? std::exp(-(costs(m) - rho) / beta) : 0.0;
  }
  return w / w.sum();
}

ControlSequence weighted_update(std::span<const ControlSequence> sequences,
                                const Eigen::Ref<const Eigen::VectorXd>& weights,
                                const Box& limits) {
  require(!sequences.empty(), "empty sequence batch");
  require(static_cast<Eigen::Index>(sequences.size()) == weights.size(),
          "one weight per sequence required");
  ControlSequence out = ControlSequence::Zero(sequences[0].rows(),
                                              sequences[0].cols());
  for (std::size_t m = 0; m < sequences.size(); ++m) {
    if (weights(m) != 0) out += weights(m) * sequences[m];
  }
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    out.row(k) = limits.project(out.row(k).transpose()).transpose();
  }
  return out;
}

double trajectory_cost(const Eigen::Ref<const Trajectory>& states,
                       const ControlSequence& controls,
                       const CostFunction& cost) {
  const int horizon = static_cast<int>(controls.rows());
  require(states.rows() == horizon + 1, "trajectory length mismatch");
  if (!states.allFinite()) return std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (int k = 0; k < horizon; ++k) {
    total += cost.stage(states.row(k).transpose(),
                        controls.row(k).transpose(), k);
  }
  total += cost.terminal(states.row(horizon).transpose());
  return std::isfinite(total) ? total
                              : std::numeric_limits<double>::infinity();
}

Eigen::VectorXd expected_cost(const StateTensor& states,
                              std::span<const ControlSequence> sequences,
                              const CostFunction& cost) {
  require(static_cast<int>(sequences.size()) == states.sequences(),
          "sequence count mismatch");
  Eigen::VectorXd out(states.sequences());
  for (int m = 0; m < states.sequences(); ++m) {
    double sum = 0.0;
    for (int p = 0; p < states.hypotheses(); ++p) {
      sum += trajectory_cost(states.trajectory(m, p), sequences[m], cost);
    }
    const double mean = sum / states.hypotheses();
    out(m) = std::isfinite(mean) ? mean : std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace prmppi
