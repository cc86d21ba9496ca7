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

#ifndef PRMPPI_DYNAMICS_HPP_
#define PRMPPI_DYNAMICS_HPP_

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "prmppi/common.hpp"

namespace prmppi {

struct ModelDescriptor {
  std::string name;
  int nx = 0;
  int nu = 0;
  int ntheta = 0;
  double dt = 0.0;  // seconds per step
  Eigen::VectorXd nominal_params;
  std::vector<std::string> param_labels;
  Box param_bounds;    // admissible parameter set
  Box control_bounds;  // input limits
};

// Model constants that are not estimated (pole length, thrust limits, ...),
// keyed by name. Unknown keys are rejected by the factory.
using ModelOptions = std::map<std::string, double>;

// Discrete-time parametric dynamics x' = f(x, u, theta).
//
// The public methods check dimensions and finiteness; subclasses implement
// the raw pointer kernels, which are also what batch rollouts call in their
// inner loop.
class Model {
 public:
  virtual ~Model() = default;

  const ModelDescriptor& descriptor() const { return desc_; }
  const std::string& name() const { return desc_.name; }
  int nx() const { return desc_.nx; }
  int nu() const { return desc_.nu; }
  int ntheta() const { return desc_.ntheta; }
  double dt() const { return desc_.dt; }

  // Throws ContractViolation on dimension mismatch and IntegrationBlowup when
  // the result is not finite.
  Eigen::VectorXd step(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& u,
                       const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  // d step / d theta, nx x ntheta.
  Eigen::MatrixXd param_jacobian(
      const Eigen::Ref<const Eigen::VectorXd>& x,
      const Eigen::Ref<const Eigen::VectorXd>& u,
      const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  Eigen::VectorXd saturate(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    return desc_.control_bounds.project(u);
  }

  // Rolls `controls` (N x nu) out from x0 into `out` ((N + 1) x nx, row
  // major). Returns -1 on success, otherwise the index k of the first step
  // whose result was non-finite; rows from k + 1 on are then NaN.
  int rollout_raw(const double* x0, const double* controls, int horizon,
                  const double* theta, double* out) const;

  // Continuous-time right-hand side, exposed for reference integrators in
  // tests. Discrete-only models throw.
  virtual Eigen::VectorXd continuous_derivative(
      const Eigen::Ref<const Eigen::VectorXd>& x,
      const Eigen::Ref<const Eigen::VectorXd>& u,
      const Eigen::Ref<const Eigen::VectorXd>& theta) const;

 protected:
  explicit Model(ModelDescriptor desc);

  virtual void step_raw(const double* x, const double* u, const double* theta,
                        double* out) const = 0;
  virtual void jacobian_raw(const double* x, const double* u,
                            const double* theta, double* out_colmajor) const;
  virtual int rollout_kernel(const double* x0, const double* controls,
                             int horizon, const double* theta,
                             double* out) const;

  // Central differences of step_raw with per-parameter step
  // 1e-6 * max(|theta_i|, width_i of the parameter box).
  void finite_difference_jacobian(const double* x, const double* u,
                                  const double* theta,
                                  double* out_colmajor) const;

 private:
  void check_dims(Eigen::Index x, Eigen::Index u, Eigen::Index theta) const;

  ModelDescriptor desc_;
};

using ModelPtr = std::shared_ptr<const Model>;

// Registry: "cartpole", "quad2d", "quad_payload", "scalar_linear".
ModelPtr make_model(std::string_view name, const ModelOptions& options = {});
std::vector<std::string> registered_models();

// M x P x (N + 1) x nx state tensor, stored so that every (m, p) trajectory
// is a contiguous row-major (N + 1) x nx block.
class StateTensor {
 public:
  StateTensor() = default;
  StateTensor(int sequences, int hypotheses, int horizon, int nx);

  int sequences() const { return sequences_; }
  int hypotheses() const { return hypotheses_; }
  int horizon() const { return horizon_; }
  int nx() const { return nx_; }

  Eigen::Map<const Trajectory> trajectory(int m, int p) const {
    return Eigen::Map<const Trajectory>(data_.data() + offset(m, p),
                                        horizon_ + 1, nx_);
  }
  Eigen::Map<Trajectory> trajectory(int m, int p) {
    return Eigen::Map<Trajectory>(data_.data() + offset(m, p), horizon_ + 1,
                                  nx_);
  }
  double* raw(int m, int p) { return data_.data() + offset(m, p); }

 private:
  std::size_t offset(int m, int p) const {
    return (static_cast<std::size_t>(m) * hypotheses_ + p) *
           static_cast<std::size_t>(horizon_ + 1) * nx_;
  }

  int sequences_ = 0;
  int hypotheses_ = 0;
  int horizon_ = 0;
  int nx_ = 0;
  std::vector<double> data_;
};

enum class BlowupPolicy {
  kThrow,  // raise IntegrationBlowup tagged with (m, p, k)
  kMark,   // leave NaN rows; downstream costs treat them as infeasible
};

// Pure function of its inputs; the (m, p) grid is evaluated in a fixed
// order so results never depend on scheduling.
StateTensor batch_rollout(const Model& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x0,
                          std::span<const ControlSequence> sequences,
                          std::span<const Eigen::VectorXd> params,
                          BlowupPolicy policy = BlowupPolicy::kThrow);

}  // namespace prmppi

#endif  // PRMPPI_DYNAMICS_HPP_
