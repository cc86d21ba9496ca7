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


#include <cmath>

#include "prmppi/models/cartpole.hpp"
#include "prmppi/models/quad2d.hpp"
#include "prmppi/models/quad_payload.hpp"
#include "prmppi/models/scalar_linear.hpp"

namespace prmppi {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ModelDescriptor cartpole_descriptor(const CartpoleModel::Constants& c) {
  ModelDescriptor d;
  d.name = "cartpole";
  d.nx = 4;
  d.nu = 1;
  d.ntheta = 2;
  d.dt = c.dt;
  d.nominal_params = vec({1.0, 0.1});
  d.param_labels = {"m_c", "m_p"};
  d.param_bounds = Box(vec({0.2, 0.01}), vec({5.0, 1.0}));
  d.control_bounds = Box(vec({-c.max_force}), vec({c.max_force}));
  return d;
}

ModelDescriptor quad2d_descriptor(const Quad2dModel::Constants& c) {
  ModelDescriptor d;
  d.name = "quad2d";
  d.nx = 6;
  d.nu = 2;
  d.ntheta = 2;
  d.dt = c.dt;
  d.nominal_params = vec({0.027, 1.4e-5});
  d.param_labels = {"m", "I_z"};
  d.param_bounds = Box(vec({0.005, 1e-6}), vec({0.1, 1e-4}));
  const double hover = c.nominal_mass * c.gravity / 2;
  d.control_bounds =
      Box(vec({-hover, -hover}),
          vec({c.max_thrust - hover, c.max_thrust - hover}));
  return d;
}

ModelDescriptor payload_descriptor(const QuadPayloadModel::Constants& c) {
  ModelDescriptor d;
  d.name = "quad_payload";
  d.nx = 10;
  d.nu = 3;
  d.ntheta = 3;
  d.dt = c.dt;
  d.nominal_params = vec({0.52, 0.0, 0.0});
  d.param_labels = {"L", "b_phi", "b_theta"};
  d.param_bounds = Box(vec({0.1, 0.0, 0.0}), vec({1.5, 0.5, 0.5}));
  d.control_bounds = Box(Eigen::VectorXd::Constant(3, -c.max_accel),
                         Eigen::VectorXd::Constant(3, c.max_accel));
  return d;
}

ModelDescriptor scalar_descriptor() {
  ModelDescriptor d;
  d.name = "scalar_linear";
  d.nx = 1;
  d.nu = 1;
  d.ntheta = 1;
  d.dt = 1.0;
  d.nominal_params = vec({1.0});
  d.param_labels = {"a"};
  d.param_bounds = Box(vec({-5.0}), vec({5.0}));
  d.control_bounds = Box(vec({-1e6}), vec({1e6}));
  return d;
}

}  // namespace

CartpoleModel::CartpoleModel(const Constants& c)
    : FixedSizeModel(cartpole_descriptor(c)), c_(c) {
  require(c.half_length > 0, "cartpole: half_length must be positive");
}

// Hand-written chain rule over z = (a, a_dot, m_c, m_p); the cart position
// and velocity never enter the accelerations.
void CartpoleModel::partials(const State& x, const Input& u,
                             const Params& theta, StateJacobian& fx,
                             ParamJacobian& ftheta) const {
  using Grad = Eigen::Matrix<double, 1, 4>;
  const double mc = theta(0), mp = theta(1);
  const double total = mc + mp;
  const double l = c_.half_length, g = c_.gravity;
  const double s = std::sin(x(2)), c = std::cos(x(2));
  const double w = x(3);

  const double q = (u(0) + mp * l * w * w * s) / total;
  const Grad dq(mp * l * w * w * c / total, 2 * mp * l * w * s / total,
                -q / total, l * w * w * s / total - q / total);

  const double den = l * (4.0 / 3.0 - mp * c * c / total);
  const Grad dden(l * 2 * mp * c * s / total, 0.0,
                  l * mp * c * c / (total * total),
                  -l * c * c * mc / (total * total));

  const double num = g * s - c * q;
  const Grad dnum = Grad(g * c + s * q, 0, 0, 0) - c * dq;

  const double a_dd = num / den;
  const Grad da = (dnum - a_dd * dden) / den;

  const double gain = mp * l * c / total;
  const Grad dgain(-mp * l * s / total, 0.0, -mp * l * c / (total * total),
                   l * c * mc / (total * total));
  const Grad dp = dq - a_dd * dgain - gain * da;

  fx.setZero();
  fx(0, 1) = 1.0;
  fx(2, 3) = 1.0;
  fx(1, 2) = dp(0);
  fx(1, 3) = dp(1);
  fx(3, 2) = da(0);
  fx(3, 3) = da(1);

  ftheta.setZero();
  ftheta(1, 0) = dp(2);
  ftheta(1, 1) = dp(3);
  ftheta(3, 0) = da(2);
  ftheta(3, 1) = da(3);
}

Quad2dModel::Quad2dModel(const Constants& c)
    : FixedSizeModel(quad2d_descriptor(c)), c_(c) {
  require(c.max_thrust > hover_thrust(),
          "quad2d: max_thrust must exceed the nominal hover thrust");
}

void Quad2dModel::partials(const State& x, const Input& u,
                           const Params& theta, StateJacobian& fx,
                           ParamJacobian& ftheta) const {
  const double t1 = hover_thrust() + u(0);
  const double t2 = hover_thrust() + u(1);
  const double total = t1 + t2;
  const double m = theta(0), inertia = theta(1);
  const double s = std::sin(x(4)), c = std::cos(x(4));

  fx.setZero();
  fx(0, 2) = 1.0;
  fx(1, 3) = 1.0;
  fx(4, 5) = 1.0;
  fx(2, 4) = total * c / m;
  fx(3, 4) = -total * s / m;

  ftheta.setZero();
  ftheta(2, 0) = -total * s / (m * m);
  ftheta(3, 0) = -total * c / (m * m);
  ftheta(5, 1) = -c_.arm_length * (t2 - t1) /
                 (std::sqrt(2.0) * inertia * inertia);
}

QuadPayloadModel::QuadPayloadModel(const Constants& c)
    : FixedSizeModel(payload_descriptor(c)), c_(c) {
  require(c.payload_mass > 0, "quad_payload: payload_mass must be positive");
}

Eigen::Vector3d QuadPayloadModel::payload_position(
    const Eigen::Ref<const Eigen::VectorXd>& x, double length) const {
  const double phi = x(3), th = x(4);
  const Eigen::Vector3d s(std::cos(phi) * std::sin(th), -std::sin(phi),
                          -std::cos(phi) * std::cos(th));
  return x.head<3>() + length * s;
}

double QuadPayloadModel::pendulum_kinetic_energy(
    const Eigen::Ref<const Eigen::VectorXd>& x, double length) const {
  const double cp = std::cos(x(3));
  return 0.5 * c_.payload_mass * length * length *
         (x(8) * x(8) + cp * cp * x(9) * x(9));
}

double QuadPayloadModel::pendulum_potential_energy(
    const Eigen::Ref<const Eigen::VectorXd>& x, double length) const {
  return -c_.payload_mass * c_.gravity * length * std::cos(x(3)) *
         std::cos(x(4));
}

ScalarLinearModel::ScalarLinearModel() : Model(scalar_descriptor()) {}

void ScalarLinearModel::step_raw(const double* x, const double* u,
                                 const double* theta, double* out) const {
  out[0] = theta[0] * x[0] + u[0];
}

void ScalarLinearModel::jacobian_raw(const double* x, const double*,
                                     const double*, double* out) const {
  out[0] = x[0];
}

}  // namespace prmppi
