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

#ifndef PRMPPI_MODELS_QUAD_PAYLOAD_HPP_
#define PRMPPI_MODELS_QUAD_PAYLOAD_HPP_

#include <cmath>

#include "prmppi/models/fixed_size_model.hpp"

namespace prmppi {

// Quadrotor with a cable-suspended point-mass payload.
//
//   state   x = [p_x, p_y, p_z, phi, th, v_x, v_y, v_z, phi_dot, th_dot]
//   input   u = [a_x, a_y, a_z]        commanded vehicle acceleration (m/s^2,
//                                      gravity compensated)
//   params  theta = [L, b_phi, b_th]   cable length (m), damping (kg m^2/s)
//
// The vehicle is a kinematically driven pivot, p_ddot = u. The payload sits
// at r = p + L s(phi, th) with the swing direction
//
//   s = [cos phi sin th, -sin phi, -cos phi cos th],
//
// so phi = th = 0 hangs straight down and the chart is regular everywhere
// except a horizontal cable (|phi| = pi / 2). Per unit payload mass
//
//   T = 1/2 |p_dot + L s_dot|^2,   V = g (p_z + L s_z)
//
// and ds/dphi, ds/dth are orthogonal with norms 1 and cos phi, giving the
// diagonal inertia L^2 diag(1, cos^2 phi). With the pivot term folded into
// g_eff = u + g e_z and linear damping torques -b q_dot on each angle,
// Lagrange's equations reduce to
//
//   phi_ddot = -sin phi cos phi th_dot^2 - ds/dphi . g_eff / L
//              - b_phi phi_dot / (m L^2)
//   th_ddot  =  2 tan phi phi_dot th_dot - [cos th, 0, sin th] . g_eff
//              / (L cos phi) - b_th th_dot / (m L^2 cos^2 phi)
//
// where m is the payload mass.
class QuadPayloadModel final
    : public FixedSizeModel<QuadPayloadModel, 10, 3, 3> {
 public:
  struct Constants {
    double payload_mass = 0.023;  // kg
    double gravity = 9.81;
    double max_accel = 4.0;  // m/s^2 per axis
    double dt = 0.02;
  };

  explicit QuadPayloadModel(const Constants& c);

  const Constants& constants() const { return c_; }

  template <typename S>
  StateT<S> derivative(const StateT<S>& x, const InputT<S>& u,
                       const ParamsT<S>& theta) const {
    using std::cos;
    using std::sin;
    const S phi = x(3), th = x(4);
    const S phi_d = x(8), th_d = x(9);
    const S len = theta(0);
    const S sp = sin(phi), cp = cos(phi), st = sin(th), ct = cos(th);
    const S gx = u(0), gy = u(1), gz = u(2) + S(c_.gravity);
    const S inertia = S(c_.payload_mass) * len * len;

    // ds/dphi . g_eff and [cos th, 0, sin th] . g_eff
    const S dphi_dot_g = -sp * st * gx - cp * gy + sp * ct * gz;
    const S dth_dot_g = ct * gx + st * gz;

    const S phi_dd = -sp * cp * th_d * th_d - dphi_dot_g / len -
                     theta(1) * phi_d / inertia;
    const S th_dd = S(2) * (sp / cp) * phi_d * th_d - dth_dot_g / (len * cp) -
                    theta(2) * th_d / (inertia * cp * cp);

    StateT<S> dx;
    dx << x(5), x(6), x(7), phi_d, th_d, u(0), u(1), u(2), phi_dd, th_dd;
    return dx;
  }

  // Payload position in the world frame.
  Eigen::Vector3d payload_position(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   double length) const;

  // Payload energies in joules; kinetic energy is taken relative to the
  // pivot, potential energy relative to the pivot height.
  double pendulum_kinetic_energy(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 double length) const;
  double pendulum_potential_energy(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   double length) const;

 private:
  Constants c_;
};

}  // namespace prmppi

#endif  // PRMPPI_MODELS_QUAD_PAYLOAD_HPP_
