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

#ifndef PRMPPI_MODELS_QUAD2D_HPP_
#define PRMPPI_MODELS_QUAD2D_HPP_

#include <cmath>

#include "prmppi/models/fixed_size_model.hpp"

namespace prmppi {

// Planar quadrotor as a rigid body in the x-z plane.
//
//   state   x = [p_x, p_z, v_x, v_z, a, a_dot]   a is the pitch angle (rad)
//   input   u = [du_1, du_2]                     per-rotor thrust offsets (N)
//   params  theta = [m, I]                        mass (kg), inertia (kg m^2)
//
// Rotor thrusts are T_i = m_nom g / 2 + du_i, so u = 0 is the hover
// feedforward of the nominal vehicle. With T = T_1 + T_2 and arm length d:
//
//   v_x_dot = T sin a / m
//   v_z_dot = T cos a / m - g
//   a_ddot  = d (T_2 - T_1) / (sqrt(2) I)
//
// Input limits keep every rotor inside [0, max_thrust].
class Quad2dModel final : public FixedSizeModel<Quad2dModel, 6, 2, 2> {
 public:
  struct Constants {
    double nominal_mass = 0.027;  // kg; defines the hover feedforward only
    double arm_length = 0.0397;   // m
    double gravity = 9.81;
    double max_thrust = 0.3;  // N per rotor
    double dt = 0.02;
  };

  explicit Quad2dModel(const Constants& c);

  const Constants& constants() const { return c_; }
  double hover_thrust() const { return c_.nominal_mass * c_.gravity / 2; }

  template <typename S>
  StateT<S> derivative(const StateT<S>& x, const InputT<S>& u,
                       const ParamsT<S>& theta) const {
    using std::cos;
    using std::sin;
    const S t1 = S(hover_thrust()) + u(0);
    const S t2 = S(hover_thrust()) + u(1);
    const S total = t1 + t2;
    const S m = theta(0), inertia = theta(1);
    StateT<S> dx;
    dx << x(2), x(3), total * sin(x(4)) / m,
        total * cos(x(4)) / m - S(c_.gravity), x(5),
        S(c_.arm_length) * (t2 - t1) / (S(std::sqrt(2.0)) * inertia);
    return dx;
  }

  void partials(const State& x, const Input& u, const Params& theta,
                StateJacobian& fx, ParamJacobian& ftheta) const;

 private:
  Constants c_;
};

}  // namespace prmppi

#endif  // PRMPPI_MODELS_QUAD2D_HPP_
