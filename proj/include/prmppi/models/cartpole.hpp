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

#ifndef PRMPPI_MODELS_CARTPOLE_HPP_
#define PRMPPI_MODELS_CARTPOLE_HPP_

#include "prmppi/models/fixed_size_model.hpp"

namespace prmppi {

// Frictionless cart-pole with a uniform rod.
//
//   state   x = [p, p_dot, a, a_dot]   cart position (m), pole angle from the
//                                       upright (rad, positive tips toward +p)
//   input   u = [F]                    horizontal force on the cart (N)
//   params  theta = [m_c, m_p]         cart and pole mass (kg)
//
// With half-length l and M = m_c + m_p:
//
//   q     = (F + m_p l a_dot^2 sin a) / M
//   a_dd  = (g sin a - cos a q) / (l (4/3 - m_p cos^2 a / M))
//   p_dd  = q - m_p l a_dd cos a / M
//
// The pole tip sits at p + 2 l sin a.
class CartpoleModel final
    : public FixedSizeModel<CartpoleModel, 4, 1, 2> {
 public:
  struct Constants {
    double half_length = 0.5;  // m
    double gravity = 9.81;
    double max_force = 10.0;  // N
    double dt = 0.02;
  };

  explicit CartpoleModel(const Constants& c);

  const Constants& constants() const { return c_; }

  template <typename S>
  StateT<S> derivative(const StateT<S>& x, const InputT<S>& u,
                       const ParamsT<S>& theta) const {
    using std::cos;
    using std::sin;
    const S mc = theta(0), mp = theta(1);
    const S total = mc + mp;
    const S l = S(c_.half_length);
    const S sa = sin(x(2)), ca = cos(x(2));
    const S w = x(3);
    const S q = (u(0) + mp * l * w * w * sa) / total;
    const S a_dd = (S(c_.gravity) * sa - ca * q) /
                   (l * (S(4.0 / 3.0) - mp * ca * ca / total));
    const S p_dd = q - mp * l * a_dd * ca / total;
    StateT<S> dx;
    dx << x(1), p_dd, w, a_dd;
    return dx;
  }

  void partials(const State& x, const Input& u, const Params& theta,
                StateJacobian& fx, ParamJacobian& ftheta) const;

 private:
  Constants c_;
};

}  // namespace prmppi

#endif  // PRMPPI_MODELS_CARTPOLE_HPP_
