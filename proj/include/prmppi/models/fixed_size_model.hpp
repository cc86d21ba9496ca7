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

#ifndef PRMPPI_MODELS_FIXED_SIZE_MODEL_HPP_
#define PRMPPI_MODELS_FIXED_SIZE_MODEL_HPP_

#include <cmath>

#include "prmppi/dynamics.hpp"

namespace prmppi {

// CRTP base for continuous-time models integrated with fixed-step RK4.
//
// Derived must provide
//   template <typename S>
//   Eigen::Matrix<S, NX, 1> derivative(const Eigen::Matrix<S, NX, 1>&,
//                                      const Eigen::Matrix<S, NU, 1>&,
//                                      const Eigen::Matrix<S, NT, 1>&) const;
// and may provide analytic partials
//   void partials(const State&, const Input&, const Params&,
//                 Eigen::Matrix<double, NX, NX>& fx,
//                 Eigen::Matrix<double, NX, NT>& ftheta) const;
// in which case the parameter Jacobian of the discrete step is propagated
// exactly through the RK4 stages. Otherwise central differences are used.
template <typename Derived, int NX, int NU, int NT>
class FixedSizeModel : public Model {
 public:
  template <typename S>
  using StateT = Eigen::Matrix<S, NX, 1>;
  template <typename S>
  using InputT = Eigen::Matrix<S, NU, 1>;
  template <typename S>
  using ParamsT = Eigen::Matrix<S, NT, 1>;
  using State = StateT<double>;
  using Input = InputT<double>;
  using Params = ParamsT<double>;
  using StateJacobian = Eigen::Matrix<double, NX, NX>;
  using ParamJacobian = Eigen::Matrix<double, NX, NT>;

  // One RK4 step; generic in the scalar so tests can push dual numbers
  // through it.
  template <typename S>
  StateT<S> rk4(const StateT<S>& x, const InputT<S>& u,
                const ParamsT<S>& theta) const {
    const Derived& self = static_cast<const Derived&>(*this);
    const S h = S(dt());
    const StateT<S> k1 = self.derivative(x, u, theta);
    const StateT<S> k2 = self.derivative(StateT<S>(x + (h / 2) * k1), u, theta);
    const StateT<S> k3 = self.derivative(StateT<S>(x + (h / 2) * k2), u, theta);
    const StateT<S> k4 = self.derivative(StateT<S>(x + h * k3), u, theta);
    return x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }

  Eigen::VectorXd continuous_derivative(
      const Eigen::Ref<const Eigen::VectorXd>& x,
      const Eigen::Ref<const Eigen::VectorXd>& u,
      const Eigen::Ref<const Eigen::VectorXd>& theta) const override {
    require(x.size() == NX && u.size() == NU && theta.size() == NT,
            "dimension mismatch");
    return static_cast<const Derived&>(*this).derivative(
        State(x), Input(u), Params(theta));
  }

 protected:
  using Model::Model;

  void step_raw(const double* x, const double* u, const double* theta,
                double* out) const override {
    Eigen::Map<State> next(out);
    next = rk4<double>(Eigen::Map<const State>(x), Eigen::Map<const Input>(u),
                       Eigen::Map<const Params>(theta));
  }

  void jacobian_raw(const double* x, const double* u, const double* theta,
                    double* out) const override {
    if constexpr (kHasPartials) {
      Eigen::Map<ParamJacobian> jac(out);
      jac = rk4_param_jacobian(Eigen::Map<const State>(x),
                               Eigen::Map<const Input>(u),
                               Eigen::Map<const Params>(theta));
    } else {
      finite_difference_jacobian(x, u, theta, out);
    }
  }

  int rollout_kernel(const double* x0, const double* controls, int horizon,
                     const double* theta, double* out) const override {
    const Params th = Eigen::Map<const Params>(theta);
    State x = Eigen::Map<const State>(x0);
    Eigen::Map<State> first(out);
    first = x;
    for (int k = 0; k < horizon; ++k) {
      x = rk4<double>(x, Eigen::Map<const Input>(controls + k * NU), th);
      Eigen::Map<State> row(out + (k + 1) * NX);
      row = x;
      if (!x.allFinite()) return k;
    }
    return -1;
  }

 private:
  static constexpr bool kHasPartials =
      requires(const Derived& d, const State& x, const Input& u,
               const Params& p, StateJacobian& fx, ParamJacobian& ft) {
        d.partials(x, u, p, fx, ft);
      };

  // Forward sensitivity of the RK4 map; x itself does not depend on theta.
  ParamJacobian rk4_param_jacobian(const State& x, const Input& u,
                                   const Params& theta) const {
    const Derived& self = static_cast<const Derived&>(*this);
    const double h = dt();
    StateJacobian fx;
    ParamJacobian ft;

    const State k1 = self.derivative(x, u, theta);
    self.partials(x, u, theta, fx, ft);
    const ParamJacobian s1 = ft;

    const State x2 = x + (h / 2) * k1;
    const State k2 = self.derivative(x2, u, theta);
    self.partials(x2, u, theta, fx, ft);
    const ParamJacobian s2 = fx * ((h / 2) * s1) + ft;

    const State x3 = x + (h / 2) * k2;
    const State k3 = self.derivative(x3, u, theta);
    self.partials(x3, u, theta, fx, ft);
    const ParamJacobian s3 = fx * ((h / 2) * s2) + ft;

    const State x4 = x + h * k3;
    self.partials(x4, u, theta, fx, ft);
    const ParamJacobian s4 = fx * (h * s3) + ft;

    return (h / 6) * (s1 + 2 * s2 + 2 * s3 + s4);
  }
};

}  // namespace prmppi

#endif  // PRMPPI_MODELS_FIXED_SIZE_MODEL_HPP_
