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

#ifndef PRMPPI_MODELS_SCALAR_LINEAR_HPP_
#define PRMPPI_MODELS_SCALAR_LINEAR_HPP_

#include "prmppi/dynamics.hpp"

namespace prmppi {

// x' = theta x + u. Discrete map with a closed-form Bayesian posterior,
// used as the conjugate reference system for the estimators.
class ScalarLinearModel final : public Model {
 public:
  ScalarLinearModel();

 protected:
  void step_raw(const double* x, const double* u, const double* theta,
                double* out) const override;
  void jacobian_raw(const double* x, const double* u, const double* theta,
                    double* out) const override;
};

}  // namespace prmppi

#endif  // PRMPPI_MODELS_SCALAR_LINEAR_HPP_
