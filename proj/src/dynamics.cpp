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


#include "prmppi/dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "prmppi/models/cartpole.hpp"
#include "prmppi/models/quad2d.hpp"
#include "prmppi/models/quad_payload.hpp"
#include "prmppi/models/scalar_linear.hpp"

namespace prmppi {

Model::Model(ModelDescriptor desc) : desc_(std::move(desc)) {
  require(desc_.dt > 0, "model dt must be positive");
  require(desc_.nominal_params.size() == desc_.ntheta,
          "nominal parameter size mismatch");
  require(desc_.param_bounds.size() == desc_.ntheta,
          "parameter bounds size mismatch");
  require(desc_.param_bounds.contains(desc_.nominal_params),
          "nominal parameters outside bounds");
  require(desc_.control_bounds.size() == desc_.nu,
          "control bounds size mismatch");
  require(static_cast<int>(desc_.param_labels.size()) == desc_.ntheta,
          "parameter label count mismatch");
}

void Model::check_dims(Eigen::Index x, Eigen::Index u,
                       Eigen::Index theta) const {
  if (x != nx() || u != nu() || theta != ntheta()) {
    std::ostringstream os;
    os << name() << ": dimension mismatch (x " << x << "/" << nx() << ", u "
       << u << "/" << nu() << ", theta " << theta << "/" << ntheta() << ")";
    throw ContractViolation(os.str());
  }
}

Eigen::VectorXd Model::step(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& u,
                            const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  check_dims(x.size(), u.size(), theta.size());
  const Eigen::VectorXd xc = x, uc = u, tc = theta;
  Eigen::VectorXd out(nx());
  step_raw(xc.data(), uc.data(), tc.data(), out.data());
  if (!out.allFinite()) {
    throw IntegrationBlowup(name() + ": non-finite state after step", xc);
  }
  return out;
}

Eigen::MatrixXd Model::param_jacobian(
    const Eigen::Ref<const Eigen::VectorXd>& x,
    const Eigen::Ref<const Eigen::VectorXd>& u,
    const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  check_dims(x.size(), u.size(), theta.size());
  const Eigen::VectorXd xc = x, uc = u, tc = theta;
  Eigen::MatrixXd out(nx(), ntheta());
  jacobian_raw(xc.data(), uc.data(), tc.data(), out.data());
  if (!out.allFinite()) {
    throw IntegrationBlowup(name() + ": non-finite parameter Jacobian", xc);
  }
  return out;
}

Eigen::VectorXd Model::continuous_derivative(
    const Eigen::Ref<const Eigen::VectorXd>&,
    const Eigen::Ref<const Eigen::VectorXd>&,
    const Eigen::Ref<const Eigen::VectorXd>&) const {
  throw ContractViolation(name() + " is a discrete-time model");
}

void Model::jacobian_raw(const double* x, const double* u, const double* theta,
                         double* out) const {
  finite_difference_jacobian(x, u, theta, out);
}

void Model::finite_difference_jacobian(const double* x, const double* u,
                                       const double* theta,
                                       double* out) const {
  const int n = nx();
  Eigen::VectorXd th = Eigen::Map<const Eigen::VectorXd>(theta, ntheta());
  Eigen::VectorXd plus(n), minus(n);
  Eigen::Map<Eigen::MatrixXd> jac(out, n, ntheta());
  const Eigen::VectorXd width = desc_.param_bounds.width();
  for (int i = 0; i < ntheta(); ++i) {
    const double h = 1e-6 * std::max(std::abs(th(i)), width(i));
    const double saved = th(i);
    th(i) = saved + h;
    step_raw(x, u, th.data(), plus.data());
    th(i) = saved - h;
    step_raw(x, u, th.data(), minus.data());
    th(i) = saved;
    jac.col(i) = (plus - minus) / (2 * h);
  }
}

int Model::rollout_kernel(const double* x0, const double* controls,
                          int horizon, const double* theta,
                          double* out) const {
  const int n = nx();
  std::copy(x0, x0 + n, out);
  for (int k = 0; k < horizon; ++k) {
    double* next = out + (k + 1) * n;
    step_raw(out + k * n, controls + k * nu(), theta, next);
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(next[i])) return k;
    }
  }
  return -1;
}

int Model::rollout_raw(const double* x0, const double* controls, int horizon,
                       const double* theta, double* out) const {
  const int failed = rollout_kernel(x0, controls, horizon, theta, out);
  if (failed >= 0) {
    std::fill(out + (failed + 1) * nx(), out + (horizon + 1) * nx(),
              std::numeric_limits<double>::quiet_NaN());
  }
  return failed;
}

StateTensor::StateTensor(int sequences, int hypotheses, int horizon, int nx)
    : sequences_(sequences),
      hypotheses_(hypotheses),
      horizon_(horizon),
      nx_(nx),
      data_(static_cast<std::size_t>(sequences) * hypotheses *
            static_cast<std::size_t>(horizon + 1) * nx) {}

StateTensor batch_rollout(const Model& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x0,
                          std::span<const ControlSequence> sequences,
                          std::span<const Eigen::VectorXd> params,
                          BlowupPolicy policy) {
  require(x0.size() == model.nx(), "batch_rollout: x0 dimension mismatch");
  require(!sequences.empty() && !params.empty(),
          "batch_rollout: empty batch");
  const int horizon = static_cast<int>(sequences.front().rows());
  for (const auto& seq : sequences) {
    require(seq.rows() == horizon, "batch_rollout: ragged sequence lengths");
    require(seq.cols() == model.nu(), "batch_rollout: control dimension");
  }
  for (const auto& th : params) {
    require(th.size() == model.ntheta(), "batch_rollout: parameter dimension");
    require(model.descriptor().param_bounds.contains(th),
            "batch_rollout: parameters outside bounds");
  }
  const Eigen::VectorXd start = x0;
  StateTensor out(static_cast<int>(sequences.size()),
                  static_cast<int>(params.size()), horizon, model.nx());
  for (int m = 0; m < out.sequences(); ++m) {
    for (int p = 0; p < out.hypotheses(); ++p) {
      const int failed = model.rollout_raw(start.data(), sequences[m].data(),
                                           horizon, params[p].data(),
                                           out.raw(m, p));
      if (failed >= 0 && policy == BlowupPolicy::kThrow) {
        std::ostringstream os;
        os << model.name() << ": integration blowup at (m=" << m
           << ", p=" << p << ", k=" << failed << ")";
        throw IntegrationBlowup(os.str(),
                                out.trajectory(m, p).row(failed).transpose());
      }
    }
  }
  return out;
}

namespace {

double take(ModelOptions& opts, const std::string& key, double fallback) {
  auto it = opts.find(key);
  if (it == opts.end()) return fallback;
  const double v = it->second;
  opts.erase(it);
  return v;
}

void reject_leftovers(std::string_view model, const ModelOptions& opts) {
  if (opts.empty()) return;
  std::ostringstream os;
  os << "unknown option(s) for model " << model << ":";
  for (const auto& [k, v] : opts) os << ' ' << k;
  throw ConfigError(os.str());
}

}  // namespace

ModelPtr make_model(std::string_view name, const ModelOptions& options) {
  ModelOptions opts = options;
  ModelPtr model;
  if (name == "cartpole") {
    CartpoleModel::Constants c;
    c.half_length = take(opts, "half_length", c.half_length);
    c.gravity = take(opts, "gravity", c.gravity);
    c.max_force = take(opts, "max_force", c.max_force);
    c.dt = take(opts, "dt", c.dt);
    reject_leftovers(name, opts);
    model = std::make_shared<CartpoleModel>(c);
  } else if (name == "quad2d") {
    Quad2dModel::Constants c;
    c.nominal_mass = take(opts, "nominal_mass", c.nominal_mass);
    c.arm_length = take(opts, "arm_length", c.arm_length);
    c.gravity = take(opts, "gravity", c.gravity);
    c.max_thrust = take(opts, "max_thrust", c.max_thrust);
    c.dt = take(opts, "dt", c.dt);
    reject_leftovers(name, opts);
    model = std::make_shared<Quad2dModel>(c);
  } else if (name == "quad_payload") {
    QuadPayloadModel::Constants c;
    c.payload_mass = take(opts, "payload_mass", c.payload_mass);
    c.gravity = take(opts, "gravity", c.gravity);
    c.max_accel = take(opts, "max_accel", c.max_accel);
    c.dt = take(opts, "dt", c.dt);
    reject_leftovers(name, opts);
    model = std::make_shared<QuadPayloadModel>(c);
  } else if (name == "scalar_linear") {
    reject_leftovers(name, opts);
    model = std::make_shared<ScalarLinearModel>();
  } else {
    throw ConfigError("unknown model: " + std::string(name));
  }
  return model;
}

std::vector<std::string> registered_models() {
  return {"cartpole", "quad2d", "quad_payload", "scalar_linear"};
}

}  // namespace prmppi
