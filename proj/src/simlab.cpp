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


#include "prmppi/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "prmppi/models/cartpole.hpp"
#include "prmppi/models/quad_payload.hpp"

namespace prmppi {
namespace {

using Eigen::VectorXd;

// Reads override keys, remembering which ones were consumed so that
// misspelled keys can be reported.
class Overrides {
 public:
  explicit Overrides(const EnvironmentOverrides& values) : values_(values) {}

  double get(const std::string& key, double fallback) {
    used_.push_back(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::optional<double> get_optional(const std::string& key) {
    used_.push_back(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  int get_count(const std::string& key, int fallback) {
    const double v = get(key, fallback);
    if (!(v >= 1) || v != std::floor(v) || v > 1e9) {
      throw ConfigError("environment override " + key +
                        " must be a positive integer");
    }
    return static_cast<int>(v);
  }

  void finish(std::string_view env) const {
    for (const auto& [key, value] : values_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        std::string known;
        for (const auto& k : used_) known += (known.empty() ? "" : ", ") + k;
        throw ConfigError("unknown override '" + key + "' for environment " +
                          std::string(env) + " (known: " + known + ")");
      }
    }
  }

 private:
  const EnvironmentOverrides& values_;
  std::vector<std::string> used_;
};

// Signed distance from p to an axis-aligned box; negative inside.
double box_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& centre,
                    const Eigen::Vector3d& half) {
  const Eigen::Vector3d q = (p - centre).cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Box scaled_box(const VectorXd& nominal, double fraction) {
  return Box(nominal * (1 - fraction), nominal * (1 + fraction));
}

NoiseConfig isotropic_noise(int nu, double stddev, double beta) {
  return {Eigen::MatrixXd::Identity(nu, nu) * stddev * stddev, beta};
}

// Two-rotor perturbations split into a collective part (both rotors alike)
// and a differential part (opposite signs), which drives the pitch.
NoiseConfig rotor_noise(double collective, double differential, double beta) {
  const Eigen::Matrix2d same = Eigen::Matrix2d::Ones();
  Eigen::Matrix2d opposite;
  opposite << 1, -1, -1, 1;
  return {collective * collective * same +
              differential * differential * opposite,
          beta};
}

Environment make_cartpole(Overrides& o) {
  Environment env;
  env.name = "cartpole";
  auto model = std::make_shared<CartpoleModel>(CartpoleModel::Constants{});
  env.model = model;
  env.prior = scaled_box(model->descriptor().nominal_params, 0.1);
  env.start = VectorXd::Zero(4);
  env.start(0) = o.get("start_position", 1.0);
  env.episode_length = o.get_count("episode_length", 150);
  env.laps = o.get_count("laps", 3);
  env.position_indices = {0};
  env.reference = [](int) { return VectorXd::Zero(1); };

  const double qp = o.get("cost.position", 10.0);
  const double qv = o.get("cost.velocity", 1.0);
  const double qa = o.get("cost.angle", 10.0);
  const double qw = o.get("cost.rate", 1.0);
  const double ru = o.get("cost.input", 1e-3);
  auto state_cost = [=](const Eigen::Ref<const VectorXd>& x) {
    return qp * x(0) * x(0) + qv * x(1) * x(1) + qa * x(2) * x(2) +
           qw * x(3) * x(3);
  };
  env.cost = [=](int, int) {
    return CostFunction{
        [=](const Eigen::Ref<const VectorXd>& x,
            const Eigen::Ref<const VectorXd>& u,
            int) { return state_cost(x) + ru * u(0) * u(0); },
        state_cost};
  };

  const double pole = 2 * model->constants().half_length;
  env.safe_set = {[pole](const Eigen::Ref<const VectorXd>& x) {
                    return std::min(x(0), x(0) + pole * std::sin(x(2)));
                  },
                  "cart and pole tip at p >= 0",
                  {}};
  env.observation_noise =
      VectorXd((VectorXd(4) << 1e-6, 1e-4, 1e-6, 1e-4).finished())
          .asDiagonal();
  env.control_noise = isotropic_noise(1, o.get("noise.stddev", 3.0),
                                      o.get("noise.beta", 0.05));
  env.horizon = o.get_count("horizon", 50);
  env.robust_beta = o.get("noise.robust_beta", 1e-4);
  return env;
}

struct CircleTask {
  double cx = 0.0, cz = 1.0, radius = 0.5, omega = 0.0, dt = 0.02;

  VectorXd position(int t) const {
    const double a = omega * t * dt;
    return (VectorXd(2) << cx + radius * std::cos(a), cz + radius * std::sin(a))
        .finished();
  }
  VectorXd velocity(int t) const {
    const double a = omega * t * dt;
    return (VectorXd(2) << -radius * omega * std::sin(a),
            radius * omega * std::cos(a))
        .finished();
  }
};

Environment make_quad2d(Overrides& o, bool partial) {
  Environment env;
  env.name = partial ? "quad2d-partial" : "quad2d";
  const ModelPtr model = make_model("quad2d");
  env.model = model;
  env.prior = scaled_box(model->descriptor().nominal_params, 0.5);

  CircleTask task;
  task.cz = o.get("center_z", 1.0);
  task.radius = o.get("radius", 0.5);
  task.omega = 2 * std::numbers::pi / o.get("period", 6.0);
  task.dt = model->dt();
  const double ceiling = o.get("ceiling", 1.4);
  env.start = VectorXd::Zero(6);
  env.start.head(2) = task.position(0);
  env.episode_length = o.get_count("episode_length", 300);
  env.laps = o.get_count("laps", 3);
  env.position_indices = {0, 1};
  env.reference = [task](int t) { return task.position(t); };

  const double qp = o.get("cost.position", 100.0);
  const double qv = o.get("cost.velocity", 1.0);
  const double qa = o.get("cost.angle", 5.0);
  const double qw = o.get("cost.rate", 0.1);
  const double ru = o.get("cost.input", 10.0);
  env.cost = [=](int t, int horizon) {
    auto ref = std::make_shared<Eigen::MatrixXd>(horizon + 1, 4);
    for (int k = 0; k <= horizon; ++k) {
      ref->row(k) << task.position(t + k).transpose(),
          task.velocity(t + k).transpose();
    }
    auto state_cost = [=](const Eigen::Ref<const VectorXd>& x, int k) {
      const auto r = ref->row(k);
      const double ex = x(0) - r(0), ez = x(1) - r(1);
      const double evx = x(2) - r(2), evz = x(3) - r(3);
      return qp * (ex * ex + ez * ez) + qv * (evx * evx + evz * evz) +
             qa * x(4) * x(4) + qw * x(5) * x(5);
    };
    return CostFunction{
        [=](const Eigen::Ref<const VectorXd>& x,
            const Eigen::Ref<const VectorXd>& u,
            int k) { return state_cost(x, k) + ru * u.squaredNorm(); },
        [=](const Eigen::Ref<const VectorXd>& x) {
          return state_cost(x, horizon);
        }};
  };

  const double floor = o.get("floor", 0.3);
  if (!(floor < ceiling)) {
    throw ConfigError("quad2d: floor must lie below the ceiling");
  }
  env.safe_set = {[floor, ceiling](const Eigen::Ref<const VectorXd>& x) {
                    return std::min(ceiling - x(1), x(1) - floor);
                  },
                  "height within [" + format_number(floor) + ", " +
                      format_number(ceiling) + "] m",
                  {}};
  if (partial) {
    const double reveal = o.get("reveal_distance", 0.4);
    const SafeSet truth = env.safe_set;
    const SafeSet hidden = constant_safe_set(o.get("unseen_margin", 1e3));
    env.perceived = [=](const VectorXd& x) {
      return truth.margin(x) <= reveal ? truth : hidden;
    };
    // The robust branch assumes a constraint within the reveal distance of
    // the current height in either direction.
    env.robust_perceived = [=](const VectorXd& x) {
      const SafeSet seen = truth.margin(x) <= reveal ? truth : hidden;
      const double z = x(1);
      return SafeSet{[=](const Eigen::Ref<const VectorXd>& s) {
                       return std::min(seen.margin(s),
                                       reveal - std::abs(s(1) - z));
                     },
                     "height band around the current state",
                     {}};
    };
  }
  env.observation_noise =
      VectorXd((VectorXd(6) << 1e-6, 1e-6, 1e-4, 1e-4, 1e-4, 1e-2).finished())
          .asDiagonal();
  env.control_noise = rotor_noise(o.get("noise.collective", 0.02),
                                  o.get("noise.differential", 0.002),
                                  o.get("noise.beta", 1.0));
  env.horizon = o.get_count("horizon", 30);
  env.robust_beta = o.get("noise.robust_beta", 1e-3);
  return env;
}

struct Obstacle {
  Eigen::Vector3d centre;
  Eigen::Vector3d half;
};

Environment make_payload(Overrides& o) {
  Environment env;
  env.name = "quad_payload";
  auto model =
      std::make_shared<QuadPayloadModel>(QuadPayloadModel::Constants{});
  env.model = model;
  env.prior = Box(Eigen::Vector3d(0.3, 0.0, 0.0), Eigen::Vector3d(0.9, 0.1, 0.1));
  env.fixed_truth = Eigen::Vector3d(o.get("true_length", 0.52),
                                    o.get("true_damping", 0.01),
                                    o.get("true_damping", 0.01));
  const double side = o.get("side", 1.5);
  const double height = o.get("height", 1.0);
  const double period = o.get("period", 12.0);
  const double dt = model->dt();
  env.start = VectorXd::Zero(10);
  env.start(2) = height;
  env.episode_length = o.get_count("episode_length", 600);
  env.laps = o.get_count("laps", 3);
  env.position_indices = {0, 1, 2};

  // Counter-clockwise square through (0,0), (s,0), (s,s), (0,s).
  const double speed = 4 * side / period;
  auto square = [=](int t, bool velocity) {
    double d = std::fmod(speed * t * dt, 4 * side);
    const int leg = std::min(static_cast<int>(d / side), 3);
    d -= leg * side;
    static const double corner[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    static const double dir[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    Eigen::Vector3d out;
    if (velocity) {
      out << speed * dir[leg][0], speed * dir[leg][1], 0.0;
    } else {
      out << side * corner[leg][0] + d * dir[leg][0],
          side * corner[leg][1] + d * dir[leg][1], height;
    }
    return out;
  };
  env.reference = [square](int t) { return VectorXd(square(t, false)); };

  const double qp = o.get("cost.position", 20.0);
  const double qv = o.get("cost.velocity", 1.0);
  const double qs = o.get("cost.swing", 2.0);
  const double qw = o.get("cost.swing_rate", 0.5);
  const double ru = o.get("cost.input", 0.01);
  env.cost = [=](int t, int horizon) {
    auto ref = std::make_shared<Eigen::MatrixXd>(horizon + 1, 6);
    for (int k = 0; k <= horizon; ++k) {
      ref->row(k) << square(t + k, false).transpose(),
          square(t + k, true).transpose();
    }
    auto state_cost = [=](const Eigen::Ref<const VectorXd>& x, int k) {
      const auto r = ref->row(k);
      double c = 0.0;
      for (int i = 0; i < 3; ++i) {
        c += qp * (x(i) - r(i)) * (x(i) - r(i)) +
             qv * (x(5 + i) - r(3 + i)) * (x(5 + i) - r(3 + i));
      }
      return c + qs * (x(3) * x(3) + x(4) * x(4)) +
             qw * (x(8) * x(8) + x(9) * x(9));
    };
    return CostFunction{
        [=](const Eigen::Ref<const VectorXd>& x,
            const Eigen::Ref<const VectorXd>& u,
            int k) { return state_cost(x, k) + ru * u.squaredNorm(); },
        [=](const Eigen::Ref<const VectorXd>& x) {
          return state_cost(x, horizon);
        }};
  };

  // O1 hangs over the first leg, O2 sits under the second, O3 blocks the
  // third.
  const std::vector<Obstacle> obstacles = {
      {{0.5 * side, 0.0, height + 0.35}, {0.15, 0.4, 0.15}},
      {{side, 0.5 * side, height - 0.65}, {0.4, 0.15, 0.15}},
      {{0.5 * side, side, height}, {0.1, 0.1, 1.0}},
  };
  auto margin = [model, obstacles](const Eigen::Ref<const VectorXd>& x,
                                   double length) {
    const Eigen::Vector3d drone = x.head<3>();
    const Eigen::Vector3d load = model->payload_position(x, length);
    double h = std::numeric_limits<double>::infinity();
    for (const auto& ob : obstacles) {
      h = std::min({h, box_distance(drone, ob.centre, ob.half),
                    box_distance(load, ob.centre, ob.half)});
    }
    return h;
  };
  const double nominal_length = model->descriptor().nominal_params(0);
  env.safe_set = {
      [=](const Eigen::Ref<const VectorXd>& x) {
        return margin(x, nominal_length);
      },
      "vehicle and payload outside three box obstacles",
      [=](const Eigen::Ref<const VectorXd>& x,
          const Eigen::Ref<const VectorXd>& theta) {
        return margin(x, theta(0));
      }};
  env.observation_noise =
      VectorXd((VectorXd(10) << 1e-6, 1e-6, 1e-6, 1e-5, 1e-5, 1e-4, 1e-4, 1e-4,
                1e-3, 1e-3)
                   .finished())
          .asDiagonal();
  env.control_noise = isotropic_noise(3, o.get("noise.stddev", 1.5),
                                      o.get("noise.beta", 1.0));
  return env;
}

TimeStats time_stats(const std::vector<double>& samples) {
  TimeStats s;
  if (samples.empty()) return s;
  const MetricSummary m = summarize(samples);
  s.mean = m.mean;
  s.stddev = m.stddev;
  s.max = *std::max_element(samples.begin(), samples.end());
  return s;
}

BeliefPtr make_belief(const Environment& env, const ControllerSpec& spec,
                      const VectorXd& truth, Rng& rng) {
  const ModelDescriptor& d = env.model->descriptor();
  switch (spec.variant) {
    case ControllerVariant::kOracle:
      return std::make_unique<PointBelief>(truth);
    case ControllerVariant::kNominal:
      return std::make_unique<PointBelief>(d.nominal_params);
    case ControllerVariant::kRobust:
      return std::make_unique<PriorBelief>(env.prior);
    case ControllerVariant::kPrmppi:
    case ControllerVariant::kPrmppiNoBackup:
      return std::make_unique<SvgdBelief>(
          ParameterParticles::from_prior(env.prior, d.param_bounds,
                                         spec.particles, rng),
          NoiseModel(env.observation_noise), spec.svgd);
    case ControllerVariant::kPrmppiUkf: {
      const VectorXd var = env.prior.width().array().square() / 12.0;
      return std::make_unique<UkfBelief>(
          GaussianBelief{env.prior.center(), var.asDiagonal()}, d.param_bounds,
          NoiseModel(env.observation_noise),
          Eigen::MatrixXd((spec.ukf_process_noise * var).asDiagonal()));
    }
  }
  throw ContractViolation("unhandled controller variant");
}

ControllerConfig effective_config(const ControllerSpec& spec) {
  ControllerConfig cfg = spec.mpc;
  switch (spec.variant) {
    case ControllerVariant::kOracle:
      cfg.mode = ControllerMode::kPlain;
      cfg.rollouts *= spec.oracle_rollout_factor;
      break;
    case ControllerVariant::kNominal:
    case ControllerVariant::kPrmppiNoBackup:
      cfg.mode = ControllerMode::kPlain;
      break;
    default:
      cfg.mode = ControllerMode::kDual;
  }
  return cfg;
}

std::string snapshot(const Belief& belief, const Model& model) {
  std::ostringstream out;
  belief.write_csv(out, model.descriptor().param_labels);
  return out.str();
}

}  // namespace

void Environment::validate() const {
  require(model != nullptr, "environment has no model");
  const ModelDescriptor& d = model->descriptor();
  require(prior.size() == d.ntheta && d.param_bounds.contains_box(prior),
          "environment prior must lie inside the parameter bounds");
  require(!fixed_truth || d.param_bounds.contains(*fixed_truth),
          "fixed true parameters must lie inside the parameter bounds");
  require(start.size() == d.nx, "start state has the wrong dimension");
  require(episode_length >= 1 && laps >= 1, "episode must have steps");
  require(reference && cost && safe_set.h, "environment is incomplete");
  require(!position_indices.empty(), "environment scores no positions");
  require(observation_noise.rows() == d.nx && observation_noise.cols() == d.nx,
          "observation noise has the wrong dimension");
}

std::vector<std::string> registered_environments() {
  return {"cartpole", "quad2d", "quad2d-partial", "quad_payload"};
}

Environment make_environment(std::string_view name,
                             const EnvironmentOverrides& overrides) {
  Overrides o(overrides);
  Environment env;
  if (name == "cartpole") {
    env = make_cartpole(o);
  } else if (name == "quad2d") {
    env = make_quad2d(o, false);
  } else if (name == "quad2d-partial") {
    env = make_quad2d(o, true);
  } else if (name == "quad_payload") {
    env = make_payload(o);
  } else {
    std::string known;
    for (const auto& n : registered_environments()) known += " " + n;
    throw ConfigError("unknown environment '" + std::string(name) +
                      "'; registered:" + known);
  }
  o.finish(name);
  env.validate();
  return env;
}

double compute_rmse(const Eigen::MatrixXd& positions,
                    const Eigen::MatrixXd& reference) {
  require(positions.rows() == reference.rows() &&
              positions.cols() == reference.cols(),
          "compute_rmse: trajectory and reference are not aligned");
  if (positions.rows() == 0) return 0.0;
  return std::sqrt((positions - reference).rowwise().squaredNorm().mean());
}

double compute_pa(const VectorXd& estimate, const VectorXd& truth) {
  require(estimate.size() == truth.size(),
          "compute_pa: estimate and truth differ in size");
  double total = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth(i) == 0.0) {
      warn("compute_pa: true parameter " + std::to_string(i) +
           " is zero and is excluded");
      continue;
    }
    total += std::abs(estimate(i) - truth(i)) / std::abs(truth(i));
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * std::max(0.0, 1.0 - total / used);
}

const char* to_string(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::kOracle: return "oracle";
    case ControllerVariant::kNominal: return "nominal";
    case ControllerVariant::kRobust: return "robust";
    case ControllerVariant::kPrmppi: return "prmppi";
    case ControllerVariant::kPrmppiUkf: return "prmppi-ukf";
    case ControllerVariant::kPrmppiNoBackup: return "prmppi-no-backup";
  }
  return "?";
}

std::vector<std::string> registered_variants() {
  return {"oracle", "nominal", "robust", "prmppi", "prmppi-ukf",
          "prmppi-no-backup"};
}

ControllerVariant parse_variant(std::string_view name) {
  for (auto v : {ControllerVariant::kOracle, ControllerVariant::kNominal,
                 ControllerVariant::kRobust, ControllerVariant::kPrmppi,
                 ControllerVariant::kPrmppiUkf,
                 ControllerVariant::kPrmppiNoBackup}) {
    if (name == to_string(v)) return v;
  }
  std::string known;
  for (const auto& n : registered_variants()) known += " " + n;
  throw ConfigError("unknown controller '" + std::string(name) +
                    "'; registered:" + known);
}

bool estimates_parameters(ControllerVariant v) {
  return v == ControllerVariant::kPrmppi ||
         v == ControllerVariant::kPrmppiUkf ||
         v == ControllerVariant::kPrmppiNoBackup;
}

void ControllerSpec::validate(const Environment& env) const {
  effective_config(*this).validate(*env.model);
  require(particles >= 1, "particle count N must be positive");
  require(svgd.step_size > 0 && svgd.iterations >= 0,
          "SVGD step size must be positive");
  require(ukf_process_noise >= 0, "UKF process noise must be non-negative");
  require(oracle_rollout_factor >= 1, "oracle rollout factor must be >= 1");
}

ControllerSpec default_controller(const Environment& env,
                                  ControllerVariant variant) {
  ControllerSpec spec;
  spec.variant = variant;
  spec.mpc.noise = env.control_noise;
  spec.mpc.horizon = env.horizon;
  spec.mpc.robust_beta = env.robust_beta;
  return spec;
}

TrialRecord run_episode(const Environment& env, const ControllerSpec& spec,
                        std::uint64_t seed, const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  TrialRecord rec;
  rec.seed = seed;
  Rng rng(seed);
  rec.true_params =
      env.fixed_truth ? *env.fixed_truth : sample_uniform(env.prior, rng);
  rec.min_margin = std::numeric_limits<double>::infinity();
  const Model& model = *env.model;
  const ControllerConfig cfg = effective_config(spec);
  std::vector<double> wall;
  std::vector<double> sq_error(env.laps, 0.0);
  std::vector<int> scored(env.laps, 0);

  try {
    env.validate();
    spec.validate(env);
    BeliefPtr belief = make_belief(env, spec, rec.true_params, rng);
    if (options.keep_snapshots) {
      rec.belief_snapshots.push_back(snapshot(*belief, model));
    }
    for (int lap = 0; lap < env.laps; ++lap) {
      VectorXd x = env.start;
      ControllerState state = ControllerState::zeros(cfg.horizon, model.nu());
      for (int t = 0; t < env.episode_length; ++t) {
        const SafeSet seen = env.perceived ? env.perceived(x) : env.safe_set;
        const SafeSet robust_seen =
            env.robust_perceived ? env.robust_perceived(x) : seen;
        const CostFunction cost = env.cost(t, cfg.horizon);

        const auto start = Clock::now();
        const StepResult r = control_step(state, *belief, x, model, seen,
                                          robust_seen, cost, cfg, rng);
        const VectorXd next = model.step(x, r.control, rec.true_params);
        if (!next.allFinite()) {
          throw NumericError("simulated state became non-finite at lap " +
                             std::to_string(lap + 1) + ", step " +
                             std::to_string(t));
        }
        if (belief->learns()) {
          belief->update(model, TransitionObservation{x, r.control, next});
          ++rec.belief_updates;
        }
        const double elapsed =
            std::chrono::duration<double>(Clock::now() - start).count();
        wall.push_back(elapsed);

        const double h = env.safe_set.margin(next, rec.true_params);
        rec.min_margin = std::min(rec.min_margin, h);
        if (h < 0) ++rec.violations;
        (r.diagnostics.branch == ActionSource::kNominal ? rec.nominal_steps
                                                        : rec.robust_steps)++;
        const VectorXd target = env.reference(t + 1);
        for (std::size_t i = 0; i < env.position_indices.size(); ++i) {
          const double e = next(env.position_indices[i]) - target(i);
          sq_error[lap] += e * e;
        }
        ++scored[lap];

        if (options.keep_steps) {
          rec.steps.push_back({lap + 1, t, next, r.control, h,
                               r.diagnostics.branch, r.diagnostics.candidate,
                               r.diagnostics.robustness_nominal,
                               r.diagnostics.robustness_robust,
                               r.diagnostics.timing, elapsed});
        }
        x = next;
      }
      if (estimates_parameters(spec.variant)) {
        rec.pa_trace.push_back(compute_pa(belief->mean(), rec.true_params));
      }
      if (options.keep_snapshots) {
        rec.belief_snapshots.push_back(snapshot(*belief, model));
      }
    }
    rec.final_estimate = belief->mean();
  } catch (const std::exception& e) {
    rec.error = e.what();
  }

  double total_sq = 0.0;
  int total_n = 0;
  for (int lap = 0; lap < env.laps; ++lap) {
    if (scored[lap] == 0) break;
    rec.lap_rmse.push_back(std::sqrt(sq_error[lap] / scored[lap]));
    total_sq += sq_error[lap];
    total_n += scored[lap];
  }
  rec.rmse = total_n > 0 ? std::sqrt(total_sq / total_n)
                         : std::numeric_limits<double>::quiet_NaN();
  rec.step_time = time_stats(wall);
  rec.success = rec.error.empty() && rec.violations == 0;
  return rec;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = s.stddev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / s.count);
  return s;
}

BenchmarkSummary summarize(const Environment& env, const ControllerSpec& spec,
                           const std::vector<TrialRecord>& records) {
  BenchmarkSummary s;
  s.environment = env.name;
  s.controller = to_string(spec.variant);
  s.trials = static_cast<int>(records.size());
  std::vector<double> rmse, pa, step;
  std::vector<std::vector<double>> lap_rmse(env.laps), lap_pa(env.laps);
  for (const auto& r : records) {
    if (r.success) ++s.successes;
    if (!r.error.empty()) ++s.failed_trials;
    s.fallback_steps += r.robust_steps;
    step.push_back(r.step_time.mean);
    if (!r.error.empty()) continue;
    rmse.push_back(r.rmse);
    for (std::size_t i = 0; i < r.lap_rmse.size(); ++i) {
      lap_rmse[i].push_back(r.lap_rmse[i]);
    }
    for (std::size_t i = 0; i < r.pa_trace.size(); ++i) {
      lap_pa[i].push_back(r.pa_trace[i]);
    }
    if (!r.pa_trace.empty()) pa.push_back(r.pa_trace.back());
  }
  s.rmse = summarize(rmse);
  for (const auto& v : lap_rmse) s.lap_rmse.push_back(summarize(v));
  if (estimates_parameters(spec.variant)) {
    s.pa = summarize(pa);
    for (const auto& v : lap_pa) s.lap_pa.push_back(summarize(v));
  }
  s.step_time = summarize(step);
  return s;
}

BenchmarkResult run_benchmark(const Environment& env,
                              const ControllerSpec& spec, int trials,
                              std::uint64_t base_seed, int workers,
                              const RunOptions& options) {
  require(trials >= 1, "run_benchmark needs at least one trial");
  env.validate();
  spec.validate(env);
  if (workers <= 0) {
    workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  workers = std::min(workers, trials);
  BenchmarkResult out;
  out.records.resize(trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < trials; i = next++) {
      out.records[i] = run_episode(env, spec, base_seed + i, options);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  out.summary = summarize(env, spec, out.records);
  return out;
}

}  // namespace prmppi
