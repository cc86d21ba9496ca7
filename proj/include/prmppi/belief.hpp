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


#ifndef PRMPPI_BELIEF_HPP_
#define PRMPPI_BELIEF_HPP_

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "prmppi/common.hpp"
#include "prmppi/dynamics.hpp"

namespace prmppi {

// Gaussian transition noise xi ~ N(0, Sigma_xi).
class NoiseModel {
 public:
  // Rejects asymmetric (beyond 1e-12) or non positive-definite input.
  explicit NoiseModel(Eigen::MatrixXd covariance);
  static NoiseModel diagonal(const Eigen::VectorXd& variances);

  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& precision() const { return precision_; }
  Eigen::Index size() const { return cov_.rows(); }

 private:
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd precision_;
};

struct TransitionObservation {
  Eigen::VectorXd x_prev;
  Eigen::VectorXd u_prev;
  Eigen::VectorXd x_next;

  void validate(const Model& model) const;
};

// Silverman's rule per dimension,
//   sigma_d = std_d (4 / ((n + 2) N))^(1 / (n + 4)),
// floored at 1e-4 times the width of `bounds` along d. Requires N >= 2.
Eigen::VectorXd kde_bandwidth(const Eigen::MatrixXd& particles,
                              const Box& bounds);

// N unweighted particles over the box Theta plus their KDE bandwidth.
class ParameterParticles {
 public:
  // Particles must lie in `bounds`; the bandwidth is Silverman's.
  ParameterParticles(Eigen::MatrixXd particles, Box bounds);
  // Explicit bandwidth, N >= 1.
  ParameterParticles(Eigen::MatrixXd particles, Box bounds,
                     Eigen::VectorXd bandwidth);

  static ParameterParticles from_prior(const Box& prior, const Box& bounds,
                                       int count, Rng& rng);

  const Eigen::MatrixXd& particles() const { return particles_; }
  const Eigen::VectorXd& bandwidth() const { return bandwidth_; }
  const Box& bounds() const { return bounds_; }
  int size() const { return static_cast<int>(particles_.rows()); }
  int dim() const { return static_cast<int>(particles_.cols()); }
  Eigen::VectorXd mean() const {
    return particles_.colwise().mean().transpose();
  }

  void set_bandwidth(Eigen::VectorXd bandwidth);

 private:
  Eigen::MatrixXd particles_;  // N x n_theta
  Box bounds_;
  Eigen::VectorXd bandwidth_;
};

// Gaussian KDE (1/N) sum_i N(theta; theta_i, diag(sigma^2)).
double kde_density(const ParameterParticles& kde,
                   const Eigen::Ref<const Eigen::VectorXd>& theta);
// Evaluated with log-sum-exp, so it stays finite far from every particle.
double kde_log_density(const ParameterParticles& kde,
                       const Eigen::Ref<const Eigen::VectorXd>& theta);
Eigen::VectorXd kde_log_grad(const ParameterParticles& kde,
                             const Eigen::Ref<const Eigen::VectorXd>& theta);

// Exact mixture draws (uniform component, Gaussian kernel noise), clamped
// into the particles' box.
std::vector<Eigen::VectorXd> kde_sample(const ParameterParticles& kde,
                                        int count, Rng& rng);

// Unnormalised log posterior of one transition against a KDE prior:
//   -1/2 r' Sigma^-1 r + log kde(theta),   r = x_next - f(x_prev, u_prev, theta)
double log_posterior(const Model& model, const TransitionObservation& obs,
                     const NoiseModel& noise, const ParameterParticles& prior,
                     const Eigen::Ref<const Eigen::VectorXd>& theta);

// J' Sigma^-1 r + grad log kde(theta) with J = d f / d theta (nx x n_theta).
Eigen::VectorXd log_posterior_grad(const Model& model,
                                   const TransitionObservation& obs,
                                   const NoiseModel& noise,
                                   const ParameterParticles& prior,
                                   const Eigen::Ref<const Eigen::VectorXd>& theta);

// Median of the pairwise squared distances between rows; 1 when all rows
// coincide.
double median_bandwidth(const Eigen::MatrixXd& particles);

// Empirical Stein direction with k(a, b) = exp(-|a - b|^2 / h):
//   phi_i = 1/N sum_j [k(x_j, x_i) g_j + grad_{x_j} k(x_j, x_i)].
Eigen::MatrixXd svgd_transport(const Eigen::MatrixXd& particles,
                               const Eigen::MatrixXd& grad_log_p,
                               double kernel_bandwidth);

struct SvgdOptions {
  double step_size = 0.5;
  int iterations = 10;
};

// Moves the particles toward p(theta | obs) proportional to the transition
// likelihood times the KDE of the incoming particles. The prior KDE is frozen
// for the whole call, with its centres shrunk toward the mean so that the
// mixture keeps the particles' variance instead of adding sigma^2 to it.
//
// Each iteration runs the Stein transport in coordinates standardised by the
// prior spread, and scales the step per particle by the kernel mass and per
// dimension by the mean Gauss-Newton curvature of the target, which makes
// the step size dimensionless. Particles are clamped into Theta after every
// iteration and the bandwidth is refreshed at the end.
ParameterParticles svgd_update(const ParameterParticles& particles,
                               const Model& model,
                               const TransitionObservation& obs,
                               const NoiseModel& noise,
                               const SvgdOptions& options = {});

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  void validate() const;
};

// Unscented update with theta as a static state: covariance += Q, then a
// measurement update with x_next = f(x_prev, u_prev, theta) + xi. Sigma points
// are clamped into the model's parameter box; the posterior mean is too.
GaussianBelief ukf_update(const GaussianBelief& belief, const Model& model,
                          const TransitionObservation& obs,
                          const NoiseModel& noise,
                          const Eigen::MatrixXd& process_noise);

struct WeightedParticles {
  Eigen::MatrixXd particles;  // N x n_theta
  Eigen::VectorXd weights;    // sums to 1
};

// Reweights by the transition likelihood and resamples systematically when
// the effective sample size drops below threshold * N.
WeightedParticles sir_update(const WeightedParticles& belief,
                             const Model& model,
                             const TransitionObservation& obs,
                             const NoiseModel& noise, double resample_threshold,
                             Rng& rng);

// Run-time belief used by the controllers. Updates happen between control
// steps; sample/mean are const and safe to call concurrently afterwards.
class Belief {
 public:
  virtual ~Belief() = default;

  virtual std::vector<Eigen::VectorXd> sample(int count, Rng& rng) const = 0;
  virtual Eigen::VectorXd mean() const = 0;
  virtual void update(const Model& model, const TransitionObservation& obs) {
    (void)model;
    (void)obs;
  }
  // False for beliefs that never change (point and prior beliefs).
  virtual bool learns() const { return false; }
  // One row per particle, columns labelled by `labels`.
  virtual void write_csv(std::ostream& out,
                         const std::vector<std::string>& labels) const = 0;
};

using BeliefPtr = std::unique_ptr<Belief>;

class PointBelief final : public Belief {
 public:
  explicit PointBelief(Eigen::VectorXd theta) : theta_(std::move(theta)) {}
  std::vector<Eigen::VectorXd> sample(int count, Rng& rng) const override;
  Eigen::VectorXd mean() const override { return theta_; }
  void write_csv(std::ostream& out,
                 const std::vector<std::string>& labels) const override;

 private:
  Eigen::VectorXd theta_;
};

// Uniform over a fixed box.
class PriorBelief final : public Belief {
 public:
  explicit PriorBelief(Box prior) : prior_(std::move(prior)) {}
  std::vector<Eigen::VectorXd> sample(int count, Rng& rng) const override;
  Eigen::VectorXd mean() const override { return prior_.center(); }
  void write_csv(std::ostream& out,
                 const std::vector<std::string>& labels) const override;

 private:
  Box prior_;
};

class SvgdBelief final : public Belief {
 public:
  SvgdBelief(ParameterParticles particles, NoiseModel noise,
             SvgdOptions options)
      : particles_(std::move(particles)),
        noise_(std::move(noise)),
        options_(options) {}

  std::vector<Eigen::VectorXd> sample(int count, Rng& rng) const override {
    return kde_sample(particles_, count, rng);
  }
  Eigen::VectorXd mean() const override { return particles_.mean(); }
  void update(const Model& model, const TransitionObservation& obs) override {
    particles_ = svgd_update(particles_, model, obs, noise_, options_);
  }
  bool learns() const override { return true; }
  void write_csv(std::ostream& out,
                 const std::vector<std::string>& labels) const override;

  const ParameterParticles& particles() const { return particles_; }

 private:
  ParameterParticles particles_;
  NoiseModel noise_;
  SvgdOptions options_;
};

class UkfBelief final : public Belief {
 public:
  UkfBelief(GaussianBelief belief, Box bounds, NoiseModel noise,
            Eigen::MatrixXd process_noise);

  // Gaussian draws clamped into the parameter box.
  std::vector<Eigen::VectorXd> sample(int count, Rng& rng) const override;
  Eigen::VectorXd mean() const override { return belief_.mean; }
  void update(const Model& model, const TransitionObservation& obs) override {
    belief_ = ukf_update(belief_, model, obs, noise_, process_noise_);
  }
  bool learns() const override { return true; }
  // A single row holding the mean.
  void write_csv(std::ostream& out,
                 const std::vector<std::string>& labels) const override;

  const GaussianBelief& gaussian() const { return belief_; }

 private:
  GaussianBelief belief_;
  Box bounds_;
  NoiseModel noise_;
  Eigen::MatrixXd process_noise_;
};

}  // namespace prmppi

#endif  // PRMPPI_BELIEF_HPP_
