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


#include "prmppi/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace prmppi {
namespace {

std::string describe(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    os << (i ? ", " : "") << format_number(v(i));
  }
  os << ']';
  return os.str();
}

// Log of each mixture component's unnormalised kernel plus the shared
// normaliser, so log kde = logsumexp(terms) + norm.
Eigen::VectorXd kernel_exponents(const ParameterParticles& kde,
                                 const Eigen::Ref<const Eigen::VectorXd>& t) {
  const Eigen::ArrayXd inv = kde.bandwidth().array().inverse();
  Eigen::VectorXd e(kde.size());
  for (int i = 0; i < kde.size(); ++i) {
    const Eigen::ArrayXd z =
        (t.transpose() - kde.particles().row(i)).array().transpose() * inv;
    e(i) = -0.5 * z.square().sum();
  }
  return e;
}

double log_normaliser(const ParameterParticles& kde) {
  return -std::log(static_cast<double>(kde.size())) -
         kde.bandwidth().array().log().sum() -
         0.5 * kde.dim() * std::log(2 * std::numbers::pi);
}

struct LikelihoodTerms {
  Eigen::VectorXd grad;       // J' Sigma^-1 r
  Eigen::VectorXd curvature;  // diag(J' Sigma^-1 J)
};

LikelihoodTerms likelihood_terms(const Model& model,
                                 const TransitionObservation& obs,
                                 const NoiseModel& noise,
                                 const Eigen::Ref<const Eigen::VectorXd>& t) {
  const Eigen::VectorXd r = obs.x_next - model.step(obs.x_prev, obs.u_prev, t);
  const Eigen::MatrixXd jac = model.param_jacobian(obs.x_prev, obs.u_prev, t);
  const Eigen::MatrixXd pj = noise.precision() * jac;
  return {jac.transpose() * (noise.precision() * r),
          (jac.array() * pj.array()).colwise().sum().transpose()};
}

// Kernel matrix K(j, i) = exp(-|x_j - x_i|^2 / h) and the Stein direction.
Eigen::MatrixXd stein_direction(const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& g, double h,
                                Eigen::VectorXd* kernel_mass) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, x.cols());
  if (kernel_mass) kernel_mass->setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::RowVectorXd diff = x.row(i) - x.row(j);
      const double k = std::exp(-diff.squaredNorm() / h);
      phi.row(i) += k * g.row(j) + (2.0 * k / h) * diff;
      if (kernel_mass) (*kernel_mass)(i) += k;
    }
  }
  phi /= static_cast<double>(n);
  if (kernel_mass) *kernel_mass /= static_cast<double>(n);
  return phi;
}

Eigen::VectorXd sample_variance(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double denom = std::max<Eigen::Index>(x.rows() - 1, 1);
  return ((x.rowwise() - mu).array().square().colwise().sum() / denom)
      .transpose();
}

// Cholesky factor with escalating diagonal jitter.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double scale = std::max(a.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (double jitter = 1e-12; jitter <= 1e-3; jitter *= 10) {
    llt.compute(a + jitter * scale *
                        Eigen::MatrixXd::Identity(a.rows(), a.cols()));
    if (llt.info() == Eigen::Success) {
      warn(std::string(what) + ": covariance needed jitter");
      return llt.matrixL();
    }
  }
  throw EstimatorDivergence(std::string(what) +
                            ": covariance lost positive definiteness");
}

}  // namespace

NoiseModel::NoiseModel(Eigen::MatrixXd covariance) : cov_(std::move(covariance)) {
  if (cov_.rows() != cov_.cols() || cov_.rows() == 0) {
    throw ContractViolation("noise covariance must be square");
  }
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ContractViolation("noise covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
  if (eig.eigenvalues().minCoeff() <= 0) {
    throw ContractViolation("noise covariance must be positive definite");
  }
  precision_ = cov_.llt().solve(
      Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols()));
  precision_ = 0.5 * (precision_ + precision_.transpose());
}

NoiseModel NoiseModel::diagonal(const Eigen::VectorXd& variances) {
  return NoiseModel(variances.asDiagonal().toDenseMatrix());
}

void TransitionObservation::validate(const Model& model) const {
  require(x_prev.size() == model.nx() && x_next.size() == model.nx() &&
              u_prev.size() == model.nu(),
          "observation dimensions do not match the model");
  require(x_prev.allFinite() && x_next.allFinite() && u_prev.allFinite(),
          "observation must be finite");
}

Eigen::VectorXd kde_bandwidth(const Eigen::MatrixXd& particles,
                              const Box& bounds) {
  const Eigen::Index n = particles.rows(), d = particles.cols();
  require(n >= 2, "kde_bandwidth needs at least two particles");
  require(bounds.size() == d, "bounds dimension mismatch");
  const double factor =
      std::pow(4.0 / ((d + 2.0) * static_cast<double>(n)), 1.0 / (d + 4.0));
  Eigen::VectorXd sigma = sample_variance(particles).cwiseSqrt() * factor;
  const Eigen::VectorXd floor = 1e-4 * bounds.width();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(sigma(i) >= floor(i))) {
      if (floor(i) <= 0) {
        throw ContractViolation("bandwidth floor needs a box of positive width");
      }
      warn_once("kde bandwidth floored along dimension " + std::to_string(i));
      sigma(i) = floor(i);
    }
  }
  return sigma;
}

ParameterParticles::ParameterParticles(Eigen::MatrixXd particles, Box bounds)
    : particles_(std::move(particles)), bounds_(std::move(bounds)) {
  require(particles_.cols() == bounds_.size(), "particle dimension mismatch");
  for (Eigen::Index i = 0; i < particles_.rows(); ++i) {
    require(bounds_.contains(particles_.row(i).transpose()),
            "particle outside the parameter box");
  }
  bandwidth_ = kde_bandwidth(particles_, bounds_);
}

ParameterParticles::ParameterParticles(Eigen::MatrixXd particles, Box bounds,
                                       Eigen::VectorXd bandwidth)
    : particles_(std::move(particles)), bounds_(std::move(bounds)) {
  require(particles_.rows() >= 1, "need at least one particle");
  require(particles_.cols() == bounds_.size(), "particle dimension mismatch");
  for (Eigen::Index i = 0; i < particles_.rows(); ++i) {
    require(bounds_.contains(particles_.row(i).transpose()),
            "particle outside the parameter box");
  }
  set_bandwidth(std::move(bandwidth));
}

ParameterParticles ParameterParticles::from_prior(const Box& prior,
                                                  const Box& bounds, int count,
                                                  Rng& rng) {
  require(bounds.contains_box(prior), "prior box must lie inside Theta");
  Eigen::MatrixXd p(count, prior.size());
  for (int i = 0; i < count; ++i) p.row(i) = sample_uniform(prior, rng);
  return ParameterParticles(std::move(p), bounds);
}

void ParameterParticles::set_bandwidth(Eigen::VectorXd bandwidth) {
  require(bandwidth.size() == dim(), "bandwidth dimension mismatch");
  require((bandwidth.array() > 0).all(), "bandwidth must be positive");
  bandwidth_ = std::move(bandwidth);
}

double kde_log_density(const ParameterParticles& kde,
                       const Eigen::Ref<const Eigen::VectorXd>& theta) {
  require(theta.size() == kde.dim(), "theta dimension mismatch");
  const Eigen::VectorXd e = kernel_exponents(kde, theta);
  const double top = e.maxCoeff();
  return top + std::log((e.array() - top).exp().sum()) + log_normaliser(kde);
}

double kde_density(const ParameterParticles& kde,
                   const Eigen::Ref<const Eigen::VectorXd>& theta) {
  return std::exp(kde_log_density(kde, theta));
}

Eigen::VectorXd kde_log_grad(const ParameterParticles& kde,
                             const Eigen::Ref<const Eigen::VectorXd>& theta) {
  require(theta.size() == kde.dim(), "theta dimension mismatch");
  const Eigen::VectorXd e = kernel_exponents(kde, theta);
  const Eigen::ArrayXd w = (e.array() - e.maxCoeff()).exp();
  const Eigen::RowVectorXd centre =
      (kde.particles().array().colwise() * w).colwise().sum() / w.sum();
  return ((centre.transpose() - theta).array() /
          kde.bandwidth().array().square())
      .matrix();
}

std::vector<Eigen::VectorXd> kde_sample(const ParameterParticles& kde,
                                        int count, Rng& rng) {
  require(count >= 1, "kde_sample count must be positive");
  std::uniform_int_distribution<int> pick(0, kde.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int c = 0; c < count; ++c) {
    Eigen::VectorXd s = kde.particles().row(pick(rng)).transpose();
    for (int d = 0; d < kde.dim(); ++d) s(d) += kde.bandwidth()(d) * normal(rng);
    out.push_back(kde.bounds().project(s));
  }
  return out;
}

double log_posterior(const Model& model, const TransitionObservation& obs,
                     const NoiseModel& noise, const ParameterParticles& prior,
                     const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::VectorXd r =
      obs.x_next - model.step(obs.x_prev, obs.u_prev, theta);
  return -0.5 * r.dot(noise.precision() * r) + kde_log_density(prior, theta);
}

Eigen::VectorXd log_posterior_grad(
    const Model& model, const TransitionObservation& obs,
    const NoiseModel& noise, const ParameterParticles& prior,
    const Eigen::Ref<const Eigen::VectorXd>& theta) {
  Eigen::VectorXd g = likelihood_terms(model, obs, noise, theta).grad +
                      kde_log_grad(prior, theta);
  if (!g.allFinite()) {
    throw NumericError("non-finite log-posterior gradient at theta = " +
                       describe(theta));
  }
  return g;
}

double median_bandwidth(const Eigen::MatrixXd& particles) {
  const Eigen::Index n = particles.rows();
  std::vector<double> d2;
  d2.reserve(n * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d2.push_back((particles.row(i) - particles.row(j)).squaredNorm());
    }
  }
  if (d2.empty()) return 1.0;
  const auto mid = d2.begin() + d2.size() / 2;
  std::nth_element(d2.begin(), mid, d2.end());
  double med = *mid;
  if (d2.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(d2.begin(), mid));
  }
  return med > 0 ? med : 1.0;
}

Eigen::MatrixXd svgd_transport(const Eigen::MatrixXd& particles,
                               const Eigen::MatrixXd& grad_log_p,
                               double kernel_bandwidth) {
  require(kernel_bandwidth > 0, "kernel bandwidth must be positive");
  require(particles.rows() >= 1, "need at least one particle");
  require(grad_log_p.rows() == particles.rows() &&
              grad_log_p.cols() == particles.cols(),
          "gradient shape mismatch");
  return stein_direction(particles, grad_log_p, kernel_bandwidth, nullptr);
}

ParameterParticles svgd_update(const ParameterParticles& particles,
                               const Model& model,
                               const TransitionObservation& obs,
                               const NoiseModel& noise,
                               const SvgdOptions& options) {
  require(options.step_size > 0, "svgd step size must be positive");
  require(options.iterations >= 0, "svgd iterations must be non-negative");
  require(particles.dim() == model.ntheta(), "particle dimension mismatch");
  require(noise.size() == model.nx(), "noise dimension mismatch");
  obs.validate(model);

  const Box& bounds = particles.bounds();
  Eigen::MatrixXd x = particles.particles();
  if (options.iterations == 0) return ParameterParticles(x, bounds);

  const Eigen::Index n = x.rows(), d = x.cols();
  const Eigen::VectorXd bw = kde_bandwidth(x, bounds);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::VectorXd var =
      sample_variance(x).cwiseMax(bw.cwiseProduct(bw));
  const Eigen::ArrayXd shrink =
      (1.0 - bw.array().square() / var.array()).max(0.0).sqrt();
  Eigen::MatrixXd centres =
      (x.array().rowwise() * shrink.transpose()).rowwise() +
      mu.array() * (1.0 - shrink.transpose());
  for (Eigen::Index i = 0; i < n; ++i) {
    centres.row(i) = bounds.project(centres.row(i).transpose()).transpose();
  }
  const ParameterParticles prior(std::move(centres), bounds, bw);

  const Eigen::RowVectorXd scale = var.cwiseSqrt().transpose();
  const Eigen::ArrayXd prior_curvature = var.array().inverse();
  Eigen::MatrixXd grad(n, d);
  Eigen::VectorXd mass;
  for (int it = 0; it < options.iterations; ++it) {
    Eigen::ArrayXd curvature = prior_curvature;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd t = x.row(i).transpose();
      const LikelihoodTerms lt = likelihood_terms(model, obs, noise, t);
      grad.row(i) = (lt.grad + kde_log_grad(prior, t)).transpose();
      curvature += lt.curvature.array() / static_cast<double>(n);
      if (!grad.row(i).allFinite()) {
        throw NumericError("non-finite log-posterior gradient at theta = " +
                           describe(t));
      }
    }
    const Eigen::MatrixXd z =
        (x.rowwise() - mu).array().rowwise() / scale.array();
    const Eigen::MatrixXd gz = grad.array().rowwise() * scale.array();
    const Eigen::RowVectorXd hz =
        (curvature * scale.transpose().array().square()).matrix().transpose();
    const Eigen::MatrixXd phi =
        stein_direction(z, gz, median_bandwidth(z), &mass);
    const Eigen::MatrixXd dz =
        (phi.array().colwise() / mass.array()).rowwise() / hz.array();
    x += options.step_size * (dz.array().rowwise() * scale.array()).matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = bounds.project(x.row(i).transpose()).transpose();
    }
  }
  return ParameterParticles(std::move(x), bounds);
}

void GaussianBelief::validate() const {
  require(covariance.rows() == mean.size() && covariance.cols() == mean.size(),
          "gaussian belief shape mismatch");
  require((covariance - covariance.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff()),
          "gaussian covariance must be symmetric");
  require(covariance.llt().info() == Eigen::Success,
          "gaussian covariance must be positive definite");
}

GaussianBelief ukf_update(const GaussianBelief& belief, const Model& model,
                          const TransitionObservation& obs,
                          const NoiseModel& noise,
                          const Eigen::MatrixXd& process_noise) {
  belief.validate();
  obs.validate(model);
  const int n = static_cast<int>(belief.mean.size());
  require(n == model.ntheta(), "belief dimension mismatch");
  require(process_noise.rows() == n && process_noise.cols() == n,
          "process noise shape mismatch");

  const Eigen::MatrixXd prior_cov = belief.covariance + process_noise;
  // Scaled sigma points with alpha = 1, beta = 2, kappa = max(0, 3 - n).
  const double kappa = std::max(0, 3 - n);
  const double lambda = kappa;
  const Eigen::MatrixXd root =
      robust_cholesky((n + lambda) * prior_cov, "ukf");
  const int count = 2 * n + 1;
  std::vector<Eigen::VectorXd> points(count, belief.mean);
  for (int i = 0; i < n; ++i) {
    points[1 + i] += root.col(i);
    points[1 + n + i] -= root.col(i);
  }
  Eigen::VectorXd wm = Eigen::VectorXd::Constant(count, 0.5 / (n + lambda));
  Eigen::VectorXd wc = wm;
  wm(0) = lambda / (n + lambda);
  wc(0) = wm(0) + 2.0;  // beta = 2, alpha = 1

  const Box& bounds = model.descriptor().param_bounds;
  Eigen::MatrixXd ys(model.nx(), count);
  for (int i = 0; i < count; ++i) {
    points[i] = bounds.project(points[i]);
    ys.col(i) = model.step(obs.x_prev, obs.u_prev, points[i]);
  }
  Eigen::VectorXd theta_bar = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < count; ++i) theta_bar += wm(i) * points[i];
  const Eigen::VectorXd y_bar = ys * wm;

  Eigen::MatrixXd s = noise.covariance();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, model.nx());
  for (int i = 0; i < count; ++i) {
    const Eigen::VectorXd dy = ys.col(i) - y_bar;
    s += wc(i) * dy * dy.transpose();
    c += wc(i) * (points[i] - theta_bar) * dy.transpose();
  }
  const Eigen::MatrixXd gain = s.ldlt().solve(c.transpose()).transpose();

  GaussianBelief post;
  post.mean = bounds.project(belief.mean + gain * (obs.x_next - y_bar));
  post.covariance = prior_cov - gain * s * gain.transpose();
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose());
  const Eigen::MatrixXd l = robust_cholesky(post.covariance, "ukf");
  post.covariance = l * l.transpose();
  if (!post.mean.allFinite() || !post.covariance.allFinite()) {
    throw EstimatorDivergence("ukf produced a non-finite belief");
  }
  return post;
}

WeightedParticles sir_update(const WeightedParticles& belief,
                             const Model& model,
                             const TransitionObservation& obs,
                             const NoiseModel& noise, double resample_threshold,
                             Rng& rng) {
  obs.validate(model);
  const Eigen::Index n = belief.particles.rows();
  require(n >= 1 && belief.weights.size() == n, "sir shape mismatch");
  require(std::abs(belief.weights.sum() - 1.0) <= 1e-9 &&
              (belief.weights.array() >= 0).all(),
          "sir weights must be normalised");

  Eigen::VectorXd logw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd r =
        obs.x_next -
        model.step(obs.x_prev, obs.u_prev, belief.particles.row(i).transpose());
    logw(i) = std::log(belief.weights(i)) - 0.5 * r.dot(noise.precision() * r);
  }
  WeightedParticles out{belief.particles, Eigen::VectorXd(n)};
  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) {
    warn("sir: every likelihood vanished, resetting to uniform weights");
    out.weights.setConstant(1.0 / n);
    return out;
  }
  out.weights = (logw.array() - top).exp().matrix();
  out.weights /= out.weights.sum();

  const double ess = 1.0 / out.weights.squaredNorm();
  if (ess < resample_threshold * static_cast<double>(n)) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double start = unit(rng) / static_cast<double>(n);
    Eigen::MatrixXd picked(n, belief.particles.cols());
    double cumulative = out.weights(0);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double target = start + static_cast<double>(i) / n;
      while (target > cumulative && j + 1 < n) cumulative += out.weights(++j);
      picked.row(i) = belief.particles.row(j);
    }
    out.particles = std::move(picked);
    out.weights.setConstant(1.0 / n);
  }
  return out;
}

namespace {

void write_header(std::ostream& out, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << (i ? "," : "") << labels[i];
  }
  out << '\n';
}

void write_row(std::ostream& out, const Eigen::Ref<const Eigen::RowVectorXd>& r) {
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    out << (i ? "," : "") << format_number(r(i));
  }
  out << '\n';
}

}  // namespace

std::vector<Eigen::VectorXd> PointBelief::sample(int count, Rng&) const {
  return std::vector<Eigen::VectorXd>(count, theta_);
}

void PointBelief::write_csv(std::ostream& out,
                            const std::vector<std::string>& labels) const {
  write_header(out, labels);
  write_row(out, theta_.transpose());
}

std::vector<Eigen::VectorXd> PriorBelief::sample(int count, Rng& rng) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sample_uniform(prior_, rng));
  return out;
}

void PriorBelief::write_csv(std::ostream& out,
                            const std::vector<std::string>& labels) const {
  write_header(out, labels);
  write_row(out, prior_.lower.transpose());
  write_row(out, prior_.upper.transpose());
}

void SvgdBelief::write_csv(std::ostream& out,
                           const std::vector<std::string>& labels) const {
  write_header(out, labels);
  for (int i = 0; i < particles_.size(); ++i) {
    write_row(out, particles_.particles().row(i));
  }
}

UkfBelief::UkfBelief(GaussianBelief belief, Box bounds, NoiseModel noise,
                     Eigen::MatrixXd process_noise)
    : belief_(std::move(belief)),
      bounds_(std::move(bounds)),
      noise_(std::move(noise)),
      process_noise_(std::move(process_noise)) {
  belief_.validate();
}

std::vector<Eigen::VectorXd> UkfBelief::sample(int count, Rng& rng) const {
  const Eigen::MatrixXd l = robust_cholesky(belief_.covariance, "ukf");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  Eigen::VectorXd z(belief_.mean.size());
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index d = 0; d < z.size(); ++d) z(d) = normal(rng);
    out.push_back(bounds_.project(belief_.mean + l * z));
  }
  return out;
}

void UkfBelief::write_csv(std::ostream& out,
                          const std::vector<std::string>& labels) const {
  write_header(out, labels);
  write_row(out, belief_.mean.transpose());
}

}  // namespace prmppi
