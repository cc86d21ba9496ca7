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

#ifndef PRMPPI_COMMON_HPP_
#define PRMPPI_COMMON_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace prmppi {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One row per time step. A control sequence of horizon N has N rows, the
// matching state trajectory N + 1.
using ControlSequence = RowMatrixX<double>;
using Trajectory = RowMatrixX<double>;

using Rng = std::mt19937_64;

// Error taxonomy. Everything derives from std::runtime_error or
// std::invalid_argument so callers can catch broadly.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationBlowup : public NumericError {
 public:
  IntegrationBlowup(const std::string& what, Eigen::VectorXd state)
      : NumericError(what), state_(std::move(state)) {}
  const Eigen::VectorXd& state() const { return state_; }

 private:
  Eigen::VectorXd state_;
};

// Raised when too few calibration samples exist for a finite conformal
// quantile.
class InsufficientSamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Every cost in an MPPI batch was infinite.
class DegenerateBatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimatorDivergence : public NumericError {
 public:
  using NumericError::NumericError;
};

// Non-fatal diagnostics (bandwidth floors, SIR resets, ...). The default
// sink writes to stderr; tests and the CLI may redirect or silence it.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);
// Like warn, but repeats of the same message are dropped until the sink is
// replaced.
void warn_once(std::string_view message);

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

// Axis-aligned box; used for parameter sets and control limits.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    require(lower.size() == upper.size(), "box bounds differ in size");
    require((lower.array() <= upper.array()).all(), "box lower > upper");
  }

  Eigen::Index size() const { return lower.size(); }
  Eigen::VectorXd width() const { return upper - lower; }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& v) const {
    return v.size() == size() && (v.array() >= lower.array()).all() &&
           (v.array() <= upper.array()).all();
  }

  template <typename Derived>
  Eigen::VectorXd project(const Eigen::MatrixBase<Derived>& v) const {
    return v.cwiseMax(lower).cwiseMin(upper);
  }

  bool contains_box(const Box& other) const {
    return other.size() == size() &&
           (other.lower.array() >= lower.array()).all() &&
           (other.upper.array() <= upper.array()).all();
  }
};

// Round-trip decimal form (%.17g) used by every numeric output.
std::string format_number(double value);

// Uniform draw from a box.
Eigen::VectorXd sample_uniform(const Box& box, Rng& rng);

}  // namespace prmppi

#endif  // PRMPPI_COMMON_HPP_
