// Copyright 2026 The MbSC Authors
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

#ifndef MBSC_TYPES_HPP
#define MBSC_TYPES_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mbsc {

inline constexpr int kStateDim = 6;
inline constexpr int kControlDim = 2;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using ControlVector = Eigen::Matrix<double, kControlDim, 1>;

// Planar rigid-body state. theta = 0 is upright, positive counter-clockwise.
struct LanderState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  StateVector vec() const {
    StateVector v;
    v << x, y, theta, vx, vy, omega;
    return v;
  }

  static LanderState from(const StateVector& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
  }

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta) &&
           std::isfinite(vx) && std::isfinite(vy) && std::isfinite(omega);
  }

  friend bool operator==(const LanderState&, const LanderState&) = default;
};

// u1 drives the main engine (one-sided), u2 the rotational pair: negative
// fires the left engine, positive the right one.
struct ControlInput {
  double u1 = 0.0;
  double u2 = 0.0;

  ControlVector vec() const { return ControlVector(u1, u2); }
  static ControlInput from(const ControlVector& v) { return {v(0), v(1)}; }

  bool finite() const { return std::isfinite(u1) && std::isfinite(u2); }
  bool is_zero() const { return u1 == 0.0 && u2 == 0.0; }

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

inline constexpr double kMainMin = 0.0;
inline constexpr double kMainMax = 1.0;
inline constexpr double kSideMin = -1.0;
inline constexpr double kSideMax = 1.0;

// Clamps into the actuator box. `clamped` is set when any component moved.
ControlInput saturate(ControlInput u, bool* clamped = nullptr);

enum class ErrorCode {
  kInvalidArgument = 1,
  kConfig,
  kModel,
  kNotFitted,
  kNonFinite,
  kSolver,
  kIo,
  kRuntime,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mbsc

#endif  // MBSC_TYPES_HPP
