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

#ifndef MBSC_LANDER_HPP
#define MBSC_LANDER_HPP

#include <cstdint>
#include <random>
#include <string_view>

#include "mbsc/types.hpp"

namespace mbsc {

struct SimConfig {
  double mass = 10.0;           // kg
  double inertia = 10.0;        // kg m^2
  double gravity = 9.81;        // m/s^2
  double main_thrust_max = 150.0;  // N
  double side_thrust_max = 15.0;   // N
  double side_lever_arm = 1.0;     // m
  double dt_log = 0.1;             // s
  int substeps = 6;

  double start_x = 10.0;
  double start_y = 13.3;
  double start_noise_sigma = 0.2;  // m
  double kick_force_range = 1000.0;  // N, symmetric uniform per component
  double kick_duration = 0.02;       // s the startup force acts for

  double goal_x = 10.0;
  double goal_y = 6.0;
  double goal_radius = 0.9;          // m
  double velocity_threshold = 1.0;   // m/s, per component
  double omega_threshold = 0.3;      // rad/s
  double upright_threshold = 0.25;   // rad
  double ground_height = 0.5;        // m, contact height of the lander centre

  double world_x_min = 0.0;
  double world_x_max = 20.0;
  double world_y_max = 16.0;

  double timeout = 60.0;  // s
  std::uint64_t seed = 1;

  // Throws Error(kConfig) naming the first offending field.
  void validate() const;

  LanderState goal_state() const { return {goal_x, goal_y, 0, 0, 0, 0}; }
  double hover_throttle() const { return mass * gravity / main_thrust_max; }
};

enum class TrialStatus { kRunning, kSuccess, kCrash, kOutOfBounds, kTimeout };

std::string_view to_string(TrialStatus s);
TrialStatus trial_status_from_string(std::string_view s);
inline bool is_terminal(TrialStatus s) { return s != TrialStatus::kRunning; }

struct StepInfo {
  bool clamped = false;
  ControlInput applied;
};

using Rng = std::mt19937_64;

// Start position plus Gaussian jitter, upright, at rest except for the
// velocity imparted by a uniformly drawn startup force.
LanderState reset(const SimConfig& config, Rng& rng);

// Velocity change produced by `force` acting on the centre of mass for the
// configured kick duration.
LanderState apply_kick(const LanderState& s, double fx, double fy,
                       const SimConfig& config);

// Advances one log step with `substeps` semi-implicit Euler sub-integrations.
// Out-of-range controls are clamped and reported through `info`.
LanderState step(const LanderState& state, ControlInput control,
                 const SimConfig& config, StepInfo* info = nullptr);

// Continuous-time acceleration (ax, ay, alpha) for a saturated control.
Eigen::Vector3d accelerations(const LanderState& s, const ControlInput& u,
                              const SimConfig& config);

bool success_region(const LanderState& s, const SimConfig& config);

// Precedence: Success > Crash > OutOfBounds > Timeout > Running.
TrialStatus classify(const LanderState& s, double elapsed,
                     const SimConfig& config);

}  // namespace mbsc

#endif  // MBSC_LANDER_HPP
