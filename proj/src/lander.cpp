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

#include "mbsc/lander.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace mbsc {

ControlInput saturate(ControlInput u, bool* clamped) {
  ControlInput out{std::clamp(u.u1, kMainMin, kMainMax),
                   std::clamp(u.u2, kSideMin, kSideMax)};
  if (clamped) *clamped = !(out == u);
  return out;
}

void SimConfig::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw Error(ErrorCode::kConfig, std::string("invalid sim config: ") + field);
  };
  require(mass > 0 && std::isfinite(mass), "mass");
  require(inertia > 0 && std::isfinite(inertia), "inertia");
  require(std::isfinite(gravity), "gravity");
  require(main_thrust_max > 0, "main_thrust_max");
  require(side_thrust_max > 0, "side_thrust_max");
  require(side_lever_arm > 0, "side_lever_arm");
  require(dt_log > 0, "dt_log");
  require(substeps >= 1, "substeps");
  require(start_noise_sigma >= 0, "start_noise_sigma");
  require(kick_force_range >= 0, "kick_force_range");
  require(kick_duration >= 0, "kick_duration");
  require(goal_radius > 0, "goal_radius");
  require(velocity_threshold > 0, "velocity_threshold");
  require(omega_threshold > 0, "omega_threshold");
  require(upright_threshold > 0, "upright_threshold");
  require(world_x_max > world_x_min, "world_x_max");
  require(world_y_max > ground_height, "world_y_max");
  require(timeout > 0, "timeout");
}

namespace {
constexpr std::array<std::string_view, 5> kStatusNames = {
    "Running", "Success", "Crash", "OutOfBounds", "Timeout"};
}

std::string_view to_string(TrialStatus s) {
  return kStatusNames[static_cast<std::size_t>(s)];
}

TrialStatus trial_status_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i)
    if (kStatusNames[i] == s) return static_cast<TrialStatus>(i);
  throw Error(ErrorCode::kInvalidArgument, "unknown trial status: " + std::string(s));
}

LanderState apply_kick(const LanderState& s, double fx, double fy,
                       const SimConfig& config) {
  LanderState out = s;
  out.vx += fx * config.kick_duration / config.mass;
  out.vy += fy * config.kick_duration / config.mass;
  return out;
}

LanderState reset(const SimConfig& config, Rng& rng) {
  // Draw order is fixed: x noise, y noise, kick x, kick y.
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> kick(-1.0, 1.0);
  LanderState s;
  s.x = config.start_x + config.start_noise_sigma * noise(rng);
  s.y = config.start_y + config.start_noise_sigma * noise(rng);
  const double fx = config.kick_force_range * kick(rng);
  const double fy = config.kick_force_range * kick(rng);
  return apply_kick(s, fx, fy, config);
}

Eigen::Vector3d accelerations(const LanderState& s, const ControlInput& u,
                              const SimConfig& config) {
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  const double main = u.u1 * config.main_thrust_max;
  // Side engines push along body -x for positive u2 and spin the hull
  // counter-clockwise, so both effects lean the lander the same way.
  const double side = u.u2 * config.side_thrust_max;
  const double fx = -sn * main - c * side;
  const double fy = c * main - sn * side;
  const double torque = side * config.side_lever_arm;
  return {fx / config.mass, fy / config.mass - config.gravity,
          torque / config.inertia};
}

LanderState step(const LanderState& state, ControlInput control,
                 const SimConfig& config, StepInfo* info) {
  if (!state.finite()) throw Error(ErrorCode::kNonFinite, "step: non-finite state");
  if (!control.finite()) throw Error(ErrorCode::kNonFinite, "step: non-finite control");
  bool clamped = false;
  const ControlInput u = saturate(control, &clamped);
  if (info) {
    info->clamped = clamped;
    info->applied = u;
  }
  const double h = config.dt_log / config.substeps;
  LanderState s = state;
  for (int i = 0; i < config.substeps; ++i) {
    const Eigen::Vector3d acc = accelerations(s, u, config);
    s.vx += h * acc(0);
    s.vy += h * acc(1);
    s.omega += h * acc(2);
    s.x += h * s.vx;
    s.y += h * s.vy;
    s.theta += h * s.omega;
  }
  if (!s.finite()) throw Error(ErrorCode::kNonFinite, "step: integration diverged");
  return s;
}

bool success_region(const LanderState& s, const SimConfig& config) {
  const double dist = std::hypot(s.x - config.goal_x, s.y - config.goal_y);
  return dist < config.goal_radius && std::abs(s.vx) < config.velocity_threshold &&
         std::abs(s.vy) < config.velocity_threshold &&
         std::abs(s.omega) < config.omega_threshold &&
         std::abs(s.theta) < config.upright_threshold;
}

TrialStatus classify(const LanderState& s, double elapsed, const SimConfig& config) {
  if (success_region(s, config)) return TrialStatus::kSuccess;
  if (s.y <= config.ground_height) return TrialStatus::kCrash;
  if (s.x < config.world_x_min || s.x > config.world_x_max || s.y > config.world_y_max)
    return TrialStatus::kOutOfBounds;
  if (elapsed >= config.timeout) return TrialStatus::kTimeout;
  return TrialStatus::kRunning;
}

}  // namespace mbsc
