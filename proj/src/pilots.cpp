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

#include "mbsc/pilots.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mbsc {

std::string_view to_string(PilotKind kind) {
  return kind == PilotKind::kExpert ? "expert" : "novice";
}

PilotKind pilot_kind_from_string(std::string_view s) {
  if (s == "expert") return PilotKind::kExpert;
  if (s == "novice") return PilotKind::kNovice;
  throw Error(ErrorCode::kInvalidArgument, "unknown pilot kind: " + std::string(s));
}

PilotConfig PilotConfig::expert() {
  PilotConfig c;
  c.excitation = 0.1;
  return c;
}

PilotConfig PilotConfig::novice(std::uint64_t seed) {
  PilotConfig c;
  c.kind = PilotKind::kNovice;
  c.noise_main = 0.15;
  c.noise_side = 0.35;
  c.delay_steps = 2;
  c.drift_sigma = 0.2;
  c.drift_decay = 0.2;
  c.seed = seed;
  return c;
}

void PilotConfig::validate() const {
  if (noise_main < 0 || noise_side < 0) throw Error(ErrorCode::kConfig, "pilot noise must be >= 0");
  if (delay_steps < 0) throw Error(ErrorCode::kConfig, "pilot delay must be >= 0");
  if (!(excitation >= 0)) throw Error(ErrorCode::kConfig, "pilot excitation must be >= 0");
  if (drift_sigma < 0 || drift_decay < 0)
    throw Error(ErrorCode::kConfig, "pilot drift parameters must be >= 0");
  const PilotGains& g = gains;
  for (double v : {g.position, g.velocity, g.max_tilt, g.attitude, g.attitude_rate, g.altitude,
                   g.max_descent, g.climb})
    if (!std::isfinite(v)) throw Error(ErrorCode::kConfig, "pilot gains must be finite");
}

ControlInput expert_pilot(const LanderState& s, const LanderState& goal, const PilotGains& g,
                          const SimConfig& sim) {
  // Horizontal: the main engine tilted by theta pushes along -sin(theta).
  const double ax = g.position * (goal.x - s.x) - g.velocity * s.vx;
  const double tilt = std::clamp(-ax / sim.gravity, -g.max_tilt, g.max_tilt);
  const double u2 = g.attitude * (tilt - s.theta) - g.attitude_rate * s.omega;

  const double climb = std::clamp(g.altitude * (goal.y - s.y), -g.max_descent, g.max_descent);
  const double ay = g.climb * (climb - s.vy);
  const double c = std::max(std::cos(s.theta), 0.3);
  const double u1 = sim.mass * (sim.gravity + ay) / (sim.main_thrust_max * c);
  return saturate({u1, u2});
}

Pilot::Pilot(PilotConfig config, LanderState goal, SimConfig sim)
    : config_(config), goal_(goal), sim_(sim), rng_(config.seed) {
  config_.validate();
}

void Pilot::reset() {
  rng_.seed(config_.seed);
  history_.clear();
  bias_main_ = 0.0;
  bias_side_ = 0.0;
  tick_ = 0;
}

ControlInput Pilot::command(const LanderState& state) {
  history_.push_back(state);
  while (static_cast<int>(history_.size()) > config_.delay_steps + 1) history_.pop_front();
  const LanderState& seen = history_.front();

  ControlInput u = expert_pilot(seen, goal_, config_.gains, sim_);
  const double t = static_cast<double>(tick_++) * sim_.dt_log;
  if (config_.excitation > 0) {
    constexpr double kTwoPi = 6.283185307179586;
    const double a = config_.excitation;
    u.u1 += a * (std::sin(kTwoPi * 0.37 * t) + 0.5 * std::sin(kTwoPi * 1.13 * t + 1.0));
    u.u2 += a * (std::sin(kTwoPi * 0.71 * t + 0.5) + 0.5 * std::sin(kTwoPi * 1.91 * t + 2.0));
    u = saturate(u);
  }
  if (config_.kind == PilotKind::kExpert) return u;

  // Draw order is fixed per step so seeds reproduce exactly.
  std::normal_distribution<double> unit(0.0, 1.0);
  const double n1 = unit(rng_);
  const double n2 = unit(rng_);
  const double d1 = unit(rng_);
  const double d2 = unit(rng_);
  const double dt = sim_.dt_log;
  const double keep = std::exp(-config_.drift_decay * dt);
  bias_main_ = keep * bias_main_ + config_.drift_sigma * std::sqrt(dt) * d1;
  bias_side_ = keep * bias_side_ + config_.drift_sigma * std::sqrt(dt) * d2;

  u.u1 += config_.noise_main * n1 + bias_main_;
  u.u2 += config_.noise_side * n2 + bias_side_;
  return saturate(u);
}

}  // namespace mbsc
