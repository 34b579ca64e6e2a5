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

// Scripted surrogate operators used in place of human subjects.

#ifndef MBSC_PILOTS_HPP
#define MBSC_PILOTS_HPP

#include <cstdint>
#include <deque>
#include <string_view>

#include "mbsc/lander.hpp"
#include "mbsc/types.hpp"

namespace mbsc {

enum class PilotKind { kExpert, kNovice };
std::string_view to_string(PilotKind kind);
PilotKind pilot_kind_from_string(std::string_view s);

struct PilotGains {
  double position = 0.35;     // horizontal position -> desired acceleration
  double velocity = 0.9;      // horizontal velocity damping
  double max_tilt = 0.35;     // rad
  double attitude = 2.0;      // tilt error -> side throttle
  double attitude_rate = 2.4; // spin damping
  double altitude = 0.6;      // height error -> desired climb rate
  double max_descent = 1.4;   // m/s
  double climb = 2.5;         // climb-rate error -> acceleration
};

struct PilotConfig {
  PilotKind kind = PilotKind::kExpert;
  PilotGains gains;
  double noise_main = 0.0;   // per-step Gaussian control noise
  double noise_side = 0.0;
  int delay_steps = 0;       // age of the state the pilot acts on
  double drift_sigma = 0.0;  // random-walk intensity of the command bias
  double drift_decay = 0.0;  // pull of the bias back to zero, 1/s
  double excitation = 0.0;   // amplitude of a deterministic multi-sine dither
  std::uint64_t seed = 1;

  static PilotConfig expert();
  // Degradation used by the study defaults; solo success near one in ten.
  static PilotConfig novice(std::uint64_t seed = 1);
  void validate() const;
};

// Cascaded PD law: horizontal error sets a tilt target, the side engines
// track it, the main engine regulates descent toward the goal height.
ControlInput expert_pilot(const LanderState& state, const LanderState& goal,
                          const PilotGains& gains = {}, const SimConfig& sim = {});

// Stateful pilot for one trial. Novice degradation is delayed observation,
// additive noise and a slowly drifting bias, all driven by the config seed.
class Pilot {
 public:
  Pilot(PilotConfig config, LanderState goal, SimConfig sim);

  // Called once per log step with the true state; returns a saturated command.
  ControlInput command(const LanderState& state);
  void reset();

  const PilotConfig& config() const { return config_; }

 private:
  PilotConfig config_;
  LanderState goal_;
  SimConfig sim_;
  Rng rng_;
  std::deque<LanderState> history_;
  double bias_main_ = 0.0;
  double bias_side_ = 0.0;
  std::int64_t tick_ = 0;
};

}  // namespace mbsc

#endif  // MBSC_PILOTS_HPP
