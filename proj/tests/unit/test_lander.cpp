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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mbsc/lander.hpp"

namespace mbsc {
namespace {

SimConfig quiet() {
  SimConfig c;
  c.start_noise_sigma = 0.0;
  c.kick_force_range = 0.0;
  return c;
}

TEST(Lander, ResetWithoutRandomnessIsStartPose) {
  Rng rng(123);
  const LanderState s = reset(quiet(), rng);
  EXPECT_EQ(s, (LanderState{10.0, 13.3, 0, 0, 0, 0}));
}

TEST(Lander, KickImpulse) {
  SimConfig c;
  c.kick_duration = 0.1;
  const LanderState s = apply_kick({}, 1000.0, 0.0, c);
  // J = F dt, dv = J / m
  EXPECT_NEAR(s.vx, 1000.0 * 0.1 / 10.0, 1e-12);
  EXPECT_EQ(s.vy, 0.0);
}

TEST(Lander, ResetIsDeterministicPerSeed) {
  SimConfig c;
  Rng a(42), b(42), other(43);
  const LanderState sa = reset(c, a);
  EXPECT_EQ(sa, reset(c, b));
  EXPECT_NE(sa, reset(c, other));
  LanderState x = sa, y = sa;
  for (int i = 0; i < 50; ++i) {
    x = step(x, {0.6, 0.1}, c);
    y = step(y, {0.6, 0.1}, c);
  }
  EXPECT_EQ(x, y);
}

TEST(Lander, BallisticSingleSubstep) {
  SimConfig c = quiet();
  c.substeps = 1;
  const LanderState s = step({10, 10, 0, 0, 0, 0}, {0, 0}, c);
  // Semi-implicit Euler: v = -g dt, then y += v dt.
  EXPECT_NEAR(s.vy, -0.981, 1e-12);
  EXPECT_NEAR(s.y, 10.0 - 0.0981, 1e-12);
  EXPECT_EQ(s.x, 10.0);
  EXPECT_EQ(s.vx, 0.0);
}

TEST(Lander, FullThrustHoversWhenThrustEqualsWeight) {
  SimConfig c = quiet();
  c.main_thrust_max = c.mass * c.gravity;
  const auto acc = accelerations({10, 10, 0, 0, 0, 0}, {1, 0}, c);
  EXPECT_NEAR(acc(1), 0.0, 1e-12);
  EXPECT_NEAR(acc(0), 0.0, 1e-12);
}

TEST(Lander, ThrustRotatesWithHull) {
  SimConfig c = quiet();
  const auto acc = accelerations({10, 10, std::numbers::pi / 2, 0, 0, 0}, {1, 0}, c);
  // Body +y rotated by pi/2 points along world -x.
  EXPECT_NEAR(acc(0), -c.main_thrust_max / c.mass, 1e-9);
  EXPECT_NEAR(acc(1), -c.gravity, 1e-9);
  EXPECT_EQ(acc(2), 0.0);
}

TEST(Lander, SideThrustSignConvention) {
  SimConfig c = quiet();
  const auto left = accelerations({}, {0, -1}, c);
  const auto right = accelerations({}, {0, 1}, c);
  EXPECT_GT(left(0), 0.0);
  EXPECT_LT(left(2), 0.0);
  EXPECT_NEAR(left(0), -right(0), 1e-12);
  EXPECT_NEAR(left(2), -right(2), 1e-12);
}

TEST(Lander, StepSaturatesAndReportsClamp) {
  SimConfig c = quiet();
  StepInfo info;
  const LanderState a = step({10, 10, 0, 0, 0, 0}, {2.0, -3.0}, c, &info);
  EXPECT_TRUE(info.clamped);
  EXPECT_EQ(info.applied, (ControlInput{1.0, -1.0}));
  EXPECT_EQ(a, step({10, 10, 0, 0, 0, 0}, {1.0, -1.0}, c));
  step({10, 10, 0, 0, 0, 0}, {0.5, 0.5}, c, &info);
  EXPECT_FALSE(info.clamped);
}

TEST(Lander, NonFiniteInputsRejected) {
  SimConfig c;
  try {
    step({NAN, 0, 0, 0, 0, 0}, {0, 0}, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
  EXPECT_THROW(step({}, {INFINITY, 0}, c), Error);
}

TEST(Lander, Classification) {
  SimConfig c;
  EXPECT_EQ(classify({10, 6, 0, 0, 0, 0}, 0, c), TrialStatus::kSuccess);
  EXPECT_EQ(classify({10, 6, 0, 0, 0, 0.31}, 0, c), TrialStatus::kRunning);
  EXPECT_EQ(classify({20.5, 10, 0, 0, 0, 0}, 0, c), TrialStatus::kOutOfBounds);
  EXPECT_EQ(classify({10, 16.5, 0, 0, 0, 0}, 0, c), TrialStatus::kOutOfBounds);
  EXPECT_EQ(classify({10, 0.4, 0, 0, 0, 0}, 0, c), TrialStatus::kCrash);
  EXPECT_EQ(classify({10, 10, 0, 0, 0, 0}, 60.0, c), TrialStatus::kTimeout);
  EXPECT_EQ(classify({10, 10, 0, 0, 0, 0}, 59.9, c), TrialStatus::kRunning);
  // Each threshold is strict.
  EXPECT_EQ(classify({10, 6, 0, 1.0, 0, 0}, 0, c), TrialStatus::kRunning);
  EXPECT_EQ(classify({10.9, 6, 0, 0, 0, 0}, 0, c), TrialStatus::kRunning);
  EXPECT_EQ(classify({10, 6, 0.25, 0, 0, 0}, 0, c), TrialStatus::kRunning);
}

TEST(Lander, StatusNamesRoundTrip) {
  for (auto s : {TrialStatus::kRunning, TrialStatus::kSuccess, TrialStatus::kCrash,
                 TrialStatus::kOutOfBounds, TrialStatus::kTimeout})
    EXPECT_EQ(trial_status_from_string(to_string(s)), s);
  EXPECT_THROW(trial_status_from_string("Landed"), Error);
}

TEST(Lander, ConfigValidation) {
  SimConfig c;
  EXPECT_NO_THROW(c.validate());
  c.substeps = 0;
  EXPECT_THROW(c.validate(), Error);
  c = SimConfig{};
  c.mass = -1;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("mass"), std::string::npos);
  }
}

// Free flight conserves momentum: no control, no gravity.
TEST(LanderProperty, ZeroGravityCoasting) {
  SimConfig c = quiet();
  c.gravity = 0.0;
  Rng rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int n = 0; n < 100; ++n) {
    const LanderState s0{10, 8, u(rng), u(rng), u(rng), u(rng)};
    const LanderState s1 = step(s0, {0, 0}, c);
    EXPECT_NEAR(s1.vx, s0.vx, 1e-12);
    EXPECT_NEAR(s1.vy, s0.vy, 1e-12);
    EXPECT_NEAR(s1.omega, s0.omega, 1e-12);
    EXPECT_NEAR(s1.x, s0.x + c.dt_log * s0.vx, 1e-12);
    EXPECT_NEAR(s1.theta, s0.theta + c.dt_log * s0.omega, 1e-12);
  }
}

}  // namespace
}  // namespace mbsc
