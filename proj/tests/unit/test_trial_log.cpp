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
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mbsc/harness.hpp"
#include "mbsc/trial_log.hpp"

namespace mbsc {
namespace {

TrialRecord synthetic(int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  TrialRecord r;
  r.condition = Condition::kGeneral;
  r.subject = 3;
  r.trial = 7;
  r.seed = 0xFFFFFFFFFFFFFFF1ull;
  r.pilot = "novice";
  r.model_id = "general";
  for (int i = 0; i < steps; ++i) {
    StepRecord s;
    s.time = 0.1 * i;
    // Awkward doubles exercise shortest round-trip formatting.
    s.state = {u(rng) * 1e-7, 1.0 / 3.0, std::nextafter(0.1, 1.0), u(rng), -0.0, u(rng) * 1e9};
    s.u_h = {std::abs(u(rng)), u(rng)};
    s.u_a = {std::abs(u(rng)), u(rng)};
    s.u_out = i % 3 ? s.u_h : ControlInput{};
    s.admitted = i % 3 != 0;
    s.agree_main = i % 2;
    s.agree_side = i % 5;
    s.descent = i % 7;
    r.steps.push_back(s);
  }
  r.steps.back().terminal = true;
  r.outcome = TrialStatus::kOutOfBounds;
  r.duration = 0.1 * (steps - 1);
  r.fault = "unicode \xC3\xA9 and \"quotes\"";
  return r;
}

TEST(TrialLog, RoundTripIsExact) {
  const TrialRecord a = synthetic(50, 1), b = synthetic(3, 2);
  std::ostringstream os;
  write_trial(os, a);
  write_trial(os, b);
  const auto back = parse_trials(os.str());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
  EXPECT_TRUE(std::signbit(back[0].steps[0].state.vx));
  EXPECT_EQ(serialize_trial(back[0]), serialize_trial(a));
}

TEST(TrialLog, SimulatedTrialsRoundTrip) {
  const auto trials = collect_demonstrations(PilotConfig::novice(), 5, SimConfig{}, 17);
  for (const auto& t : trials) {
    const auto back = parse_trials(serialize_trial(t));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0], t);
  }
}

TEST(TrialLog, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "mbsc_trial_log_test.ndjson";
  {
    std::ofstream os(path);
    write_trial(os, synthetic(10, 4));
  }
  const auto back = read_trials_file(path.string());
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], synthetic(10, 4));
  EXPECT_THROW(read_trials_file("/nonexistent/dir/log.ndjson"), Error);
}

ErrorCode parse_error(const std::string& text) {
  try {
    parse_trials(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kRuntime;
}

TEST(TrialLog, MalformedLogsRejected) {
  const std::string good = serialize_trial(synthetic(4, 3));
  EXPECT_EQ(parse_trials("").size(), 0u);
  EXPECT_EQ(parse_error("{not json\n"), ErrorCode::kIo);
  const std::string no_end = good.substr(0, good.rfind('\n', good.size() - 2) + 1);
  EXPECT_EQ(no_end.find("\"type\":\"end\""), std::string::npos);
  EXPECT_EQ(parse_error(no_end), ErrorCode::kIo);
  EXPECT_EQ(parse_error(good.substr(good.find('\n') + 1)), ErrorCode::kIo);
  std::string bad_version = good;
  bad_version.replace(bad_version.find("\"v\":1"), 5, "\"v\":9");
  EXPECT_EQ(parse_error(bad_version), ErrorCode::kIo);
  std::string bad_count = good;
  bad_count.replace(bad_count.find("\"steps\":4"), 9, "\"steps\":5");
  EXPECT_EQ(parse_error(bad_count), ErrorCode::kIo);
  EXPECT_EQ(parse_error("{\"type\":\"mystery\"}\n"), ErrorCode::kIo);
}

TEST(TrialLog, SnapshotPairsChainConsecutiveSteps) {
  const TrialRecord r = synthetic(6, 5);
  const auto pairs = snapshot_pairs(r);
  ASSERT_EQ(pairs.size(), 5u);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].state, r.steps[i].state);
    EXPECT_EQ(pairs[i].control, r.steps[i].u_out);
    EXPECT_EQ(pairs[i].next_state, r.steps[i + 1].state);
    EXPECT_EQ(pairs[i].next_control, r.steps[i + 1].u_out);
  }
  EXPECT_TRUE(snapshot_pairs(synthetic(1, 5)).empty());
  EXPECT_TRUE(snapshot_pairs(std::vector<TrialRecord>{}).empty());
  EXPECT_EQ(snapshot_pairs(std::vector<TrialRecord>{r, r}).size(), 10u);
}

TEST(TrialLog, ConditionNames) {
  for (auto c : {Condition::kUserOnly, Condition::kIndividual, Condition::kGeneral,
                 Condition::kExpert, Condition::kOnline})
    EXPECT_EQ(condition_from_string(to_string(c)), c);
  EXPECT_EQ(to_string(Condition::kExpert), "ExpertKoopman");
  EXPECT_THROW(condition_from_string("Autopilot"), Error);
}

}  // namespace
}  // namespace mbsc
