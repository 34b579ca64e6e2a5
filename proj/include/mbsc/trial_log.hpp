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

// Trial records and their line-delimited JSON encoding.
//
// A log file is a sequence of lines, each one JSON object with a "type":
//   {"type":"trial", ...header...}
//   {"type":"step",  ...one per 0.1 s tick...}
//   {"type":"end",   ...outcome...}
// Trials follow one another; a file may hold any number of them.

#ifndef MBSC_TRIAL_LOG_HPP
#define MBSC_TRIAL_LOG_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mbsc/koopman.hpp"
#include "mbsc/lander.hpp"

namespace mbsc {

enum class Condition { kUserOnly, kIndividual, kGeneral, kExpert, kOnline };

std::string_view to_string(Condition c);
Condition condition_from_string(std::string_view s);
inline bool is_shared(Condition c) { return c != Condition::kUserOnly; }

inline constexpr int kLogSchemaVersion = 1;

struct StepRecord {
  double time = 0.0;
  LanderState state;
  ControlInput u_h;
  ControlInput u_a;
  ControlInput u_out;
  bool admitted = false;
  bool agree_main = true;
  bool agree_side = true;
  bool descent = false;  // autonomy reported predicted-cost descent
  bool terminal = false; // final state; carries no command

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct TrialRecord {
  Condition condition = Condition::kUserOnly;
  int subject = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string pilot;
  std::string model_id;
  std::vector<StepRecord> steps;
  TrialStatus outcome = TrialStatus::kRunning;
  double duration = 0.0;
  std::string fault;  // non-empty when the trial was aborted by a fault

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

void write_trial(std::ostream& os, const TrialRecord& record);
std::string serialize_trial(const TrialRecord& record);

// Reads every trial in the stream. Throws Error(kIo) on malformed input.
std::vector<TrialRecord> read_trials(std::istream& is);
std::vector<TrialRecord> parse_trials(std::string_view text);
std::vector<TrialRecord> read_trials_file(const std::string& path);

// Consecutive snapshot pairs of one trial, terminal step included. Pairs
// never cross trial boundaries.
std::vector<SnapshotPair> snapshot_pairs(const TrialRecord& record);
std::vector<SnapshotPair> snapshot_pairs(const std::vector<TrialRecord>& records);

}  // namespace mbsc

#endif  // MBSC_TRIAL_LOG_HPP
