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

#include "mbsc/trial_log.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace mbsc {

using nlohmann::json;

namespace {
constexpr std::array<std::string_view, 5> kConditionNames = {
    "UserOnly", "IndividualKoopman", "GeneralKoopman", "ExpertKoopman", "OnlineKoopman"};

json state_json(const LanderState& s) { return json::array({s.x, s.y, s.theta, s.vx, s.vy, s.omega}); }
json control_json(const ControlInput& u) { return json::array({u.u1, u.u2}); }

LanderState state_from(const json& j) {
  if (!j.is_array() || j.size() != 6) throw Error(ErrorCode::kIo, "log: state must have 6 entries");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>(), j[4].get<double>(), j[5].get<double>()};
}

ControlInput control_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::kIo, "log: control must have 2 entries");
  return {j[0].get<double>(), j[1].get<double>()};
}
}  // namespace

std::string_view to_string(Condition c) { return kConditionNames[static_cast<std::size_t>(c)]; }

Condition condition_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kConditionNames.size(); ++i)
    if (kConditionNames[i] == s) return static_cast<Condition>(i);
  throw Error(ErrorCode::kInvalidArgument, "unknown condition: " + std::string(s));
}

void write_trial(std::ostream& os, const TrialRecord& r) {
  json head = {{"type", "trial"},       {"v", kLogSchemaVersion},
               {"condition", to_string(r.condition)},
               {"subject", r.subject},  {"trial", r.trial},
               {"seed", r.seed},        {"pilot", r.pilot},
               {"model", r.model_id}};
  os << head.dump() << '\n';
  for (const auto& s : r.steps) {
    json j = {{"type", "step"},
              {"t", s.time},
              {"x", state_json(s.state)},
              {"uh", control_json(s.u_h)},
              {"ua", control_json(s.u_a)},
              {"u", control_json(s.u_out)},
              {"admitted", s.admitted},
              {"agree", json::array({s.agree_main, s.agree_side})},
              {"descent", s.descent},
              {"terminal", s.terminal}};
    os << j.dump() << '\n';
  }
  json end = {{"type", "end"},
              {"outcome", to_string(r.outcome)},
              {"duration", r.duration},
              {"steps", r.steps.size()},
              {"fault", r.fault}};
  os << end.dump() << '\n';
}

std::string serialize_trial(const TrialRecord& record) {
  std::ostringstream os;
  write_trial(os, record);
  return os.str();
}

std::vector<TrialRecord> read_trials(std::istream& is) {
  std::vector<TrialRecord> out;
  std::string line;
  bool open = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "trial") {
        if (open) throw Error(ErrorCode::kIo, "trial header before previous trial ended");
        if (j.at("v").get<int>() != kLogSchemaVersion)
          throw Error(ErrorCode::kIo, "unsupported log schema version");
        TrialRecord r;
        r.condition = condition_from_string(j.at("condition").get<std::string>());
        r.subject = j.at("subject").get<int>();
        r.trial = j.at("trial").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.pilot = j.at("pilot").get<std::string>();
        r.model_id = j.at("model").get<std::string>();
        out.push_back(std::move(r));
        open = true;
      } else if (type == "step") {
        if (!open) throw Error(ErrorCode::kIo, "step outside a trial");
        StepRecord s;
        s.time = j.at("t").get<double>();
        s.state = state_from(j.at("x"));
        s.u_h = control_from(j.at("uh"));
        s.u_a = control_from(j.at("ua"));
        s.u_out = control_from(j.at("u"));
        s.admitted = j.at("admitted").get<bool>();
        s.agree_main = j.at("agree").at(0).get<bool>();
        s.agree_side = j.at("agree").at(1).get<bool>();
        s.descent = j.at("descent").get<bool>();
        s.terminal = j.at("terminal").get<bool>();
        out.back().steps.push_back(s);
      } else if (type == "end") {
        if (!open) throw Error(ErrorCode::kIo, "end outside a trial");
        auto& r = out.back();
        r.outcome = trial_status_from_string(j.at("outcome").get<std::string>());
        r.duration = j.at("duration").get<double>();
        r.fault = j.at("fault").get<std::string>();
        if (j.at("steps").get<std::size_t>() != r.steps.size())
          throw Error(ErrorCode::kIo, "step count mismatch");
        open = false;
      } else {
        throw Error(ErrorCode::kIo, "unknown record type " + type);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIo, "log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kIo, "log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (open) throw Error(ErrorCode::kIo, "log ends inside a trial");
  return out;
}

std::vector<TrialRecord> parse_trials(std::string_view text) {
  std::istringstream is{std::string(text)};
  return read_trials(is);
}

std::vector<TrialRecord> read_trials_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open log " + path);
  return read_trials(is);
}

std::vector<SnapshotPair> snapshot_pairs(const TrialRecord& record) {
  std::vector<SnapshotPair> out;
  const auto& st = record.steps;
  for (std::size_t i = 0; i + 1 < st.size(); ++i)
    out.push_back({st[i].state, st[i].u_out, st[i + 1].state, st[i + 1].u_out});
  return out;
}

std::vector<SnapshotPair> snapshot_pairs(const std::vector<TrialRecord>& records) {
  std::vector<SnapshotPair> out;
  for (const auto& r : records) {
    auto p = snapshot_pairs(r);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace mbsc
