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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mbsc/harness.hpp"
#include "mbsc/report.hpp"

namespace mbsc {
namespace {

namespace fs = std::filesystem;

StudyConfig small_config() {
  StudyConfig c;
  c.subjects = 2;
  c.trials = 4;
  c.online_trials = 5;
  c.demo_trials = 5;
  c.seed = 31;
  c.output_dir.clear();
  c.finalize();
  return c;
}

struct Fixture {
  StudyConfig config = small_config();
  ModelSet models;
  std::map<Condition, std::vector<TrialRecord>> trials;
  std::vector<std::shared_ptr<const KoopmanModel>> online;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.models = build_models(out.config);
    for (Condition c : out.config.conditions)
      out.trials[c] = run_condition(c, out.config, out.models, nullptr,
                                    c == Condition::kOnline ? &out.online : nullptr);
    return out;
  }();
  return f;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(Seeds, DerivedSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (auto stream : {SeedStream::kEvaluation, SeedStream::kIndividualDemos,
                      SeedStream::kGeneralDemos, SeedStream::kExpertDemos,
                      SeedStream::kOnlineInit, SeedStream::kPilotNoise, SeedStream::kOrder})
    for (std::uint64_t a = 0; a < 10; ++a)
      for (std::uint64_t b = 0; b < 10; ++b) seen.insert(derive_seed(7, stream, a, b));
  EXPECT_EQ(seen.size(), 700u);
  EXPECT_EQ(derive_seed(7, SeedStream::kEvaluation, 1, 2),
            derive_seed(7, SeedStream::kEvaluation, 1, 2));
  EXPECT_NE(derive_seed(7, SeedStream::kEvaluation, 1, 2),
            derive_seed(8, SeedStream::kEvaluation, 1, 2));
}

TEST(Harness, UserOnlyPassesHumanThrough) {
  for (const auto& t : fixture().trials.at(Condition::kUserOnly)) {
    EXPECT_EQ(t.model_id, "none");
    for (const auto& s : t.steps) {
      if (s.terminal) continue;
      EXPECT_EQ(s.u_out, s.u_h);
      EXPECT_TRUE(s.u_a.is_zero());
    }
  }
}

TEST(Harness, SharedLogsReplayThroughFilter) {
  const auto mode = fixture().config.filter;
  for (const auto& [cond, trials] : fixture().trials) {
    if (!is_shared(cond)) continue;
    for (const auto& t : trials)
      for (const auto& s : t.steps) {
        if (s.terminal) continue;
        const auto [out, rec] = mda_filter(s.u_h, s.u_a, mode);
        EXPECT_EQ(out, s.u_out);
        EXPECT_EQ(rec.admitted, s.admitted);
        EXPECT_EQ(rec.agree_main, s.agree_main);
        EXPECT_EQ(rec.agree_side, s.agree_side);
        // Never inject: output is the human command or nothing.
        EXPECT_TRUE(s.u_out == s.u_h || s.u_out.is_zero());
      }
  }
}

TEST(Harness, TrialsAreWellFormed) {
  const SimConfig& sim = fixture().config.sim;
  for (const auto& [cond, trials] : fixture().trials)
    for (const auto& t : trials) {
      ASSERT_FALSE(t.steps.empty());
      EXPECT_TRUE(t.steps.back().terminal);
      EXPECT_EQ(std::count_if(t.steps.begin(), t.steps.end(),
                              [](const StepRecord& s) { return s.terminal; }),
                1);
      EXPECT_TRUE(is_terminal(t.outcome));
      EXPECT_EQ(classify(t.steps.back().state, t.duration, sim), t.outcome);
      EXPECT_TRUE(t.fault.empty());
      for (std::size_t i = 0; i + 1 < t.steps.size(); ++i) {
        EXPECT_EQ(classify(t.steps[i].state, t.steps[i].time, sim), TrialStatus::kRunning);
        EXPECT_EQ(step(t.steps[i].state, t.steps[i].u_out, sim), t.steps[i + 1].state);
      }
    }
}

TEST(Harness, SeedsArePairedAcrossConditions) {
  const auto& f = fixture();
  const auto& base = f.trials.at(Condition::kUserOnly);
  for (Condition c : {Condition::kIndividual, Condition::kGeneral, Condition::kExpert}) {
    const auto& other = f.trials.at(c);
    ASSERT_EQ(other.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(other[i].seed, base[i].seed);
      EXPECT_EQ(other[i].steps.front().state, base[i].steps.front().state);
    }
  }
}

TEST(Harness, OnlineLearnsOnlyAdmittedSteps) {
  const auto& f = fixture();
  ASSERT_EQ(f.online.size(), 2u);
  for (int s = 0; s < 2; ++s) {
    std::int64_t admitted = 0;
    for (const auto& t : f.trials.at(Condition::kOnline))
      if (t.subject == s)
        for (const auto& st : t.steps) admitted += st.admitted;
    EXPECT_EQ(f.online[static_cast<std::size_t>(s)]->samples(), admitted);
  }
}

TEST(Harness, OnlineFirstCommandUsesUniformInit) {
  const auto& f = fixture();
  const TrialRecord& first = f.trials.at(Condition::kOnline).front();
  ASSERT_EQ(first.subject, 0);
  ASSERT_EQ(first.trial, 0);
  auto init = std::make_shared<const KoopmanModel>(KoopmanModel::random_init(
      f.config.basis, f.config.epsilon, derive_seed(f.config.seed, SeedStream::kOnlineInit, 0)));
  EXPECT_GE(init->k().minCoeff(), 0.0);
  EXPECT_LT(init->k().maxCoeff(), 1.0);
  AutonomyController ctrl = make_controller(init, f.config);
  EXPECT_EQ(ctrl.command(first.steps.front().state), first.steps.front().u_a);
}

TEST(Harness, ConditionsAreDeterministic) {
  const auto& f = fixture();
  for (Condition c : {Condition::kGeneral, Condition::kOnline})
    EXPECT_EQ(run_condition(c, f.config, f.models), f.trials.at(c));
}

TEST(Harness, ConditionOrderIsSeededPermutation) {
  StudyConfig c = small_config();
  const auto order = condition_order(c);
  EXPECT_TRUE(std::is_permutation(order.begin(), order.end(), c.conditions.begin()));
  EXPECT_EQ(condition_order(c), order);
  std::set<std::vector<Condition>> distinct;
  for (std::uint64_t s = 0; s < 20; ++s) {
    c.seed = s;
    distinct.insert(condition_order(c));
  }
  EXPECT_GT(distinct.size(), 1u);
}

TEST(Harness, DemonstrationPools) {
  const StudyConfig& c = fixture().config;
  EXPECT_TRUE(collect_demonstrations(c.expert, 0, c.sim, 1).empty());
  const auto& m = fixture().models;
  ASSERT_EQ(m.individual.size(), 2u);
  const double ratio = static_cast<double>(m.general->samples()) /
                       static_cast<double>(m.individual[0]->samples());
  EXPECT_GT(ratio, 2.0);
  EXPECT_LT(ratio, 4.5);
}

TEST(Harness, MissingModelIsModelFault) {
  const auto& f = fixture();
  try {
    run_condition(Condition::kExpert, f.config, ModelSet{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModel);
  }
}

TEST(Harness, RunnerAbortAndFaults) {
  const auto& f = fixture();
  TrialSetup setup;
  setup.seed = 5;
  setup.pilot_label = "human";
  TrialRunner runner(setup, f.config.sim, nullptr, FilterMode::kVector);
  runner.advance({0.6, 0.0});
  runner.abort("operator");
  EXPECT_TRUE(runner.done());
  EXPECT_EQ(runner.record().outcome, TrialStatus::kCrash);
  EXPECT_EQ(runner.record().fault, "operator");
  EXPECT_EQ(runner.record().pilot, "human");
  EXPECT_THROW(runner.advance({0, 0}), Error);
}

// --- full study bundle -------------------------------------------------------

TEST(Study, DefaultTrialCountsAndByteIdenticalRerun) {
  TempDir a("mbsc_study_a"), b("mbsc_study_b");
  StudyConfig c;
  c.seed = 5;
  c.output_dir = a.path.string();
  const StudyResult r = run_study(c);
  c.output_dir = b.path.string();
  run_study(c);

  std::map<Condition, int> counts;
  for (const auto& t : r.trials) ++counts[t.condition];
  EXPECT_EQ(counts[Condition::kUserOnly], 10);
  EXPECT_EQ(counts[Condition::kIndividual], 10);
  EXPECT_EQ(counts[Condition::kGeneral], 10);
  EXPECT_EQ(counts[Condition::kExpert], 10);
  EXPECT_EQ(counts[Condition::kOnline], 15);

  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file() || e.path().filename() == "telemetry.json") continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b.path / fs::relative(e.path(), a.path))) << e.path();
  }
  EXPECT_GT(files, 10);
  EXPECT_TRUE(fs::exists(a.path / "report.json"));
  EXPECT_TRUE(fs::exists(a.path / "logs" / "OnlineKoopman.ndjson"));

  const auto manifest = nlohmann::json::parse(slurp(a.path / "manifest.json"));
  EXPECT_EQ(manifest["status"], "complete");
  EXPECT_EQ(manifest["logs"].size(), 5u);
}

TEST(Study, ReportMatchesRecountOfRawLogs) {
  TempDir dir("mbsc_study_recount");
  StudyConfig c = small_config();
  c.output_dir = dir.path.string();
  run_study(c);
  const auto report = nlohmann::json::parse(slurp(dir.path / "report.json"));
  for (const auto& cs : report["conditions"]) {
    const std::string name = cs["condition"];
    int trials = 0, ok = 0;
    std::vector<int> by_trial;
    std::istringstream in(slurp(dir.path / "logs" / (name + ".ndjson")));
    std::string line;
    int current = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      if (j["type"] == "trial") current = j["trial"];
      if (j["type"] != "end") continue;
      ++trials;
      if (by_trial.size() <= static_cast<std::size_t>(current)) by_trial.resize(current + 1, 0);
      if (j["outcome"] == "Success") {
        ++ok;
        ++by_trial[static_cast<std::size_t>(current)];
      }
    }
    EXPECT_EQ(cs["trials"], trials) << name;
    EXPECT_EQ(cs["successes"], ok) << name;
    EXPECT_EQ(cs["success_by_trial"].get<std::vector<int>>(), by_trial) << name;
  }
  // Regenerating from the bundle reproduces the stored report.
  const std::string before = slurp(dir.path / "report.json");
  report_from_dir(dir.path.string(), true);
  EXPECT_EQ(slurp(dir.path / "report.json"), before);
}

TEST(Study, PartialFailureKeepsCompletedConditions) {
  TempDir dir("mbsc_study_partial");
  StudyConfig c = small_config();
  c.output_dir = dir.path.string();
  const auto order = condition_order(c);
  // Block the log file of the third condition.
  fs::create_directories(dir.path / "logs" / (std::string(to_string(order[2])) + ".ndjson"));
  EXPECT_THROW(run_study(c), Error);
  const auto manifest = nlohmann::json::parse(slurp(dir.path / "manifest.json"));
  EXPECT_EQ(manifest["status"], "failed");
  EXPECT_FALSE(manifest["error"].get<std::string>().empty());
  ASSERT_EQ(manifest["logs"].size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(manifest["logs"][i]["condition"], std::string(to_string(order[i])));
    const auto trials =
        read_trials_file((dir.path / manifest["logs"][i]["file"].get<std::string>()).string());
    EXPECT_EQ(static_cast<int>(trials.size()), manifest["logs"][i]["trials"].get<int>());
  }
  EXPECT_FALSE(fs::exists(dir.path / "report.json"));
}

}  // namespace
}  // namespace mbsc
