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

// Experiment orchestration: trials, demonstrations, model provenance and
// whole studies.

#ifndef MBSC_HARNESS_HPP
#define MBSC_HARNESS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbsc/allocation.hpp"
#include "mbsc/koopman.hpp"
#include "mbsc/lander.hpp"
#include "mbsc/pilots.hpp"
#include "mbsc/policy.hpp"
#include "mbsc/trial_log.hpp"

namespace mbsc {

// Independent seed streams derived from the study seed.
enum class SeedStream : std::uint64_t {
  kEvaluation = 1,
  kIndividualDemos = 2,
  kGeneralDemos = 3,
  kExpertDemos = 4,
  kOnlineInit = 5,
  kPilotNoise = 6,
  kOrder = 7,
};

std::uint64_t derive_seed(std::uint64_t base, SeedStream stream, std::uint64_t a = 0,
                          std::uint64_t b = 0);

struct StudyConfig {
  std::vector<Condition> conditions{Condition::kUserOnly, Condition::kIndividual,
                                    Condition::kGeneral, Condition::kExpert, Condition::kOnline};
  int subjects = 1;
  int trials = 10;
  int online_trials = 15;
  int demo_trials = 10;
  int general_pilots = 3;
  BasisKind basis = BasisKind::kNonlinear;
  SolverKind solver = SolverKind::kSac;
  FilterMode filter = FilterMode::kVector;
  double epsilon = KoopmanModel::kDefaultEpsilon;
  std::uint64_t seed = 1;
  std::string output_dir = "study_out";

  SimConfig sim;
  PilotConfig novice = PilotConfig::novice();
  PilotConfig expert = PilotConfig::expert();
  CostWeights weights;  // goal overwritten from sim
  MpcParams mpc;

  // Optional pre-fitted models; when empty the harness collects demos.
  std::string individual_model;
  std::string general_model;
  std::string expert_model;

  int heatmap_grid = 40;
  int h_step_max = 30;
  double ergodic_sigma = 1.0;
  int ergodic_kmax = 10;

  // Fills defaults that depend on other fields and checks invariants.
  void finalize();
};

// Pilot seeded for one (subject, trial).
PilotConfig pilot_for(const PilotConfig& base, std::uint64_t trial_seed);

struct TrialSetup {
  Condition condition = Condition::kUserOnly;
  int subject = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  PilotConfig pilot;
  std::string model_id;
  std::string pilot_label;  // overrides the pilot kind in the record
};

struct TrialTelemetry {
  std::vector<double> latency_ms;
  int solver_faults = 0;
};

// Step-at-a-time trial driver shared by scripted runs and live sessions.
// Each tick: finish_if_terminal(), then advance() with the human command.
class TrialRunner {
 public:
  TrialRunner(const TrialSetup& setup, const SimConfig& sim, AutonomyController* controller,
              FilterMode mode, OnlineLearner* learner = nullptr,
              TrialTelemetry* telemetry = nullptr);

  bool done() const { return done_; }
  const LanderState& state() const { return state_; }
  double time() const;

  // Classifies the current state; on a terminal status appends the terminal
  // step, finishes the record and returns true.
  bool finish_if_terminal();
  // One log step with the human command. Requires !done().
  const StepRecord& advance(const ControlInput& u_h);
  // Ends the trial early as a fault (outcome Crash, `reason` in fault).
  void abort(const std::string& reason);

  const TrialRecord& record() const { return record_; }

 private:
  void learn(const LanderState& next, const ControlInput& next_u);

  SimConfig sim_;
  AutonomyController* controller_;
  FilterMode mode_;
  OnlineLearner* learner_;
  TrialTelemetry* telemetry_;
  TrialRecord record_;
  LanderState state_;
  std::int64_t k_ = 0;
  bool done_ = false;
  std::optional<std::pair<LanderState, ControlInput>> pending_;
};

// One trial: reset, then {pilot, autonomy + filter, learner, step, classify}
// until terminal. `controller` null means user-only. `learner` non-null
// updates on admitted steps and republishes to the controller.
TrialRecord run_trial(const TrialSetup& setup, const SimConfig& sim,
                      AutonomyController* controller, FilterMode mode,
                      OnlineLearner* learner = nullptr, TrialTelemetry* telemetry = nullptr);

// User-only demonstrations.
std::vector<TrialRecord> collect_demonstrations(const PilotConfig& pilot, int n_trials,
                                                const SimConfig& sim, std::uint64_t seed,
                                                int subject = 0);

struct ModelSet {
  std::vector<std::shared_ptr<const KoopmanModel>> individual;  // per subject
  std::shared_ptr<const KoopmanModel> general;
  std::shared_ptr<const KoopmanModel> expert;
};

ModelSet build_models(const StudyConfig& config);

AutonomyController make_controller(std::shared_ptr<const KoopmanModel> model,
                                   const StudyConfig& config);

// Every trial of one condition across subjects. For the Online condition the
// learner's final model per subject is appended to `online_models`.
std::vector<TrialRecord> run_condition(
    Condition condition, const StudyConfig& config, const ModelSet& models,
    TrialTelemetry* telemetry = nullptr,
    std::vector<std::shared_ptr<const KoopmanModel>>* online_models = nullptr);

// Condition order for a study, shuffled from the seed.
std::vector<Condition> condition_order(const StudyConfig& config);

struct StudyResult {
  std::vector<TrialRecord> trials;  // in execution order
  std::vector<Condition> order;
  ModelSet models;
  std::vector<std::shared_ptr<const KoopmanModel>> online_models;
  std::vector<TrialTelemetry> telemetry;  // parallel to `order`
};

// Runs every configured condition and writes logs, models, report, tables
// and heatmaps under config.output_dir (see report.hpp). With an empty
// output_dir nothing is written.
StudyResult run_study(const StudyConfig& config);

}  // namespace mbsc

#endif  // MBSC_HARNESS_HPP
