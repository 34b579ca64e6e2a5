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

#include "mbsc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mbsc {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, SeedStream stream, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t h = splitmix(base);
  h = splitmix(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix(h ^ a);
  return splitmix(h ^ (b + 0x632be59bd9b4e019ULL));
}

void StudyConfig::finalize() {
  sim.validate();
  novice.validate();
  expert.validate();
  weights.goal = sim.goal_state().vec();
  weights.validate();
  mpc.solver = solver;
  mpc.dt = sim.dt_log;
  mpc.validate();
  if (conditions.empty()) throw Error(ErrorCode::kConfig, "no conditions configured");
  if (subjects < 1) throw Error(ErrorCode::kConfig, "subjects must be >= 1");
  if (trials < 0 || online_trials < 0) throw Error(ErrorCode::kConfig, "trial counts must be >= 0");
  if (demo_trials < 1) throw Error(ErrorCode::kConfig, "demo_trials must be >= 1");
  if (general_pilots < 1) throw Error(ErrorCode::kConfig, "general_pilots must be >= 1");
  if (!(epsilon >= 0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::kConfig, "epsilon must be a finite value >= 0");
  if (heatmap_grid < 2) throw Error(ErrorCode::kConfig, "heatmap_grid must be >= 2");
  if (h_step_max < 1) throw Error(ErrorCode::kConfig, "h_step_max must be >= 1");
  if (!(ergodic_sigma > 0) || ergodic_kmax < 1)
    throw Error(ErrorCode::kConfig, "ergodic parameters out of range");
}

PilotConfig pilot_for(const PilotConfig& base, std::uint64_t trial_seed) {
  PilotConfig p = base;
  p.seed = derive_seed(trial_seed, SeedStream::kPilotNoise);
  return p;
}

TrialRunner::TrialRunner(const TrialSetup& setup, const SimConfig& sim,
                         AutonomyController* controller, FilterMode mode, OnlineLearner* learner,
                         TrialTelemetry* telemetry)
    : sim_(sim),
      controller_(controller),
      mode_(mode),
      learner_(learner),
      telemetry_(telemetry) {
  record_.condition = setup.condition;
  record_.subject = setup.subject;
  record_.trial = setup.trial;
  record_.seed = setup.seed;
  record_.pilot =
      setup.pilot_label.empty() ? std::string(to_string(setup.pilot.kind)) : setup.pilot_label;
  record_.model_id = setup.model_id;
  Rng rng(setup.seed);
  state_ = reset(sim_, rng);
}

double TrialRunner::time() const { return static_cast<double>(k_) * sim_.dt_log; }

// Admitted (state, control) pairs wait here for their successor snapshot.
void TrialRunner::learn(const LanderState& next, const ControlInput& next_u) {
  if (!learner_ || !pending_) return;
  learner_->observe({pending_->first, pending_->second, next, next_u});
  if (controller_) controller_->set_model(learner_->snapshot());
  pending_.reset();
}

bool TrialRunner::finish_if_terminal() {
  if (done_) return true;
  const double t = time();
  const TrialStatus status = classify(state_, t, sim_);
  if (!is_terminal(status)) return false;
  StepRecord last;
  last.time = t;
  last.state = state_;
  last.terminal = true;
  record_.steps.push_back(last);
  learn(state_, ControlInput{});
  record_.outcome = status;
  record_.duration = t;
  done_ = true;
  return true;
}

const StepRecord& TrialRunner::advance(const ControlInput& u_h) {
  if (done_) throw Error(ErrorCode::kRuntime, "trial already finished");
  const double t = time();
  StepRecord st;
  st.time = t;
  st.state = state_;
  st.u_h = u_h;
  if (controller_) {
    CommandTelemetry tel;
    try {
      st.u_a = controller_->command(state_, &tel);
      st.descent = tel.descent;
    } catch (const Error&) {
      st.u_a = {};
      if (telemetry_) ++telemetry_->solver_faults;
    }
    if (telemetry_) telemetry_->latency_ms.push_back(tel.latency_ms);
    const auto [u_out, alloc] = mda_filter(st.u_h, st.u_a, mode_, t);
    st.u_out = u_out;
    st.admitted = alloc.admitted;
    st.agree_main = alloc.agree_main;
    st.agree_side = alloc.agree_side;
  } else {
    st.u_out = st.u_h;
    st.admitted = !st.u_h.is_zero();
  }
  learn(state_, st.u_out);
  if (st.admitted) pending_.emplace(state_, st.u_out);
  record_.steps.push_back(st);

  try {
    state_ = step(state_, st.u_out, sim_);
    ++k_;
  } catch (const Error& e) {
    record_.fault = e.what();
    record_.outcome = TrialStatus::kCrash;
    record_.duration = t;
    done_ = true;
  }
  return record_.steps.back();
}

void TrialRunner::abort(const std::string& reason) {
  if (done_) return;
  record_.fault = reason;
  record_.outcome = TrialStatus::kCrash;
  record_.duration = time();
  done_ = true;
}

TrialRecord run_trial(const TrialSetup& setup, const SimConfig& sim,
                      AutonomyController* controller, FilterMode mode, OnlineLearner* learner,
                      TrialTelemetry* telemetry) {
  TrialRunner runner(setup, sim, controller, mode, learner, telemetry);
  Pilot pilot(setup.pilot, sim.goal_state(), sim);
  while (!runner.finish_if_terminal()) {
    runner.advance(pilot.command(runner.state()));
    if (runner.done()) break;
  }
  return runner.record();
}

std::vector<TrialRecord> collect_demonstrations(const PilotConfig& pilot, int n_trials,
                                                const SimConfig& sim, std::uint64_t seed,
                                                int subject) {
  std::vector<TrialRecord> out;
  for (int i = 0; i < n_trials; ++i) {
    TrialSetup setup;
    setup.condition = Condition::kUserOnly;
    setup.subject = subject;
    setup.trial = i;
    setup.seed = derive_seed(seed, SeedStream::kEvaluation, static_cast<std::uint64_t>(subject),
                             static_cast<std::uint64_t>(i));
    setup.pilot = pilot_for(pilot, setup.seed);
    setup.model_id = "none";
    out.push_back(run_trial(setup, sim, nullptr, FilterMode::kVector));
  }
  return out;
}

namespace {

std::shared_ptr<const KoopmanModel> fit_demos(const std::vector<TrialRecord>& demos,
                                              const StudyConfig& config) {
  const auto pairs = snapshot_pairs(demos);
  if (pairs.empty()) throw Error(ErrorCode::kModel, "demonstrations produced no snapshot pairs");
  return std::make_shared<const KoopmanModel>(fit(pairs, config.basis, config.epsilon));
}

std::shared_ptr<const KoopmanModel> load_model(const std::string& path, const StudyConfig& config) {
  auto m = std::make_shared<const KoopmanModel>(KoopmanModel::load_file(path));
  if (m->basis().kind() != config.basis)
    throw Error(ErrorCode::kModel, "model " + path + " uses a different basis than the study");
  if (!m->has_operator()) throw Error(ErrorCode::kModel, "model " + path + " is not fitted");
  return m;
}

bool wants(const StudyConfig& c, Condition cond) {
  return std::find(c.conditions.begin(), c.conditions.end(), cond) != c.conditions.end();
}

}  // namespace

ModelSet build_models(const StudyConfig& config) {
  ModelSet models;
  if (wants(config, Condition::kIndividual)) {
    for (int s = 0; s < config.subjects; ++s) {
      if (!config.individual_model.empty()) {
        models.individual.push_back(load_model(config.individual_model, config));
        continue;
      }
      const auto demos = collect_demonstrations(
          config.novice, config.demo_trials, config.sim,
          derive_seed(config.seed, SeedStream::kIndividualDemos), s);
      models.individual.push_back(fit_demos(demos, config));
    }
  }
  if (wants(config, Condition::kGeneral)) {
    if (!config.general_model.empty()) {
      models.general = load_model(config.general_model, config);
    } else {
      std::vector<TrialRecord> pooled;
      for (int p = 0; p < config.general_pilots; ++p) {
        auto demos = collect_demonstrations(config.novice, config.demo_trials, config.sim,
                                            derive_seed(config.seed, SeedStream::kGeneralDemos),
                                            1000 + p);
        pooled.insert(pooled.end(), demos.begin(), demos.end());
      }
      models.general = fit_demos(pooled, config);
    }
  }
  if (wants(config, Condition::kExpert)) {
    if (!config.expert_model.empty()) {
      models.expert = load_model(config.expert_model, config);
    } else {
      const auto demos = collect_demonstrations(config.expert, config.demo_trials, config.sim,
                                                derive_seed(config.seed, SeedStream::kExpertDemos),
                                                2000);
      models.expert = fit_demos(demos, config);
    }
  }
  return models;
}

AutonomyController make_controller(std::shared_ptr<const KoopmanModel> model,
                                   const StudyConfig& config) {
  return AutonomyController(std::move(model), config.weights, config.mpc);
}

std::vector<TrialRecord> run_condition(
    Condition condition, const StudyConfig& config, const ModelSet& models,
    TrialTelemetry* telemetry, std::vector<std::shared_ptr<const KoopmanModel>>* online_models) {
  std::vector<TrialRecord> out;
  for (int s = 0; s < config.subjects; ++s) {
    std::optional<AutonomyController> controller;
    std::optional<OnlineLearner> learner;
    std::string model_id = "none";
    switch (condition) {
      case Condition::kUserOnly:
        break;
      case Condition::kIndividual:
        if (models.individual.size() <= static_cast<std::size_t>(s))
          throw Error(ErrorCode::kModel, "missing individual model for subject " + std::to_string(s));
        controller.emplace(make_controller(models.individual[s], config));
        model_id = "individual-" + std::to_string(s);
        break;
      case Condition::kGeneral:
        if (!models.general) throw Error(ErrorCode::kModel, "missing general model");
        controller.emplace(make_controller(models.general, config));
        model_id = "general";
        break;
      case Condition::kExpert:
        if (!models.expert) throw Error(ErrorCode::kModel, "missing expert model");
        controller.emplace(make_controller(models.expert, config));
        model_id = "expert";
        break;
      case Condition::kOnline: {
        learner.emplace(KoopmanModel::random_init(
            config.basis, config.epsilon,
            derive_seed(config.seed, SeedStream::kOnlineInit, static_cast<std::uint64_t>(s))));
        controller.emplace(make_controller(learner->snapshot(), config));
        model_id = "online-" + std::to_string(s);
        break;
      }
    }
    const int n = condition == Condition::kOnline ? config.online_trials : config.trials;
    for (int i = 0; i < n; ++i) {
      TrialSetup setup;
      setup.condition = condition;
      setup.subject = s;
      setup.trial = i;
      setup.seed = derive_seed(config.seed, SeedStream::kEvaluation, static_cast<std::uint64_t>(s),
                               static_cast<std::uint64_t>(i));
      setup.pilot = pilot_for(config.novice, setup.seed);
      setup.model_id = model_id;
      out.push_back(run_trial(setup, config.sim, controller ? &*controller : nullptr,
                              config.filter, learner ? &*learner : nullptr, telemetry));
    }
    if (learner && online_models) online_models->push_back(learner->snapshot());
  }
  return out;
}

std::vector<Condition> condition_order(const StudyConfig& config) {
  std::vector<Condition> order = config.conditions;
  Rng rng(derive_seed(config.seed, SeedStream::kOrder));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

}  // namespace mbsc
