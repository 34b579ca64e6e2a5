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

// Study output bundle.
//
//   <dir>/config.txt               normalized study config
//   <dir>/manifest.json            order, log and model files, status
//   <dir>/logs/<Condition>.ndjson  trial logs
//   <dir>/models/<id>.koop         fitted and final online models
//   <dir>/report.json              summary
//   <dir>/tables/*.csv             success, success by trial, ergodicity,
//                                  agreement, h-step error
//   <dir>/heatmaps/*.pgm|csv       occupancy per condition and outcome
//   <dir>/telemetry.json           solver latency (wall clock, not reproducible)

#ifndef MBSC_REPORT_HPP
#define MBSC_REPORT_HPP

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mbsc/harness.hpp"
#include "mbsc/metrics.hpp"

namespace mbsc {

using NamedModel = std::pair<std::string, std::shared_ptr<const KoopmanModel>>;

SummaryOptions summary_options(const StudyConfig& config);

// Models in report order: individual-<s>, general, expert, online-<s>.
std::vector<NamedModel> named_models(const ModelSet& models,
                                     const std::vector<std::shared_ptr<const KoopmanModel>>& online);

// H-step error of each model over the held-out trajectories: the UserOnly
// trials when present, otherwise the first condition's trials.
std::vector<HStepTable> h_step_tables(const std::vector<NamedModel>& models,
                                      const std::vector<TrialRecord>& trials, int max_h);

StudyReport build_report(const std::vector<TrialRecord>& trials, const StudyConfig& config,
                         const std::vector<NamedModel>& models);

// Deterministic JSON text (fixed key order, shortest round-trip numbers).
std::string report_json(const StudyReport& report, const StudyConfig& config);

// Writes report.json, tables/ and heatmaps/ under `dir`.
void write_report(const std::string& dir, const StudyReport& report,
                  const std::vector<TrialRecord>& trials, const StudyConfig& config);

struct LoadedStudy {
  StudyConfig config;
  std::vector<TrialRecord> trials;
  std::vector<NamedModel> models;
};

// Reads config.txt, manifest.json, logs and models from a study directory.
LoadedStudy load_study(const std::string& dir);

// Recomputes the report from raw logs; writes it back when `write` is set.
StudyReport report_from_dir(const std::string& dir, bool write);

}  // namespace mbsc

#endif  // MBSC_REPORT_HPP
