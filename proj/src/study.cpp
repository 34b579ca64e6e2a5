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

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mbsc/config.hpp"
#include "mbsc/report.hpp"

namespace mbsc {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ojson mean_sd_json(const MeanSd& m) { return ojson{{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}}; }

std::string log_name(Condition c) { return "logs/" + std::string(to_string(c)) + ".ndjson"; }

}  // namespace

SummaryOptions summary_options(const StudyConfig& config) {
  SummaryOptions o;
  o.domain = {config.sim.world_x_min, config.sim.world_x_max, 0.0, config.sim.world_y_max};
  o.goal = {config.sim.goal_x, config.sim.goal_y};
  o.ergodic_sigma = config.ergodic_sigma;
  o.ergodic_kmax = config.ergodic_kmax;
  return o;
}

std::vector<NamedModel> named_models(
    const ModelSet& models, const std::vector<std::shared_ptr<const KoopmanModel>>& online) {
  std::vector<NamedModel> out;
  for (std::size_t s = 0; s < models.individual.size(); ++s)
    out.emplace_back("individual-" + std::to_string(s), models.individual[s]);
  if (models.general) out.emplace_back("general", models.general);
  if (models.expert) out.emplace_back("expert", models.expert);
  for (std::size_t s = 0; s < online.size(); ++s)
    out.emplace_back("online-" + std::to_string(s), online[s]);
  return out;
}

std::vector<HStepTable> h_step_tables(const std::vector<NamedModel>& models,
                                      const std::vector<TrialRecord>& trials, int max_h) {
  std::vector<HStepTable> out;
  if (trials.empty()) return out;
  Condition held_out = trials.front().condition;
  for (const auto& t : trials)
    if (t.condition == Condition::kUserOnly) held_out = Condition::kUserOnly;
  std::vector<std::vector<SnapshotPair>> trajectories;
  for (const auto& t : trials)
    if (t.condition == held_out) trajectories.push_back(snapshot_pairs(t));
  for (const auto& [id, model] : models) {
    if (!model || !model->has_operator()) continue;
    out.push_back({id, std::string(to_string(model->basis().kind())),
                   h_step_error(*model, trajectories, max_h)});
  }
  return out;
}

StudyReport build_report(const std::vector<TrialRecord>& trials, const StudyConfig& config,
                         const std::vector<NamedModel>& models) {
  StudyReport report = summarize(trials, summary_options(config));
  report.h_step = h_step_tables(models, trials, config.h_step_max);
  return report;
}

std::string report_json(const StudyReport& report, const StudyConfig& config) {
  ojson j;
  j["schema_version"] = kLogSchemaVersion;
  j["seed"] = config.seed;
  j["basis"] = std::string(to_string(config.basis));
  j["solver"] = std::string(to_string(config.solver));
  j["filter"] = std::string(to_string(config.filter));
  j["subjects"] = config.subjects;
  ojson conds = ojson::array();
  for (const auto& c : report.conditions) {
    ojson e;
    e["condition"] = std::string(to_string(c.condition));
    e["trials"] = c.trials;
    e["successes"] = c.successes;
    e["success_rate"] = c.success_rate;
    ojson outcomes = ojson::object();
    for (const auto& [k, v] : c.outcomes) outcomes[k] = v;
    e["outcomes"] = outcomes;
    e["success_by_trial"] = c.success_by_trial;
    e["trials_by_trial"] = c.trials_by_trial;
    e["ergodicity"] = {{"all", mean_sd_json(c.ergodic_all)},
                       {"success", mean_sd_json(c.ergodic_success)},
                       {"failure", mean_sd_json(c.ergodic_failure)}};
    e["agreement"] = {{"main", c.agree_main}, {"side", c.agree_side}};
    e["admitted_fraction"] = c.admitted_fraction;
    e["mean_duration"] = c.mean_duration;
    e["steps"] = c.steps;
    e["faults"] = c.faults;
    conds.push_back(e);
  }
  j["conditions"] = conds;
  ojson hs = ojson::array();
  for (const auto& t : report.h_step)
    hs.push_back({{"model", t.model_id},
                  {"basis", t.basis},
                  {"mean", t.stats.mean},
                  {"variance", t.stats.variance},
                  {"count", t.stats.count}});
  j["h_step"] = hs;
  return j.dump(2) + "\n";
}

void write_report(const std::string& dir, const StudyReport& report,
                  const std::vector<TrialRecord>& trials, const StudyConfig& config) {
  const fs::path root(dir);
  fs::create_directories(root / "tables");
  fs::create_directories(root / "heatmaps");
  write_text(root / "report.json", report_json(report, config));

  std::string success = "condition,trials,successes,success_rate,Success,Crash,OutOfBounds,Timeout\n";
  std::string by_trial = "condition,trial,trials,successes,success_rate\n";
  std::string agreement = "condition,agree_main,agree_side,admitted_fraction\n";
  for (const auto& c : report.conditions) {
    const std::string name(to_string(c.condition));
    auto outcome = [&](const char* k) {
      const auto it = c.outcomes.find(k);
      return std::to_string(it == c.outcomes.end() ? 0 : it->second);
    };
    success += name + "," + std::to_string(c.trials) + "," + std::to_string(c.successes) + "," +
               num(c.success_rate) + "," + outcome("Success") + "," + outcome("Crash") + "," +
               outcome("OutOfBounds") + "," + outcome("Timeout") + "\n";
    for (std::size_t i = 0; i < c.success_by_trial.size(); ++i) {
      const int n = c.trials_by_trial[i];
      by_trial += name + "," + std::to_string(i + 1) + "," + std::to_string(n) + "," +
                  std::to_string(c.success_by_trial[i]) + "," +
                  num(n ? static_cast<double>(c.success_by_trial[i]) / n : 0.0) + "\n";
    }
    agreement += name + "," + num(c.agree_main) + "," + num(c.agree_side) + "," +
                 num(c.admitted_fraction) + "\n";
  }
  std::string ergodic = "condition,subject,trial,seed,outcome,ergodicity\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    ergodic += std::string(to_string(t.condition)) + "," + std::to_string(t.subject) + "," +
               std::to_string(t.trial + 1) + "," + std::to_string(t.seed) + "," +
               std::string(to_string(t.outcome)) + "," + num(report.trial_ergodicity[i]) + "\n";
  }
  std::string hstep = "model,basis,h,mean,variance,count\n";
  for (const auto& t : report.h_step)
    for (std::size_t h = 0; h < t.stats.mean.size(); ++h)
      hstep += t.model_id + "," + t.basis + "," + std::to_string(h + 1) + "," +
               num(t.stats.mean[h]) + "," + num(t.stats.variance[h]) + "," +
               std::to_string(t.stats.count[h]) + "\n";
  write_text(root / "tables" / "success.csv", success);
  write_text(root / "tables" / "success_by_trial.csv", by_trial);
  write_text(root / "tables" / "agreement.csv", agreement);
  write_text(root / "tables" / "ergodicity.csv", ergodic);
  write_text(root / "tables" / "h_step.csv", hstep);

  const SummaryOptions opts = summary_options(config);
  for (const auto& c : report.conditions) {
    OccupancyGrid all(opts.domain, config.heatmap_grid);
    OccupancyGrid ok(opts.domain, config.heatmap_grid);
    OccupancyGrid bad(opts.domain, config.heatmap_grid);
    for (const auto& t : trials) {
      if (t.condition != c.condition) continue;
      const auto pts = positions(t);
      all.add(pts);
      (t.outcome == TrialStatus::kSuccess ? ok : bad).add(pts);
    }
    const std::string base = std::string(to_string(c.condition));
    for (const auto& [suffix, grid] :
         {std::pair<const char*, const OccupancyGrid*>{"all", &all}, {"success", &ok},
          {"failure", &bad}}) {
      write_text(root / "heatmaps" / (base + "_" + suffix + ".pgm"), grid->to_pgm());
      write_text(root / "heatmaps" / (base + "_" + suffix + ".csv"), grid->to_csv());
    }
  }
}

namespace {

struct ManifestWriter {
  fs::path root;
  ojson j;

  void flush() const { write_text(root / "manifest.json", j.dump(2) + "\n"); }
};

}  // namespace

StudyResult run_study(const StudyConfig& config_in) {
  StudyConfig config = config_in;
  config.finalize();
  StudyResult result;
  result.order = condition_order(config);
  const bool write = !config.output_dir.empty();

  ManifestWriter manifest;
  if (write) {
    manifest.root = config.output_dir;
    fs::create_directories(manifest.root / "logs");
    fs::create_directories(manifest.root / "models");
    StudyConfig stored = config;
    stored.output_dir.clear();
    write_text(manifest.root / "config.txt", serialize_study_config(stored));
    manifest.j["schema_version"] = kLogSchemaVersion;
    manifest.j["seed"] = config.seed;
    ojson order = ojson::array();
    for (Condition c : result.order) order.push_back(std::string(to_string(c)));
    manifest.j["order"] = order;
    manifest.j["status"] = "running";
    manifest.j["logs"] = ojson::array();
    manifest.j["models"] = ojson::array();
    manifest.flush();
  }

  auto save_models = [&](const std::vector<NamedModel>& models) {
    if (!write) return;
    for (const auto& [id, model] : models) {
      const std::string file = "models/" + id + ".koop";
      model->save_file((manifest.root / file).string());
      manifest.j["models"].push_back({{"id", id}, {"file", file}});
    }
    manifest.flush();
  };

  try {
    result.models = build_models(config);
    save_models(named_models(result.models, {}));
    for (Condition c : result.order) {
      TrialTelemetry tel;
      auto trials = run_condition(c, config, result.models, &tel, &result.online_models);
      if (write) {
        std::ostringstream os;
        for (const auto& t : trials) write_trial(os, t);
        write_text(manifest.root / log_name(c), os.str());
        manifest.j["logs"].push_back({{"condition", std::string(to_string(c))},
                                      {"file", log_name(c)},
                                      {"trials", trials.size()}});
        manifest.flush();
      }
      result.trials.insert(result.trials.end(), trials.begin(), trials.end());
      result.telemetry.push_back(std::move(tel));
    }
    save_models(named_models({}, result.online_models));

    if (write) {
      const auto models = named_models(result.models, result.online_models);
      write_report(config.output_dir, build_report(result.trials, config, models), result.trials,
                   config);
      ojson tel = ojson::array();
      for (std::size_t i = 0; i < result.order.size(); ++i) {
        const auto& lat = result.telemetry[i].latency_ms;
        double sum = 0.0, peak = 0.0;
        for (double v : lat) {
          sum += v;
          peak = std::max(peak, v);
        }
        tel.push_back({{"condition", std::string(to_string(result.order[i]))},
                       {"calls", lat.size()},
                       {"mean_latency_ms", lat.empty() ? 0.0 : sum / static_cast<double>(lat.size())},
                       {"max_latency_ms", peak},
                       {"solver_faults", result.telemetry[i].solver_faults}});
      }
      write_text(manifest.root / "telemetry.json", tel.dump(2) + "\n");
      manifest.j["status"] = "complete";
      manifest.flush();
    }
  } catch (const std::exception& e) {
    if (write) {
      manifest.j["status"] = "failed";
      manifest.j["error"] = e.what();
      manifest.flush();
    }
    throw;
  }
  return result;
}

LoadedStudy load_study(const std::string& dir) {
  const fs::path root(dir);
  LoadedStudy out;
  out.config = parse_study_config(read_text(root / "config.txt"));
  out.config.output_dir = dir;
  ojson manifest;
  try {
    manifest = ojson::parse(read_text(root / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed manifest: ") + e.what());
  }
  for (const auto& entry : manifest.value("logs", ojson::array())) {
    auto trials = read_trials_file((root / entry.at("file").get<std::string>()).string());
    out.trials.insert(out.trials.end(), trials.begin(), trials.end());
  }
  for (const auto& entry : manifest.value("models", ojson::array()))
    out.models.emplace_back(
        entry.at("id").get<std::string>(),
        std::make_shared<const KoopmanModel>(
            KoopmanModel::load_file((root / entry.at("file").get<std::string>()).string())));
  return out;
}

StudyReport report_from_dir(const std::string& dir, bool write) {
  const LoadedStudy study = load_study(dir);
  StudyReport report = build_report(study.trials, study.config, study.models);
  if (write) write_report(dir, report, study.trials, study.config);
  return report;
}

}  // namespace mbsc
