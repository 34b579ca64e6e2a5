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

// Command-line front end. Talks to the toolkit only through the C API.
//
// Exit codes: 0 ok, 2 usage, 3 configuration, 4 model, 5 runtime/io.

#include <csignal>
#include <cstdio>
#include <ctime>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbsc/mbsc.h"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitModel = 4;
constexpr int kExitRuntime = 5;

int exit_code(mbsc_status s) {
  switch (s) {
    case MBSC_OK: return 0;
    case MBSC_E_INVALID_ARGUMENT:
    case MBSC_E_CONFIG: return kExitConfig;
    case MBSC_E_MODEL:
    case MBSC_E_NOT_FITTED: return kExitModel;
    default: return kExitRuntime;
  }
}

struct Failure {
  int code;
};

void check(mbsc_status s, const char* what) {
  if (s == MBSC_OK) return;
  std::fprintf(stderr, "mbsc: %s: %s (%s)\n", what, mbsc_last_error(), mbsc_status_string(s));
  throw Failure{exit_code(s)};
}

struct StudyHandle {
  mbsc_study* p = nullptr;
  ~StudyHandle() { mbsc_study_destroy(p); }
};

// Loads the config (or defaults) and applies --set key=value overrides.
void load_study(StudyHandle& h, const std::string& path, const std::vector<std::string>& sets) {
  if (path.empty())
    check(mbsc_study_create(&h.p), "defaults");
  else
    check(mbsc_study_load(path.c_str(), &h.p), "config");
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "mbsc: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{kExitConfig};
    }
    check(mbsc_study_set(h.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()),
          ("--set " + kv).c_str());
  }
}

std::string fetch(mbsc_status (*f)(const char*, char*, size_t, size_t*), const char* arg,
                  const char* what) {
  size_t needed = 0;
  check(f(arg, nullptr, 0, &needed), what);
  std::string out(needed, '\0');
  check(f(arg, out.data(), out.size(), &needed), what);
  out.resize(needed ? needed - 1 : 0);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-control lander toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mbsc_version()));

  std::string config_path;
  std::vector<std::string> sets;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "study config file (key = value)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override a config key, key=value (repeatable)");
  };

  auto* collect = app.add_subcommand("collect", "record user-only demonstrations with a scripted pilot");
  add_config(collect);
  std::string pilot = "expert";
  int trials = 10;
  std::uint64_t collect_seed = 1;
  std::string collect_out;
  collect->add_option("--pilot", pilot, "expert or novice")
      ->check(CLI::IsMember({"expert", "novice"}));
  collect->add_option("-n,--trials", trials, "number of trials")->check(CLI::NonNegativeNumber);
  collect->add_option("--seed", collect_seed, "seed for the demonstration trials");
  collect->add_option("-o,--out", collect_out, "output log (.ndjson)")->required();

  auto* fit = app.add_subcommand("fit", "fit a Koopman model from trial logs");
  std::vector<std::string> logs;
  std::string basis = "nonlinear";
  double epsilon = 1e-6;
  std::string model_out;
  fit->add_option("logs", logs, "trial logs")->required()->check(CLI::ExistingFile);
  fit->add_option("--basis", basis, "linear or nonlinear")
      ->check(CLI::IsMember({"linear", "nonlinear"}));
  fit->add_option("--epsilon", epsilon, "Gram matrix regularization")->check(CLI::NonNegativeNumber);
  fit->add_option("-o,--out", model_out, "output model file")->required();

  auto* run = app.add_subcommand("run", "run a study and write logs, models and report");
  add_config(run);
  std::string run_out;
  std::vector<std::string> conditions;
  std::string run_seed;
  run->add_option("-o,--out", run_out, "output directory (overrides output_dir)");
  run->add_option("--condition", conditions, "restrict to conditions (repeatable)");
  run->add_option("--seed", run_seed, "study seed");

  auto* report = app.add_subcommand("report", "recompute the report from a study directory");
  std::string report_dir;
  bool quiet = false;
  report->add_option("dir", report_dir, "study output directory")->required()->check(CLI::ExistingDirectory);
  report->add_flag("-q,--quiet", quiet, "do not print the report");

  auto* serve = app.add_subcommand("serve", "run the live cockpit endpoint");
  add_config(serve);
  std::string host = "127.0.0.1";
  int port = 8765;
  int tick_ms = 100;
  std::string log_dir = "sessions";
  double duration = 0.0;
  serve->add_option("--host", host, "listen address");
  serve->add_option("-p,--port", port, "listen port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--tick-ms", tick_ms, "loop period in milliseconds")->check(CLI::PositiveNumber);
  serve->add_option("--log-dir", log_dir, "directory for session logs ('' disables)");
  serve->add_option("--duration", duration, "stop after this many seconds (0 = until signalled)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*collect) {
      StudyHandle study;
      load_study(study, config_path, sets);
      size_t pairs = 0;
      check(mbsc_collect(study.p, pilot.c_str(), trials, collect_seed, collect_out.c_str(), &pairs),
            "collect");
      std::printf("wrote %d %s trials (%zu snapshot pairs) to %s\n", trials, pilot.c_str(), pairs,
                  collect_out.c_str());
    } else if (*fit) {
      std::vector<const char*> paths;
      for (const auto& l : logs) paths.push_back(l.c_str());
      mbsc_model* model = nullptr;
      check(mbsc_fit_logs(paths.data(), paths.size(), basis.c_str(), epsilon, &model), "fit");
      int dim = 0;
      int64_t samples = 0;
      const mbsc_status info = mbsc_model_info(model, &dim, nullptr, &samples);
      const mbsc_status saved = mbsc_model_save(model, model_out.c_str());
      mbsc_model_destroy(model);
      check(info, "model info");
      check(saved, "save model");
      std::printf("fitted %s model (dim %d, %lld pairs) -> %s\n", basis.c_str(), dim,
                  static_cast<long long>(samples), model_out.c_str());
    } else if (*run) {
      StudyHandle study;
      load_study(study, config_path, sets);
      if (!run_out.empty()) check(mbsc_study_set(study.p, "output_dir", run_out.c_str()), "--out");
      if (!run_seed.empty()) check(mbsc_study_set(study.p, "seed", run_seed.c_str()), "--seed");
      if (!conditions.empty()) {
        std::string joined;
        for (const auto& c : conditions) joined += (joined.empty() ? "" : ",") + c;
        check(mbsc_study_set(study.p, "conditions", joined.c_str()), "--condition");
      }
      check(mbsc_run_study(study.p), "run");
      size_t needed = 0;
      check(mbsc_study_serialize(study.p, nullptr, 0, &needed), "config");
      std::string text(needed, '\0');
      check(mbsc_study_serialize(study.p, text.data(), text.size(), &needed), "config");
      const auto at = text.find("output_dir = ");
      const auto dir = text.substr(at + 13, text.find('\n', at) - at - 13);
      std::printf("study written to %s\n", dir.c_str());
    } else if (*report) {
      const std::string json = fetch(mbsc_report, report_dir.c_str(), "report");
      if (!quiet) std::fputs(json.c_str(), stdout);
    } else if (*serve) {
      StudyHandle study;
      load_study(study, config_path, sets);
      sigset_t mask;
      sigemptyset(&mask);
      sigaddset(&mask, SIGINT);
      sigaddset(&mask, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &mask, nullptr);
      mbsc_server* server = nullptr;
      int bound = 0;
      check(mbsc_server_start(study.p, host.c_str(), port, tick_ms,
                              log_dir.empty() ? nullptr : log_dir.c_str(), &server, &bound),
            "serve");
      std::printf("listening on %s:%d\n", host.c_str(), bound);
      std::fflush(stdout);
      if (duration > 0) {
        timespec ts{};
        ts.tv_sec = static_cast<time_t>(duration);
        ts.tv_nsec = static_cast<long>((duration - static_cast<double>(ts.tv_sec)) * 1e9);
        sigtimedwait(&mask, nullptr, &ts);
      } else {
        int sig = 0;
        sigwait(&mask, &sig);
      }
      mbsc_server_stop(server);
      mbsc_server_destroy(server);
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
