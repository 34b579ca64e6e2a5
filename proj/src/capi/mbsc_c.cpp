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

#include "mbsc/mbsc.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "mbsc/bridge.hpp"
#include "mbsc/config.hpp"
#include "mbsc/harness.hpp"
#include "mbsc/report.hpp"

struct mbsc_study {
  mbsc::StudyConfig config;
};
struct mbsc_model {
  std::shared_ptr<const mbsc::KoopmanModel> model;
};
struct mbsc_controller {
  mbsc::AutonomyController controller;
};
struct mbsc_server {
  std::unique_ptr<mbsc::BridgeServer> server;
};

namespace {

thread_local std::string g_last_error;

mbsc_status status_of(mbsc::ErrorCode code) {
  switch (code) {
    case mbsc::ErrorCode::kInvalidArgument: return MBSC_E_INVALID_ARGUMENT;
    case mbsc::ErrorCode::kConfig: return MBSC_E_CONFIG;
    case mbsc::ErrorCode::kModel: return MBSC_E_MODEL;
    case mbsc::ErrorCode::kNotFitted: return MBSC_E_NOT_FITTED;
    case mbsc::ErrorCode::kNonFinite: return MBSC_E_NON_FINITE;
    case mbsc::ErrorCode::kSolver: return MBSC_E_SOLVER;
    case mbsc::ErrorCode::kIo: return MBSC_E_IO;
    case mbsc::ErrorCode::kRuntime: return MBSC_E_RUNTIME;
  }
  return MBSC_E_RUNTIME;
}

template <typename F>
mbsc_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return MBSC_OK;
  } catch (const mbsc::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MBSC_E_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MBSC_E_RUNTIME;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw mbsc::Error(mbsc::ErrorCode::kInvalidArgument, what);
}

void copy_out(const std::string& text, char* buffer, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (buffer && capacity > 0) {
    const size_t n = std::min(capacity - 1, text.size());
    std::memcpy(buffer, text.data(), n);
    buffer[n] = '\0';
  }
}

mbsc::LanderState state_in(const double* s) {
  return {s[0], s[1], s[2], s[3], s[4], s[5]};
}

void state_out(const mbsc::LanderState& s, double* out) {
  out[0] = s.x;
  out[1] = s.y;
  out[2] = s.theta;
  out[3] = s.vx;
  out[4] = s.vy;
  out[5] = s.omega;
}

}  // namespace

extern "C" {

const char* mbsc_version(void) { return "1.0.0"; }

const char* mbsc_status_string(mbsc_status status) {
  switch (status) {
    case MBSC_OK: return "ok";
    case MBSC_E_INVALID_ARGUMENT: return "invalid argument";
    case MBSC_E_CONFIG: return "configuration error";
    case MBSC_E_MODEL: return "model error";
    case MBSC_E_NOT_FITTED: return "model not fitted";
    case MBSC_E_NON_FINITE: return "non-finite value";
    case MBSC_E_SOLVER: return "solver failure";
    case MBSC_E_IO: return "i/o error";
    case MBSC_E_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

const char* mbsc_last_error(void) { return g_last_error.c_str(); }

mbsc_status mbsc_study_create(mbsc_study** out) {
  return guarded([&] {
    require(out, "out is null");
    auto s = std::make_unique<mbsc_study>();
    s->config.finalize();
    *out = s.release();
  });
}

mbsc_status mbsc_study_parse(const char* text, mbsc_study** out) {
  return guarded([&] {
    require(text && out, "null argument");
    *out = new mbsc_study{mbsc::parse_study_config(text)};
  });
}

mbsc_status mbsc_study_load(const char* path, mbsc_study** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new mbsc_study{mbsc::load_study_config(path)};
  });
}

mbsc_status mbsc_study_set(mbsc_study* study, const char* key, const char* value) {
  return guarded([&] {
    require(study && key && value, "null argument");
    mbsc::StudyConfig next = study->config;
    mbsc::set_config_value(next, key, value);
    next.finalize();
    study->config = std::move(next);
  });
}

mbsc_status mbsc_study_serialize(const mbsc_study* study, char* buffer, size_t capacity,
                                 size_t* needed) {
  return guarded([&] {
    require(study, "study is null");
    copy_out(mbsc::serialize_study_config(study->config), buffer, capacity, needed);
  });
}

void mbsc_study_destroy(mbsc_study* study) { delete study; }

mbsc_status mbsc_collect(const mbsc_study* study, const char* pilot, int trials, uint64_t seed,
                         const char* log_path, size_t* pairs) {
  return guarded([&] {
    require(study && pilot && log_path, "null argument");
    require(trials >= 0, "trials must be >= 0");
    const auto kind = mbsc::pilot_kind_from_string(pilot);
    const mbsc::PilotConfig& base =
        kind == mbsc::PilotKind::kExpert ? study->config.expert : study->config.novice;
    const auto records = mbsc::collect_demonstrations(base, trials, study->config.sim, seed);
    std::ofstream out(log_path, std::ios::binary);
    if (!out) throw mbsc::Error(mbsc::ErrorCode::kIo, std::string("cannot write ") + log_path);
    for (const auto& r : records) mbsc::write_trial(out, r);
    out.flush();
    if (!out) throw mbsc::Error(mbsc::ErrorCode::kIo, std::string("write failed: ") + log_path);
    if (pairs) *pairs = mbsc::snapshot_pairs(records).size();
  });
}

mbsc_status mbsc_fit_logs(const char* const* log_paths, size_t count, const char* basis,
                          double epsilon, mbsc_model** out) {
  return guarded([&] {
    require(log_paths && basis && out, "null argument");
    require(count > 0, "no logs given");
    const auto kind = mbsc::basis_kind_from_string(basis);
    std::vector<mbsc::TrialRecord> trials;
    for (size_t i = 0; i < count; ++i) {
      require(log_paths[i], "null log path");
      auto t = mbsc::read_trials_file(log_paths[i]);
      trials.insert(trials.end(), t.begin(), t.end());
    }
    const auto pairs = mbsc::snapshot_pairs(trials);
    if (pairs.empty()) throw mbsc::Error(mbsc::ErrorCode::kModel, "logs contain no snapshot pairs");
    *out = new mbsc_model{std::make_shared<const mbsc::KoopmanModel>(mbsc::fit(pairs, kind, epsilon))};
  });
}

mbsc_status mbsc_run_study(const mbsc_study* study) {
  return guarded([&] {
    require(study, "study is null");
    if (study->config.output_dir.empty())
      throw mbsc::Error(mbsc::ErrorCode::kConfig, "output_dir is empty");
    mbsc::run_study(study->config);
  });
}

mbsc_status mbsc_report(const char* study_dir, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(study_dir, "study_dir is null");
    const auto loaded = mbsc::load_study(study_dir);
    const auto report = mbsc::build_report(loaded.trials, loaded.config, loaded.models);
    mbsc::write_report(study_dir, report, loaded.trials, loaded.config);
    copy_out(mbsc::report_json(report, loaded.config), buffer, capacity, needed);
  });
}

mbsc_status mbsc_model_load(const char* path, mbsc_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new mbsc_model{std::make_shared<const mbsc::KoopmanModel>(mbsc::KoopmanModel::load_file(path))};
  });
}

mbsc_status mbsc_model_save(const mbsc_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null argument");
    model->model->save_file(path);
  });
}

mbsc_status mbsc_model_info(const mbsc_model* model, int* dim, int* linear_basis,
                            int64_t* samples) {
  return guarded([&] {
    require(model, "model is null");
    if (dim) *dim = model->model->basis().dim();
    if (linear_basis) *linear_basis = model->model->basis().kind() == mbsc::BasisKind::kLinear;
    if (samples) *samples = model->model->samples();
  });
}

mbsc_status mbsc_model_predict(const mbsc_model* model, const double state[6],
                               const double control[2], double next[6]) {
  return guarded([&] {
    require(model && state && control && next, "null argument");
    const auto s = model->model->predict(state_in(state), mbsc::ControlInput{control[0], control[1]});
    state_out(s, next);
  });
}

void mbsc_model_destroy(mbsc_model* model) { delete model; }

mbsc_status mbsc_sim_step(const mbsc_study* study, const double state[6], const double control[2],
                          double next[6], int* clamped) {
  return guarded([&] {
    require(study && state && control && next, "null argument");
    mbsc::StepInfo info;
    const auto s = mbsc::step(state_in(state), {control[0], control[1]}, study->config.sim, &info);
    state_out(s, next);
    if (clamped) *clamped = info.clamped;
  });
}

mbsc_status mbsc_mda_filter(const double u_h[2], const double u_a[2], int per_axis,
                            double u_out[2], int* admitted) {
  return guarded([&] {
    require(u_h && u_a && u_out, "null argument");
    const auto [u, rec] = mbsc::mda_filter({u_h[0], u_h[1]}, {u_a[0], u_a[1]},
                                           per_axis ? mbsc::FilterMode::kPerAxis
                                                    : mbsc::FilterMode::kVector);
    u_out[0] = u.u1;
    u_out[1] = u.u2;
    if (admitted) *admitted = rec.admitted;
  });
}

mbsc_status mbsc_controller_create(const mbsc_model* model, const mbsc_study* study,
                                   mbsc_controller** out) {
  return guarded([&] {
    require(model && study && out, "null argument");
    if (!model->model->has_operator())
      throw mbsc::Error(mbsc::ErrorCode::kNotFitted, "model is not fitted");
    *out = new mbsc_controller{mbsc::make_controller(model->model, study->config)};
  });
}

mbsc_status mbsc_controller_command(mbsc_controller* controller, const double state[6],
                                    double control[2]) {
  return guarded([&] {
    require(controller && state && control, "null argument");
    const auto u = controller->controller.command(state_in(state));
    control[0] = u.u1;
    control[1] = u.u2;
  });
}

void mbsc_controller_destroy(mbsc_controller* controller) { delete controller; }

mbsc_status mbsc_server_start(const mbsc_study* study, const char* host, int port, int tick_ms,
                              const char* log_dir, mbsc_server** out, int* bound_port) {
  return guarded([&] {
    require(study && out, "null argument");
    auto res = std::make_shared<mbsc::BridgeResources>();
    res->config = study->config;
    res->models = mbsc::build_models(study->config);
    res->log_dir = log_dir ? log_dir : "";
    mbsc::BridgeOptions opts;
    if (host) opts.host = host;
    opts.port = port;
    opts.tick_ms = tick_ms;
    auto server = std::make_unique<mbsc_server>();
    server->server = std::make_unique<mbsc::BridgeServer>(std::move(res), opts);
    const int p = server->server->start();
    if (bound_port) *bound_port = p;
    *out = server.release();
  });
}

void mbsc_server_stop(mbsc_server* server) {
  if (server && server->server) server->server->stop();
}

void mbsc_server_destroy(mbsc_server* server) { delete server; }

}  // extern "C"
