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

#include "mbsc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

namespace mbsc {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

double to_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error(ErrorCode::kConfig, "expected a number, got '" + std::string(s) + "'");
  return v;
}

template <typename Int>
Int to_int(std::string_view s) {
  Int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error(ErrorCode::kConfig, "expected an integer, got '" + std::string(s) + "'");
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::kConfig, "expected a boolean, got '" + std::string(s) + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename Vec>
std::string fmt_vec(const Vec& v) {
  std::string out;
  for (int i = 0; i < static_cast<int>(v.size()); ++i) {
    if (i) out += ", ";
    out += fmt(static_cast<double>(v[i]));
  }
  return out;
}

template <typename Vec>
void set_fixed(Vec& v, std::string_view s) {
  const auto items = split_list(s);
  if (static_cast<int>(items.size()) != static_cast<int>(v.size()))
    throw Error(ErrorCode::kConfig, "expected " + std::to_string(v.size()) + " values");
  for (int i = 0; i < static_cast<int>(items.size()); ++i) v[i] = to_double(items[i]);
}

// Parser-level errors from enum lookups are configuration faults here.
template <typename F>
auto as_config(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

struct Key {
  std::string name;
  std::function<void(StudyConfig&, std::string_view)> set;
  std::function<std::string(const StudyConfig&)> get;
};

#define MBSC_DOUBLE(key, field)                                                        \
  Key{key, [](StudyConfig& c, std::string_view v) { c.field = to_double(v); },        \
      [](const StudyConfig& c) { return fmt(c.field); }}
#define MBSC_INT(key, field)                                                                \
  Key{key, [](StudyConfig& c, std::string_view v) { c.field = to_int<decltype(c.field)>(v); }, \
      [](const StudyConfig& c) { return std::to_string(c.field); }}
#define MBSC_STRING(key, field)                                                        \
  Key{key, [](StudyConfig& c, std::string_view v) { c.field = std::string(v); },      \
      [](const StudyConfig& c) { return c.field; }}

void add_pilot_keys(std::vector<Key>& keys, const std::string& prefix,
                    PilotConfig StudyConfig::*member) {
  auto p = [member](StudyConfig& c) -> PilotConfig& { return c.*member; };
  auto cp = [member](const StudyConfig& c) -> const PilotConfig& { return c.*member; };
  keys.push_back({prefix + ".kind",
                  [p](StudyConfig& c, std::string_view v) {
                    p(c).kind = as_config([&] { return pilot_kind_from_string(v); });
                  },
                  [cp](const StudyConfig& c) { return std::string(to_string(cp(c).kind)); }});
  auto dbl = [&](const char* name, double PilotConfig::*f) {
    keys.push_back({prefix + "." + name,
                    [p, f](StudyConfig& c, std::string_view v) { p(c).*f = to_double(v); },
                    [cp, f](const StudyConfig& c) { return fmt(cp(c).*f); }});
  };
  dbl("noise_main", &PilotConfig::noise_main);
  dbl("noise_side", &PilotConfig::noise_side);
  keys.push_back({prefix + ".delay_steps",
                  [p](StudyConfig& c, std::string_view v) { p(c).delay_steps = to_int<int>(v); },
                  [cp](const StudyConfig& c) { return std::to_string(cp(c).delay_steps); }});
  dbl("drift_sigma", &PilotConfig::drift_sigma);
  dbl("drift_decay", &PilotConfig::drift_decay);
  dbl("excitation", &PilotConfig::excitation);
  auto gain = [&](const char* name, double PilotGains::*f) {
    keys.push_back({prefix + ".gain." + name,
                    [p, f](StudyConfig& c, std::string_view v) { p(c).gains.*f = to_double(v); },
                    [cp, f](const StudyConfig& c) { return fmt(cp(c).gains.*f); }});
  };
  gain("position", &PilotGains::position);
  gain("velocity", &PilotGains::velocity);
  gain("max_tilt", &PilotGains::max_tilt);
  gain("attitude", &PilotGains::attitude);
  gain("attitude_rate", &PilotGains::attitude_rate);
  gain("altitude", &PilotGains::altitude);
  gain("max_descent", &PilotGains::max_descent);
  gain("climb", &PilotGains::climb);
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"conditions",
                 [](StudyConfig& c, std::string_view v) {
                   c.conditions.clear();
                   for (auto item : split_list(v))
                     c.conditions.push_back(as_config([&] { return condition_from_string(item); }));
                 },
                 [](const StudyConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.conditions.size(); ++i)
                     out += (i ? ", " : "") + std::string(to_string(c.conditions[i]));
                   return out;
                 }});
    k.push_back(MBSC_INT("subjects", subjects));
    k.push_back(MBSC_INT("trials", trials));
    k.push_back(MBSC_INT("online_trials", online_trials));
    k.push_back(MBSC_INT("demo_trials", demo_trials));
    k.push_back(MBSC_INT("general_pilots", general_pilots));
    k.push_back({"basis",
                 [](StudyConfig& c, std::string_view v) {
                   c.basis = as_config([&] { return basis_kind_from_string(v); });
                 },
                 [](const StudyConfig& c) { return std::string(to_string(c.basis)); }});
    k.push_back({"solver",
                 [](StudyConfig& c, std::string_view v) {
                   c.solver = as_config([&] { return solver_kind_from_string(v); });
                 },
                 [](const StudyConfig& c) { return std::string(to_string(c.solver)); }});
    k.push_back({"filter",
                 [](StudyConfig& c, std::string_view v) {
                   c.filter = as_config([&] { return filter_mode_from_string(v); });
                 },
                 [](const StudyConfig& c) { return std::string(to_string(c.filter)); }});
    k.push_back(MBSC_DOUBLE("epsilon", epsilon));
    k.push_back(MBSC_INT("seed", seed));
    k.push_back(MBSC_STRING("output_dir", output_dir));

    k.push_back(MBSC_DOUBLE("sim.mass", sim.mass));
    k.push_back(MBSC_DOUBLE("sim.inertia", sim.inertia));
    k.push_back(MBSC_DOUBLE("sim.gravity", sim.gravity));
    k.push_back(MBSC_DOUBLE("sim.main_thrust_max", sim.main_thrust_max));
    k.push_back(MBSC_DOUBLE("sim.side_thrust_max", sim.side_thrust_max));
    k.push_back(MBSC_DOUBLE("sim.side_lever_arm", sim.side_lever_arm));
    k.push_back(MBSC_DOUBLE("sim.dt_log", sim.dt_log));
    k.push_back(MBSC_INT("sim.substeps", sim.substeps));
    k.push_back(MBSC_DOUBLE("sim.start_x", sim.start_x));
    k.push_back(MBSC_DOUBLE("sim.start_y", sim.start_y));
    k.push_back(MBSC_DOUBLE("sim.start_noise_sigma", sim.start_noise_sigma));
    k.push_back(MBSC_DOUBLE("sim.kick_force_range", sim.kick_force_range));
    k.push_back(MBSC_DOUBLE("sim.kick_duration", sim.kick_duration));
    k.push_back(MBSC_DOUBLE("sim.goal_x", sim.goal_x));
    k.push_back(MBSC_DOUBLE("sim.goal_y", sim.goal_y));
    k.push_back(MBSC_DOUBLE("sim.goal_radius", sim.goal_radius));
    k.push_back(MBSC_DOUBLE("sim.velocity_threshold", sim.velocity_threshold));
    k.push_back(MBSC_DOUBLE("sim.omega_threshold", sim.omega_threshold));
    k.push_back(MBSC_DOUBLE("sim.upright_threshold", sim.upright_threshold));
    k.push_back(MBSC_DOUBLE("sim.ground_height", sim.ground_height));
    k.push_back(MBSC_DOUBLE("sim.world_x_min", sim.world_x_min));
    k.push_back(MBSC_DOUBLE("sim.world_x_max", sim.world_x_max));
    k.push_back(MBSC_DOUBLE("sim.world_y_max", sim.world_y_max));
    k.push_back(MBSC_DOUBLE("sim.timeout", sim.timeout));

    add_pilot_keys(k, "novice", &StudyConfig::novice);
    add_pilot_keys(k, "expert", &StudyConfig::expert);

    k.push_back({"cost.q", [](StudyConfig& c, std::string_view v) { set_fixed(c.weights.q, v); },
                 [](const StudyConfig& c) { return fmt_vec(c.weights.q); }});
    k.push_back({"cost.qt", [](StudyConfig& c, std::string_view v) { set_fixed(c.weights.qt, v); },
                 [](const StudyConfig& c) { return fmt_vec(c.weights.qt); }});
    k.push_back({"cost.r", [](StudyConfig& c, std::string_view v) { set_fixed(c.weights.r, v); },
                 [](const StudyConfig& c) { return fmt_vec(c.weights.r); }});

    k.push_back(MBSC_INT("mpc.horizon", mpc.horizon));
    k.push_back({"mpc.nominal",
                 [](StudyConfig& c, std::string_view v) { set_fixed(c.mpc.nominal, v); },
                 [](const StudyConfig& c) { return fmt_vec(c.mpc.nominal); }});
    k.push_back(MBSC_DOUBLE("mpc.descent_factor", mpc.descent_factor));
    k.push_back({"mpc.durations",
                 [](StudyConfig& c, std::string_view v) {
                   c.mpc.durations.clear();
                   for (auto item : split_list(v)) c.mpc.durations.push_back(to_int<int>(item));
                 },
                 [](const StudyConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.mpc.durations.size(); ++i)
                     out += (i ? ", " : "") + std::to_string(c.mpc.durations[i]);
                   return out;
                 }});
    k.push_back({"mpc.scales",
                 [](StudyConfig& c, std::string_view v) {
                   c.mpc.scales.clear();
                   for (auto item : split_list(v)) c.mpc.scales.push_back(to_double(item));
                 },
                 [](const StudyConfig& c) { return fmt_vec(c.mpc.scales); }});
    k.push_back({"mpc.trim_nominal",
                 [](StudyConfig& c, std::string_view v) { c.mpc.trim_nominal = to_bool(v); },
                 [](const StudyConfig& c) { return std::string(c.mpc.trim_nominal ? "true" : "false"); }});

    k.push_back(MBSC_STRING("model.individual", individual_model));
    k.push_back(MBSC_STRING("model.general", general_model));
    k.push_back(MBSC_STRING("model.expert", expert_model));

    k.push_back(MBSC_INT("metrics.heatmap_grid", heatmap_grid));
    k.push_back(MBSC_INT("metrics.h_step_max", h_step_max));
    k.push_back(MBSC_DOUBLE("metrics.ergodic_sigma", ergodic_sigma));
    k.push_back(MBSC_INT("metrics.ergodic_kmax", ergodic_kmax));
    return k;
  }();
  return table;
}

#undef MBSC_DOUBLE
#undef MBSC_INT
#undef MBSC_STRING

}  // namespace

void set_config_value(StudyConfig& config, std::string_view key, std::string_view value) {
  for (const Key& k : keys()) {
    if (k.name == key) {
      k.set(config, trim(value));
      return;
    }
  }
  throw Error(ErrorCode::kConfig, "unknown config key '" + std::string(key) + "'");
}

StudyConfig parse_study_config(std::string_view text) {
  StudyConfig config;
  bool solver_set = false;
  bool basis_set = false;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + " (" +
                                          std::string(key) + "): " + e.what());
    }
    solver_set |= key == "solver";
    basis_set |= key == "basis";
  }
  if (basis_set && !solver_set)
    config.solver = config.basis == BasisKind::kLinear ? SolverKind::kLqr : SolverKind::kSac;
  config.finalize();
  return config;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

std::string serialize_study_config(const StudyConfig& config) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace mbsc
