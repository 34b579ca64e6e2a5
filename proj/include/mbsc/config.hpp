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

// Declarative key-value study configuration.
//
//   # comment
//   key = value
//
// Lists are comma separated. Unknown keys and malformed values are
// Error(kConfig) naming the line.

#ifndef MBSC_CONFIG_HPP
#define MBSC_CONFIG_HPP

#include <iosfwd>
#include <string>
#include <string_view>

#include "mbsc/harness.hpp"

namespace mbsc {

// Parses on top of the defaults and finalizes. When `basis` is given without
// `solver`, the solver follows the basis (linear -> lqr, nonlinear -> sac).
StudyConfig parse_study_config(std::string_view text);
StudyConfig load_study_config(const std::string& path);

// Sets one key on an existing config (CLI overrides use the same keys).
// Does not finalize.
void set_config_value(StudyConfig& config, std::string_view key, std::string_view value);

// Every key, in a fixed order; parse(serialize(c)) reproduces c.
std::string serialize_study_config(const StudyConfig& config);

}  // namespace mbsc

#endif  // MBSC_CONFIG_HPP
