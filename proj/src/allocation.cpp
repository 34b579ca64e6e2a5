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

#include "mbsc/allocation.hpp"

#include <string>

namespace mbsc {

std::string_view to_string(FilterMode mode) {
  return mode == FilterMode::kVector ? "vector" : "per_axis";
}

FilterMode filter_mode_from_string(std::string_view s) {
  if (s == "vector") return FilterMode::kVector;
  if (s == "per_axis" || s == "peraxis") return FilterMode::kPerAxis;
  throw Error(ErrorCode::kInvalidArgument, "unknown filter mode: " + std::string(s));
}

std::pair<ControlInput, AllocationRecord> mda_filter(const ControlInput& u_h,
                                                     const ControlInput& u_a, FilterMode mode,
                                                     double time) {
  AllocationRecord rec;
  rec.u_h = u_h;
  rec.u_a = u_a;
  rec.time = time;
  rec.agree_main = u_h.u1 * u_a.u1 >= 0.0;
  rec.agree_side = u_h.u2 * u_a.u2 >= 0.0;

  if (mode == FilterMode::kVector) {
    const double inner = u_h.u1 * u_a.u1 + u_h.u2 * u_a.u2;
    rec.u_out = inner >= 0.0 ? u_h : ControlInput{};
  } else {
    rec.u_out = {rec.agree_main ? u_h.u1 : 0.0, rec.agree_side ? u_h.u2 : 0.0};
  }
  rec.admitted = rec.u_out == u_h && !u_h.is_zero();
  return {rec.u_out, rec};
}

AgreementStats agreement_stats(std::span<const AllocationRecord> records) {
  if (records.empty())
    throw Error(ErrorCode::kInvalidArgument, "agreement_stats: empty record sequence");
  std::size_t main = 0;
  std::size_t side = 0;
  for (const auto& r : records) {
    main += r.agree_main ? 1 : 0;
    side += r.agree_side ? 1 : 0;
  }
  const auto n = static_cast<double>(records.size());
  return {static_cast<double>(main) / n, static_cast<double>(side) / n};
}

}  // namespace mbsc
