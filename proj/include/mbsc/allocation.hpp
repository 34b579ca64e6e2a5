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

// Maxwell's Demon allocation: the human command reaches the plant only when
// it lies in the same half-plane as the autonomy command. Nothing the
// autonomy computes is ever injected.

#ifndef MBSC_ALLOCATION_HPP
#define MBSC_ALLOCATION_HPP

#include <span>
#include <string_view>
#include <utility>

#include "mbsc/types.hpp"

namespace mbsc {

enum class FilterMode { kVector, kPerAxis };

std::string_view to_string(FilterMode mode);
FilterMode filter_mode_from_string(std::string_view s);

struct AllocationRecord {
  ControlInput u_h;
  ControlInput u_a;
  ControlInput u_out;
  bool admitted = false;  // u_out == u_h and u_h != 0
  bool agree_main = false;
  bool agree_side = false;
  double time = 0.0;

  friend bool operator==(const AllocationRecord&, const AllocationRecord&) = default;
};

std::pair<ControlInput, AllocationRecord> mda_filter(const ControlInput& u_h,
                                                     const ControlInput& u_a,
                                                     FilterMode mode = FilterMode::kVector,
                                                     double time = 0.0);

struct AgreementStats {
  double main = 0.0;
  double side = 0.0;
};

// Throws Error(kInvalidArgument) on an empty sequence.
AgreementStats agreement_stats(std::span<const AllocationRecord> records);

}  // namespace mbsc

#endif  // MBSC_ALLOCATION_HPP
