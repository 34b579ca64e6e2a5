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

// Compiled as C: the public header must be valid C and link without C++.
#include "mbsc/mbsc.h"

#include <string.h>

int mbsc_c_smoke(void) {
  mbsc_study* study = NULL;
  if (mbsc_study_create(&study) != MBSC_OK) return 1;
  const double state[6] = {10.0, 10.0, 0.0, 0.0, 0.0, 0.0};
  const double control[2] = {0.0, 0.0};
  double next[6];
  int clamped = -1;
  const mbsc_status st = mbsc_sim_step(study, state, control, next, &clamped);
  mbsc_study_destroy(study);
  if (st != MBSC_OK || clamped != 0 || !(next[1] < 10.0)) return 2;
  return strlen(mbsc_version()) > 0 ? 0 : 3;
}
