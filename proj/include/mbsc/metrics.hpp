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

// Trial- and study-level evaluation: ergodicity against a goal-centred
// Gaussian, success summaries, occupancy heatmaps.

#ifndef MBSC_METRICS_HPP
#define MBSC_METRICS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mbsc/koopman.hpp"
#include "mbsc/trial_log.hpp"

namespace mbsc {

using Point2 = std::array<double, 2>;

struct Domain {
  double x_min = 0.0;
  double x_max = 20.0;
  double y_min = 0.0;
  double y_max = 16.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
};

// Isotropic Gaussian truncated to the domain and renormalized, together with
// its cosine-basis coefficients xi_k for k in {0..kmax}^2.
class SpatialDistribution {
 public:
  SpatialDistribution(Domain domain, Point2 mean, double sigma, int kmax);

  const Domain& domain() const { return domain_; }
  const Point2& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  int kmax() const { return kmax_; }

  double xi(int k1, int k2) const { return xi_[index(k1, k2)]; }
  // L2 norm of the unnormalized basis function cos(k1 pi x / Lx) cos(k2 pi y / Ly).
  double h(int k1, int k2) const;
  // Normalized basis function F_k at p (p in domain coordinates).
  double basis(int k1, int k2, const Point2& p) const;
  static double weight(int k1, int k2);

 private:
  int index(int k1, int k2) const { return k1 * (kmax_ + 1) + k2; }

  Domain domain_;
  Point2 mean_;
  double sigma_;
  int kmax_;
  std::vector<double> xi_;
};

// sum_k lambda_k (c_k - xi_k)^2 with c_k the time average of F_k over the
// trajectory. Points outside the domain are clamped to it and counted in
// `clamped`. Throws Error(kInvalidArgument) for an empty trajectory.
double ergodicity(std::span<const Point2> trajectory, const SpatialDistribution& dist,
                  int* clamped = nullptr);

std::vector<Point2> positions(const TrialRecord& record);

class OccupancyGrid {
 public:
  OccupancyGrid(Domain domain, int m);

  void add(const Point2& p);
  void add(std::span<const Point2> trajectory);
  OccupancyGrid& operator+=(const OccupancyGrid& other);

  int size() const { return m_; }
  std::int64_t count(int ix, int iy) const { return counts_[static_cast<std::size_t>(iy * m_ + ix)]; }
  std::int64_t total() const;

  // Row 0 is the top of the domain in both exports.
  std::string to_pgm() const;
  std::string to_csv() const;

 private:
  Domain domain_;
  int m_;
  std::vector<std::int64_t> counts_;
};

OccupancyGrid heatmap(std::span<const std::vector<Point2>> trajectories, const Domain& domain,
                      int m);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::int64_t n = 0;
};
MeanSd mean_sd(std::span<const double> values);

struct ConditionSummary {
  Condition condition = Condition::kUserOnly;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::map<std::string, int> outcomes;
  // Index i covers trial index i across subjects.
  std::vector<int> success_by_trial;
  std::vector<int> trials_by_trial;
  MeanSd ergodic_all;
  MeanSd ergodic_success;
  MeanSd ergodic_failure;
  double agree_main = 0.0;  // over commanded steps of shared trials
  double agree_side = 0.0;
  double admitted_fraction = 0.0;
  double mean_duration = 0.0;
  std::int64_t steps = 0;
  int faults = 0;
};

struct HStepTable {
  std::string model_id;
  std::string basis;
  HStepStats stats;
};

struct StudyReport {
  std::vector<ConditionSummary> conditions;
  std::vector<HStepTable> h_step;
  // Per-trial ergodicity keyed like the trial order in the input.
  std::vector<double> trial_ergodicity;
};

struct SummaryOptions {
  Domain domain;
  Point2 goal{10.0, 6.0};
  double ergodic_sigma = 1.0;
  int ergodic_kmax = 10;
};

// Groups by condition in first-appearance order.
StudyReport summarize(std::span<const TrialRecord> trials, const SummaryOptions& options);

}  // namespace mbsc

#endif  // MBSC_METRICS_HPP
