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

#include "mbsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mbsc {

namespace {

constexpr double kPi = std::numbers::pi;

// int_0^L cos(k pi s / L) N(s; mu, sigma) ds over the truncated density, by
// composite Simpson on a fine grid.
std::vector<double> axis_coefficients(double length, double mu, double sigma, int kmax) {
  constexpr int kIntervals = 8000;
  const double hstep = length / kIntervals;
  std::vector<double> weights(kIntervals + 1);
  std::vector<double> density(kIntervals + 1);
  double z = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double s = i * hstep;
    const double w = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    weights[i] = w * hstep / 3.0;
    const double d = (s - mu) / sigma;
    density[i] = std::exp(-0.5 * d * d);
    z += weights[i] * density[i];
  }
  std::vector<double> out(kmax + 1, 0.0);
  for (int k = 0; k <= kmax; ++k) {
    double acc = 0.0;
    for (int i = 0; i <= kIntervals; ++i)
      acc += weights[i] * density[i] * std::cos(k * kPi * (i * hstep) / length);
    out[k] = acc / z;
  }
  return out;
}

Point2 clamp_to(const Domain& d, const Point2& p, bool* moved) {
  const Point2 q{std::clamp(p[0], d.x_min, d.x_max), std::clamp(p[1], d.y_min, d.y_max)};
  *moved = q != p;
  return q;
}

}  // namespace

SpatialDistribution::SpatialDistribution(Domain domain, Point2 mean, double sigma, int kmax)
    : domain_(domain), mean_(mean), sigma_(sigma), kmax_(kmax) {
  if (!(domain.width() > 0) || !(domain.height() > 0))
    throw Error(ErrorCode::kInvalidArgument, "ergodic domain must have positive extent");
  if (!(sigma > 0)) throw Error(ErrorCode::kInvalidArgument, "ergodic sigma must be > 0");
  if (kmax < 0) throw Error(ErrorCode::kInvalidArgument, "ergodic kmax must be >= 0");
  const auto cx = axis_coefficients(domain.width(), mean[0] - domain.x_min, sigma, kmax);
  const auto cy = axis_coefficients(domain.height(), mean[1] - domain.y_min, sigma, kmax);
  xi_.resize(static_cast<std::size_t>((kmax + 1) * (kmax + 1)));
  for (int k1 = 0; k1 <= kmax; ++k1)
    for (int k2 = 0; k2 <= kmax; ++k2) xi_[index(k1, k2)] = cx[k1] * cy[k2] / h(k1, k2);
}

double SpatialDistribution::h(int k1, int k2) const {
  const double fx = k1 == 0 ? 1.0 : 0.5;
  const double fy = k2 == 0 ? 1.0 : 0.5;
  return std::sqrt(domain_.width() * domain_.height() * fx * fy);
}

double SpatialDistribution::basis(int k1, int k2, const Point2& p) const {
  return std::cos(k1 * kPi * (p[0] - domain_.x_min) / domain_.width()) *
         std::cos(k2 * kPi * (p[1] - domain_.y_min) / domain_.height()) / h(k1, k2);
}

double SpatialDistribution::weight(int k1, int k2) {
  return std::pow(1.0 + static_cast<double>(k1 * k1 + k2 * k2), -1.5);
}

double ergodicity(std::span<const Point2> trajectory, const SpatialDistribution& dist,
                  int* clamped) {
  if (trajectory.empty()) throw Error(ErrorCode::kInvalidArgument, "ergodicity: empty trajectory");
  const int n = dist.kmax() + 1;
  const Domain& d = dist.domain();
  std::vector<double> c(static_cast<std::size_t>(n * n), 0.0);
  std::vector<double> cx(n), cy(n);
  int moved_count = 0;
  for (const Point2& raw : trajectory) {
    bool moved = false;
    const Point2 p = clamp_to(d, raw, &moved);
    moved_count += moved;
    for (int k = 0; k < n; ++k) {
      cx[k] = std::cos(k * kPi * (p[0] - d.x_min) / d.width());
      cy[k] = std::cos(k * kPi * (p[1] - d.y_min) / d.height());
    }
    for (int k1 = 0; k1 < n; ++k1)
      for (int k2 = 0; k2 < n; ++k2) c[k1 * n + k2] += cx[k1] * cy[k2];
  }
  const double inv_t = 1.0 / static_cast<double>(trajectory.size());
  double metric = 0.0;
  for (int k1 = 0; k1 < n; ++k1)
    for (int k2 = 0; k2 < n; ++k2) {
      const double ck = c[k1 * n + k2] * inv_t / dist.h(k1, k2);
      const double diff = ck - dist.xi(k1, k2);
      metric += SpatialDistribution::weight(k1, k2) * diff * diff;
    }
  if (clamped) *clamped = moved_count;
  return metric;
}

std::vector<Point2> positions(const TrialRecord& record) {
  std::vector<Point2> out;
  out.reserve(record.steps.size());
  for (const auto& s : record.steps) out.push_back({s.state.x, s.state.y});
  return out;
}

OccupancyGrid::OccupancyGrid(Domain domain, int m) : domain_(domain), m_(m) {
  if (m < 2) throw Error(ErrorCode::kInvalidArgument, "heatmap grid must be >= 2");
  counts_.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0);
}

void OccupancyGrid::add(const Point2& p) {
  auto cell = [&](double v, double lo, double span) {
    const int i = static_cast<int>(std::floor((v - lo) / span * m_));
    return std::clamp(i, 0, m_ - 1);
  };
  const int ix = cell(p[0], domain_.x_min, domain_.width());
  const int iy = cell(p[1], domain_.y_min, domain_.height());
  ++counts_[static_cast<std::size_t>(iy * m_ + ix)];
}

void OccupancyGrid::add(std::span<const Point2> trajectory) {
  for (const auto& p : trajectory) add(p);
}

OccupancyGrid& OccupancyGrid::operator+=(const OccupancyGrid& other) {
  if (other.m_ != m_) throw Error(ErrorCode::kInvalidArgument, "heatmap grid sizes differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::int64_t OccupancyGrid::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::string OccupancyGrid::to_pgm() const {
  // Log-scaled so sparse excursions stay visible next to the dense start.
  std::int64_t peak = 0;
  for (auto c : counts_) peak = std::max(peak, c);
  std::ostringstream os;
  os << "P2\n" << m_ << ' ' << m_ << "\n255\n";
  for (int row = 0; row < m_; ++row) {
    const int iy = m_ - 1 - row;
    for (int ix = 0; ix < m_; ++ix) {
      const double c = static_cast<double>(count(ix, iy));
      const int v = peak == 0 ? 0
                              : static_cast<int>(std::lround(
                                    255.0 * std::log1p(c) / std::log1p(static_cast<double>(peak))));
      os << v << (ix + 1 < m_ ? ' ' : '\n');
    }
  }
  return os.str();
}

std::string OccupancyGrid::to_csv() const {
  std::ostringstream os;
  for (int row = 0; row < m_; ++row) {
    const int iy = m_ - 1 - row;
    for (int ix = 0; ix < m_; ++ix) os << count(ix, iy) << (ix + 1 < m_ ? ',' : '\n');
  }
  return os.str();
}

OccupancyGrid heatmap(std::span<const std::vector<Point2>> trajectories, const Domain& domain,
                      int m) {
  OccupancyGrid grid(domain, m);
  for (const auto& t : trajectories) grid.add(t);
  return grid;
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  out.n = static_cast<std::int64_t>(values.size());
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

StudyReport summarize(std::span<const TrialRecord> trials, const SummaryOptions& options) {
  const SpatialDistribution dist(options.domain, options.goal, options.ergodic_sigma,
                                 options.ergodic_kmax);
  StudyReport report;
  std::vector<Condition> order;
  for (const auto& t : trials)
    if (std::find(order.begin(), order.end(), t.condition) == order.end())
      order.push_back(t.condition);

  report.trial_ergodicity.reserve(trials.size());
  for (const auto& t : trials) {
    const auto pts = positions(t);
    report.trial_ergodicity.push_back(pts.empty() ? 0.0 : ergodicity(pts, dist));
  }

  for (Condition cond : order) {
    ConditionSummary s;
    s.condition = cond;
    std::vector<double> erg_all, erg_ok, erg_bad;
    std::int64_t commanded = 0, admitted = 0, agree_main = 0, agree_side = 0;
    double duration = 0.0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const TrialRecord& t = trials[i];
      if (t.condition != cond) continue;
      ++s.trials;
      const bool ok = t.outcome == TrialStatus::kSuccess;
      s.successes += ok;
      ++s.outcomes[std::string(to_string(t.outcome))];
      if (t.trial >= static_cast<int>(s.success_by_trial.size())) {
        s.success_by_trial.resize(static_cast<std::size_t>(t.trial) + 1, 0);
        s.trials_by_trial.resize(static_cast<std::size_t>(t.trial) + 1, 0);
      }
      ++s.trials_by_trial[static_cast<std::size_t>(t.trial)];
      s.success_by_trial[static_cast<std::size_t>(t.trial)] += ok;
      if (!t.steps.empty()) {
        erg_all.push_back(report.trial_ergodicity[i]);
        (ok ? erg_ok : erg_bad).push_back(report.trial_ergodicity[i]);
      }
      duration += t.duration;
      s.faults += !t.fault.empty();
      for (const auto& st : t.steps) {
        if (st.terminal) continue;
        ++commanded;
        admitted += st.admitted;
        agree_main += st.agree_main;
        agree_side += st.agree_side;
      }
    }
    s.steps = commanded;
    s.success_rate = s.trials ? static_cast<double>(s.successes) / s.trials : 0.0;
    s.mean_duration = s.trials ? duration / s.trials : 0.0;
    s.ergodic_all = mean_sd(erg_all);
    s.ergodic_success = mean_sd(erg_ok);
    s.ergodic_failure = mean_sd(erg_bad);
    if (commanded > 0) {
      const double n = static_cast<double>(commanded);
      s.admitted_fraction = static_cast<double>(admitted) / n;
      if (is_shared(cond)) {
        s.agree_main = static_cast<double>(agree_main) / n;
        s.agree_side = static_cast<double>(agree_side) / n;
      }
    }
    report.conditions.push_back(std::move(s));
  }
  return report;
}

}  // namespace mbsc
