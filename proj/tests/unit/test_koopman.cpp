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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "mbsc/harness.hpp"
#include "mbsc/koopman.hpp"
#include "mbsc/trial_log.hpp"

namespace mbsc {
namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 r(2024);
  return r;
}

double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

StateVector random_state() {
  StateVector x;
  x << uni(0, 20), uni(0, 16), uni(-3, 3), uni(-4, 4), uni(-4, 4), uni(-2, 2);
  return x;
}

ControlVector random_control() { return {uni(0, 1), uni(-1, 1)}; }

SnapshotPair random_pair() {
  return {LanderState::from(random_state()), ControlInput::from(random_control()),
          LanderState::from(random_state()), ControlInput::from(random_control())};
}

// Expert demonstrations shared across tests: 10 for training, 5 held out.
struct ExpertData {
  std::vector<TrialRecord> train, held;
};
const ExpertData& expert_data() {
  static const ExpertData d = [] {
    const PilotConfig p = PilotConfig::expert();
    return ExpertData{collect_demonstrations(p, 10, SimConfig{}, 11),
                      collect_demonstrations(p, 5, SimConfig{}, 12)};
  }();
  return d;
}

double mean_one_step_error(const KoopmanModel& m, const std::vector<SnapshotPair>& pairs) {
  double sum = 0.0;
  for (const auto& p : pairs) {
    const LanderState n = m.predict(p.state, p.control);
    sum += std::hypot(n.x - p.next_state.x, n.y - p.next_state.y);
  }
  return sum / static_cast<double>(pairs.size());
}

// --- dictionary -------------------------------------------------------------

TEST(Basis, ZeroInputIsConstantOnly) {
  const Eigen::VectorXd phi = Basis(BasisKind::kNonlinear).eval(LanderState{}, ControlInput{});
  ASSERT_EQ(phi.size(), 25);
  EXPECT_EQ(phi(0), 1.0);
  EXPECT_EQ(phi.tail(24).squaredNorm(), 0.0);
}

TEST(Basis, HandEvaluatedTerms) {
  const LanderState x{1, 1, 0, 1, 1, 1};
  const ControlInput u{1, 1};
  Eigen::VectorXd expect(25);
  expect << 1,                 // constant
      1, 1, 0, 1, 1, 1,        // states
      1, 1,                    // controls
      1, 1, 0, 1, 1, 1,        // u1 * x
      1, 1, 0, 1, 1, 1,        // u2 * x
      1, 0, 1, 0;              // u1 cos, u1 sin, u2 cos, u2 sin
  EXPECT_EQ(Basis(BasisKind::kNonlinear).eval(x, u), expect);

  Eigen::VectorXd lin(9);
  lin << 1, 1, 1, 0, 1, 1, 1, 1, 1;
  EXPECT_EQ(Basis(BasisKind::kLinear).eval(x, u), lin);
}

TEST(Basis, TermNamesAndKinds) {
  EXPECT_EQ(Basis::term_name(0), "1");
  EXPECT_EQ(Basis::term_name(22), "u1*sin(x3)");
  EXPECT_EQ(basis_kind_from_string(to_string(BasisKind::kLinear)), BasisKind::kLinear);
  EXPECT_EQ(basis_kind_from_string(to_string(BasisKind::kNonlinear)), BasisKind::kNonlinear);
  EXPECT_THROW(basis_kind_from_string("cubic"), Error);
}

TEST(Basis, JacobianSpotValues) {
  const Basis b(BasisKind::kNonlinear);
  StateVector x = StateVector::Zero();
  Eigen::MatrixXd jx, ju;
  b.jacobians(x, ControlVector(2.0, 0.0), jx, ju);
  EXPECT_EQ(jx.row(0).squaredNorm(), 0.0);
  EXPECT_EQ(ju.row(0).squaredNorm(), 0.0);
  EXPECT_DOUBLE_EQ(jx(22, 2), 2.0);  // d(u1 sin x3)/dx3 = u1 cos x3
  EXPECT_DOUBLE_EQ(ju(22, 0), 0.0);  // d(u1 sin x3)/du1 = sin x3
}

class BasisJacobian : public ::testing::TestWithParam<BasisKind> {};

TEST_P(BasisJacobian, MatchesCentralDifferences) {
  const Basis b(GetParam());
  const int d = b.dim();
  constexpr double h = 1e-6;
  Eigen::VectorXd plus(d), minus(d);
  for (int n = 0; n < 200; ++n) {
    const StateVector x = random_state();
    const ControlVector u = random_control();
    Eigen::MatrixXd jx, ju;
    b.jacobians(x, u, jx, ju);
    ASSERT_EQ(jx.rows(), d);
    ASSERT_EQ(ju.cols(), 2);
    for (int i = 0; i < 6; ++i) {
      StateVector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      b.eval(xp, u, plus);
      b.eval(xm, u, minus);
      const Eigen::VectorXd fd = (plus - minus) / (2 * h);
      EXPECT_LE((jx.col(i) - fd).norm() / std::max(1.0, fd.norm()), 1e-6);
    }
    for (int i = 0; i < 2; ++i) {
      ControlVector up = u, um = u;
      up(i) += h;
      um(i) -= h;
      b.eval(x, up, plus);
      b.eval(x, um, minus);
      const Eigen::VectorXd fd = (plus - minus) / (2 * h);
      EXPECT_LE((ju.col(i) - fd).norm() / std::max(1.0, fd.norm()), 1e-6);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, BasisJacobian,
                         ::testing::Values(BasisKind::kLinear, BasisKind::kNonlinear));

// --- EDMD --------------------------------------------------------------------

// Closed-form least squares for the scalar map x' = 0.9 x in the dictionary
// (1, x): the normal equations give K(1,1) = sum x x' / sum x^2.
TEST(Edmd, ScalarMultiplier) {
  EdmdAccumulator acc(2);
  double x = 2.0, sxx = 0.0, sxy = 0.0;
  for (int t = 0; t < 40; ++t) {
    const double next = 0.9 * x;
    acc.add(Eigen::Vector2d(1.0, x), Eigen::Vector2d(1.0, next));
    sxx += x * x;
    sxy += x * next;
    x = next;
  }
  const Eigen::MatrixXd k = acc.solve(0.0);
  EXPECT_NEAR(k(1, 1), 0.9, 1e-8);
  EXPECT_NEAR(k(1, 1), sxy / sxx, 1e-8);
  EXPECT_NEAR(k(0, 0), 1.0, 1e-8);
}

TEST(Edmd, RecoversGroundTruthOperator) {
  const Basis basis(BasisKind::kNonlinear);
  Eigen::MatrixXd k_true(25, 25);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) k_true(i, j) = uni(-0.2, 0.2);
  EdmdAccumulator acc(25);
  std::vector<Eigen::VectorXd> phi, next;
  for (int t = 0; t < 300; ++t) {
    Eigen::VectorXd p(25);
    basis.eval(random_state(), random_control(), p);
    phi.push_back(p);
    next.push_back(k_true.transpose() * p);
    acc.add(phi.back(), next.back());
  }
  const Eigen::MatrixXd k = acc.solve(0.0);
  EXPECT_LE((k - k_true).norm(), 1e-6);
  EXPECT_LE(edmd_residual(k, phi, next), 1e-8);
}

TEST(Edmd, DuplicatedDatasetGivesSameOperator) {
  std::vector<SnapshotPair> pairs;
  for (int i = 0; i < 80; ++i) pairs.push_back(random_pair());
  std::vector<SnapshotPair> doubled = pairs;
  doubled.insert(doubled.end(), pairs.begin(), pairs.end());
  const KoopmanModel a = fit(pairs, BasisKind::kNonlinear);
  const KoopmanModel b = fit(doubled, BasisKind::kNonlinear);
  EXPECT_LE((a.k() - b.k()).norm(), 1e-9 * std::max(1.0, a.k().norm()));
}

TEST(Edmd, IncrementalMatchesBatch) {
  std::vector<SnapshotPair> pairs;
  for (int i = 0; i < 100; ++i) pairs.push_back(random_pair());
  KoopmanModel inc(BasisKind::kNonlinear);
  for (const auto& p : pairs) inc = update(std::move(inc), p);
  const KoopmanModel batch = fit(pairs, BasisKind::kNonlinear);
  EXPECT_EQ(inc.samples(), 100);
  EXPECT_LE((inc.k() - batch.k()).norm(), 1e-8);
}

TEST(Edmd, SingletonBaseCase) {
  const SnapshotPair p = random_pair();
  KoopmanModel m(BasisKind::kNonlinear);
  m.update(p);
  const KoopmanModel f = fit(std::span(&p, 1), BasisKind::kNonlinear);
  EXPECT_EQ(m.k(), f.k());
  EXPECT_EQ(m.g(), f.g());
}

TEST(Edmd, NonFiniteRejectedWithoutSideEffects) {
  KoopmanModel m(BasisKind::kNonlinear);
  m.update(random_pair());
  const Eigen::MatrixXd before = m.k();
  SnapshotPair bad = random_pair();
  bad.next_state.vx = NAN;
  try {
    m.update(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
  EXPECT_EQ(m.samples(), 1);
  EXPECT_EQ(m.k(), before);
}

TEST(Edmd, UnfittedModelRefusesToPredict) {
  const KoopmanModel m(BasisKind::kNonlinear);
  EXPECT_FALSE(m.has_operator());
  try {
    m.predict(LanderState{}, ControlInput{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFitted);
  }
}

// --- prediction and linearization -------------------------------------------

// Exact recovery: no Tikhonov bias.
KoopmanModel identity_model(BasisKind kind) {
  std::vector<SnapshotPair> pairs;
  for (int i = 0; i < 200; ++i) {
    const LanderState s = LanderState::from(random_state());
    pairs.push_back({s, {}, s, {}});
  }
  return fit(pairs, kind, 0.0);
}

TEST(Prediction, IdentityMapFit) {
  const KoopmanModel m = identity_model(BasisKind::kNonlinear);
  for (int i = 0; i < 20; ++i) {
    const StateVector x = random_state();
    EXPECT_LE((m.predict(x, ControlVector::Zero()) - x).norm(), 1e-6);
    const Linearization lin = m.linearize(x, ControlVector::Zero());
    EXPECT_LE((lin.a - Eigen::Matrix<double, 6, 6>::Identity()).norm(), 1e-6);
    EXPECT_LE(lin.b.norm(), 1e-6);
  }
}

TEST(Prediction, LinearBasisHasConstantJacobians) {
  std::vector<SnapshotPair> pairs;
  for (int i = 0; i < 100; ++i) pairs.push_back(random_pair());
  const KoopmanModel m = fit(pairs, BasisKind::kLinear);
  const Linearization ref = m.linearize(random_state(), random_control());
  for (int i = 0; i < 10; ++i) {
    const Linearization l = m.linearize(random_state(), random_control());
    EXPECT_LE((l.a - ref.a).norm(), 1e-12);
    EXPECT_LE((l.b - ref.b).norm(), 1e-12);
  }
}

TEST(Prediction, LinearizationMatchesFiniteDifferences) {
  KoopmanModel m(BasisKind::kNonlinear);
  Eigen::MatrixXd k(25, 25);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) k(i, j) = uni(-1, 1);
  m.set_operator(k);
  constexpr double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    const StateVector x = random_state();
    const ControlVector u = random_control();
    const Linearization lin = m.linearize(x, u);
    for (int i = 0; i < 6; ++i) {
      StateVector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const StateVector fd = (m.predict(xp, u) - m.predict(xm, u)) / (2 * h);
      EXPECT_LE((lin.a.col(i) - fd).norm() / std::max(1.0, fd.norm()), 1e-5);
    }
    for (int i = 0; i < 2; ++i) {
      ControlVector up = u, um = u;
      up(i) += h;
      um(i) -= h;
      const StateVector fd = (m.predict(x, up) - m.predict(x, um)) / (2 * h);
      EXPECT_LE((lin.b.col(i) - fd).norm() / std::max(1.0, fd.norm()), 1e-5);
    }
  }
}

TEST(Prediction, ExpertModelOneStepAccuracy) {
  const auto& d = expert_data();
  const KoopmanModel m = fit(snapshot_pairs(d.train), BasisKind::kNonlinear);
  std::vector<double> err;
  for (const auto& p : snapshot_pairs(d.held)) {
    const LanderState n = m.predict(p.state, p.control);
    err.push_back(std::hypot(n.x - p.next_state.x, n.y - p.next_state.y));
  }
  std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
  EXPECT_LE(err[err.size() / 2], 1e-2);
}

TEST(Prediction, HStepErrorNonDecreasing) {
  const auto& d = expert_data();
  const KoopmanModel m = fit(snapshot_pairs(d.train), BasisKind::kNonlinear);
  std::vector<std::vector<SnapshotPair>> traj;
  for (const auto& t : d.held) traj.push_back(snapshot_pairs(t));
  const HStepStats s = h_step_error(m, traj, 30);
  ASSERT_EQ(s.mean.size(), 30u);
  for (std::size_t h = 1; h < s.mean.size(); ++h) {
    EXPECT_GE(s.mean[h], s.mean[h - 1]) << "H=" << h + 1;
    EXPECT_LE(s.count[h], s.count[h - 1]);
  }
}

// --- online ------------------------------------------------------------------

TEST(Online, RandomInitConvergesToOfflineAccuracy) {
  const auto& d = expert_data();
  const KoopmanModel offline = fit(snapshot_pairs(d.train), BasisKind::kNonlinear);

  const KoopmanModel init = KoopmanModel::random_init(BasisKind::kNonlinear, 1e-6, 9);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) {
      EXPECT_GE(init.k()(i, j), 0.0);
      EXPECT_LT(init.k()(i, j), 1.0);
    }
  OnlineLearner learner(init);
  const auto stream = snapshot_pairs(collect_demonstrations(PilotConfig::expert(), 20, {}, 13));
  ASSERT_GE(stream.size(), 900u);
  for (std::size_t i = 0; i < 900; ++i) learner.observe(stream[i]);
  EXPECT_EQ(learner.samples(), 900);

  const auto held = snapshot_pairs(d.held);
  EXPECT_LE(mean_one_step_error(*learner.snapshot(), held),
            2.0 * mean_one_step_error(offline, held));
}

TEST(Online, SnapshotIsStableAcrossUpdates) {
  OnlineLearner learner(KoopmanModel::random_init(BasisKind::kNonlinear, 1e-6, 1));
  const auto first = learner.snapshot();
  const Eigen::MatrixXd k0 = first->k();
  learner.observe(random_pair());
  EXPECT_EQ(first->k(), k0);
  EXPECT_NE(learner.snapshot()->k(), k0);
}

// --- persistence -------------------------------------------------------------

TEST(Persistence, SaveLoadIsExact) {
  std::vector<SnapshotPair> pairs;
  for (int i = 0; i < 50; ++i) pairs.push_back(random_pair());
  for (BasisKind kind : {BasisKind::kLinear, BasisKind::kNonlinear}) {
    const KoopmanModel m = fit(pairs, kind, 3e-5);
    std::stringstream ss;
    m.save(ss);
    const KoopmanModel r = KoopmanModel::load(ss);
    EXPECT_EQ(r.basis().kind(), kind);
    EXPECT_EQ(r.epsilon(), 3e-5);
    EXPECT_EQ(r.samples(), 50);
    EXPECT_EQ(r.k(), m.k());
    EXPECT_EQ(r.g(), m.g());
    EXPECT_EQ(r.a(), m.a());
    // Continued learning after reload matches continued learning in memory.
    KoopmanModel a = m, b = r;
    const SnapshotPair p = random_pair();
    a.update(p);
    b.update(p);
    EXPECT_LE((a.k() - b.k()).norm(), 1e-10 * a.k().norm());
  }
}

TEST(Persistence, CorruptFilesRejected) {
  auto load = [](const std::string& text) {
    std::istringstream is(text);
    try {
      KoopmanModel::load(is);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kRuntime;
  };
  EXPECT_EQ(load(""), ErrorCode::kModel);
  EXPECT_EQ(load("not-a-model 1\n"), ErrorCode::kModel);
  EXPECT_EQ(load("mbsc-koopman 99\n"), ErrorCode::kModel);

  std::stringstream ss;
  KoopmanModel::random_init(BasisKind::kLinear, 1e-6, 1).save(ss);
  std::string text = ss.str();
  EXPECT_EQ(load(text.substr(0, text.size() / 2)), ErrorCode::kModel);
  const auto at = text.find("terms_version 1");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 15, "terms_version 7");
  EXPECT_EQ(load(text), ErrorCode::kModel);
}

}  // namespace
}  // namespace mbsc
