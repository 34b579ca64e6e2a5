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

// Koopman operator approximation over a fixed observable dictionary.
//
// Observables are column vectors phi(x, u). The operator K acts as
//   phi(x_{t+1}, u_{t+1}) ~= K^T phi(x_t, u_t)
// and is the least-squares solution K = (G + eps I)^+ A with
//   G = (1/T) sum phi_t phi_t^T,   A = (1/T) sum phi_t phi_{t+1}^T.

#ifndef MBSC_KOOPMAN_HPP
#define MBSC_KOOPMAN_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbsc/types.hpp"

namespace mbsc {

enum class BasisKind { kLinear, kNonlinear };

std::string_view to_string(BasisKind kind);
BasisKind basis_kind_from_string(std::string_view s);

// Term order is frozen; bump kTermsVersion if it ever changes.
//
//   0        1
//   1..6     x1..x6
//   7..8     u1, u2
//   9..14    u1*x1 .. u1*x6
//   15..20   u2*x1 .. u2*x6
//   21..24   u1 cos x3, u1 sin x3, u2 cos x3, u2 sin x3
//
// The linear dictionary is the first nine terms.
class Basis {
 public:
  static constexpr int kTermsVersion = 1;
  static constexpr int kLinearDim = 9;
  static constexpr int kNonlinearDim = 25;

  explicit Basis(BasisKind kind = BasisKind::kNonlinear) : kind_(kind) {}

  BasisKind kind() const { return kind_; }
  int dim() const { return kind_ == BasisKind::kLinear ? kLinearDim : kNonlinearDim; }

  // Positions in phi holding the pure state terms x1..x6.
  static constexpr std::array<int, kStateDim> state_indices() { return {1, 2, 3, 4, 5, 6}; }
  static std::string_view term_name(int i);

  Eigen::VectorXd eval(const LanderState& x, const ControlInput& u) const;
  void eval(const StateVector& x, const ControlVector& u, Eigen::Ref<Eigen::VectorXd> out) const;

  // Analytic partials: dphi_dx is D x 6, dphi_du is D x 2.
  void jacobians(const StateVector& x, const ControlVector& u, Eigen::MatrixXd& dphi_dx,
                 Eigen::MatrixXd& dphi_du) const;

 private:
  BasisKind kind_;
};

struct SnapshotPair {
  LanderState state;
  ControlInput control;
  LanderState next_state;
  ControlInput next_control;

  bool finite() const {
    return state.finite() && control.finite() && next_state.finite() && next_control.finite();
  }
};

// Running sums of phi outer products in an arbitrary dictionary.
class EdmdAccumulator {
 public:
  EdmdAccumulator() = default;
  explicit EdmdAccumulator(int dim);

  int dim() const { return static_cast<int>(g_sum_.rows()); }
  std::int64_t count() const { return count_; }

  void add(const Eigen::VectorXd& phi, const Eigen::VectorXd& phi_next);

  // Averaged accumulators; zero when empty.
  Eigen::MatrixXd g() const;
  Eigen::MatrixXd a() const;

  // Replaces the sums with averaged matrices over `count` samples.
  void assign(const Eigen::MatrixXd& g, const Eigen::MatrixXd& a, std::int64_t count);

  // K = (G + eps I)^+ A. `rank_deficient` reports a singular regularized Gram.
  Eigen::MatrixXd solve(double eps, bool* rank_deficient = nullptr) const;

 private:
  Eigen::MatrixXd g_sum_;
  Eigen::MatrixXd a_sum_;
  std::int64_t count_ = 0;
};

// Least-squares residual 0.5 * sum |phi_next - K^T phi|^2.
double edmd_residual(const Eigen::MatrixXd& k, std::span<const Eigen::VectorXd> phi,
                     std::span<const Eigen::VectorXd> phi_next);

struct Linearization {
  Eigen::Matrix<double, kStateDim, kStateDim> a;
  Eigen::Matrix<double, kStateDim, kControlDim> b;
};

class KoopmanModel {
 public:
  static constexpr double kDefaultEpsilon = 1e-6;
  static constexpr int kFormatVersion = 1;

  KoopmanModel() : KoopmanModel(BasisKind::kNonlinear) {}
  explicit KoopmanModel(BasisKind kind, double epsilon = kDefaultEpsilon);

  // Every entry of K drawn from U[0, 1). Accumulators stay empty and are
  // replaced by the least-squares solution on the first update.
  static KoopmanModel random_init(BasisKind kind, double epsilon, std::uint64_t seed);

  const Basis& basis() const { return basis_; }
  double epsilon() const { return epsilon_; }
  std::int64_t samples() const { return acc_.count(); }
  bool has_operator() const { return has_operator_; }
  bool rank_deficient() const { return rank_deficient_; }

  const Eigen::MatrixXd& k() const { return k_; }
  Eigen::MatrixXd g() const { return acc_.g(); }
  Eigen::MatrixXd a() const { return acc_.a(); }

  // Folds one pair in and refreshes K. Non-finite pairs are rejected with
  // Error(kNonFinite) and leave the model untouched.
  void update(const SnapshotPair& pair);
  // Folds pairs in without refreshing; call refresh() afterwards.
  void accumulate(const SnapshotPair& pair);
  void refresh();

  LanderState predict(const LanderState& x, const ControlInput& u) const;
  StateVector predict(const StateVector& x, const ControlVector& u) const;
  Linearization linearize(const StateVector& x, const ControlVector& u) const;

  // Replaces the operator directly (tests, imported models).
  void set_operator(const Eigen::MatrixXd& k);

  void save(std::ostream& os) const;
  static KoopmanModel load(std::istream& is);
  void save_file(const std::string& path) const;
  static KoopmanModel load_file(const std::string& path);

 private:
  void require_operator(const char* what) const;

  Basis basis_;
  double epsilon_;
  EdmdAccumulator acc_;
  Eigen::MatrixXd k_;
  bool has_operator_ = false;
  bool rank_deficient_ = false;
};

KoopmanModel fit(std::span<const SnapshotPair> dataset, BasisKind kind,
                 double epsilon = KoopmanModel::kDefaultEpsilon);
KoopmanModel update(KoopmanModel model, const SnapshotPair& pair);

// Online learner: owns the accumulators, publishes immutable snapshots.
class OnlineLearner {
 public:
  explicit OnlineLearner(KoopmanModel initial);

  // Rejects non-finite pairs (Error(kNonFinite)) leaving the model unchanged.
  void observe(const SnapshotPair& pair);

  std::shared_ptr<const KoopmanModel> snapshot() const { return snapshot_; }
  const KoopmanModel& model() const { return model_; }
  std::int64_t samples() const { return model_.samples(); }

 private:
  KoopmanModel model_;
  std::shared_ptr<const KoopmanModel> snapshot_;
};

// Open-loop error of iterating predict() H steps with the logged controls,
// measured as Euclidean (x, y) distance. Index h-1 holds horizon h.
struct HStepStats {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<std::int64_t> count;
};
HStepStats h_step_error(const KoopmanModel& model,
                        std::span<const std::vector<SnapshotPair>> trajectories, int max_h);

}  // namespace mbsc

#endif  // MBSC_KOOPMAN_HPP
