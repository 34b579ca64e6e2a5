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

#ifndef MBSC_POLICY_HPP
#define MBSC_POLICY_HPP

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "mbsc/koopman.hpp"
#include "mbsc/lander.hpp"
#include "mbsc/types.hpp"

namespace mbsc {

using Matrix6 = Eigen::Matrix<double, kStateDim, kStateDim>;
using Matrix6x2 = Eigen::Matrix<double, kStateDim, kControlDim>;
using Matrix2x6 = Eigen::Matrix<double, kControlDim, kStateDim>;
using Matrix2 = Eigen::Matrix<double, kControlDim, kControlDim>;

// Diagonal quadratic trial cost around the goal state.
struct CostWeights {
  StateVector q = (StateVector() << 6.0, 10.0, 20.0, 2.0, 2.0, 3.0).finished();
  StateVector qt = (StateVector() << 3.0, 3.0, 5.0, 1.0, 1.0, 1.0).finished();
  ControlVector r = ControlVector(0.1, 0.1);
  StateVector goal = StateVector::Zero();

  static CostWeights for_goal(const LanderState& goal);
  void validate() const;
};

double running_cost(const StateVector& x, const ControlVector& u, const CostWeights& w);
double terminal_cost(const StateVector& x, const CostWeights& w);
StateVector running_cost_grad(const StateVector& x, const CostWeights& w);
StateVector terminal_cost_grad(const StateVector& x, const CostWeights& w);

enum class SolverKind { kLqr, kSac };
std::string_view to_string(SolverKind kind);
SolverKind solver_kind_from_string(std::string_view s);

struct MpcParams {
  int horizon = 10;
  double dt = 0.1;
  ControlVector nominal = ControlVector::Zero();
  // alpha_d = descent_factor * (nominal trajectory cost).
  double descent_factor = -10.0;
  // Number of steps the candidate burst is held for when it is scored.
  std::vector<int> durations{1};
  // Fractions of (u* - u_nom) tried when scoring candidates.
  std::vector<double> scales{1.0, 0.5, 0.25};
  SolverKind solver = SolverKind::kSac;
  // AutonomyController: replace `nominal` with the model's hover trim at the
  // goal whenever a model is installed.
  bool trim_nominal = true;

  void validate() const;
};

struct LqrResult {
  Matrix2x6 gain;
  Matrix6 p;
  int iterations = 0;
  double spectral_radius = 0.0;
};

// Iterates the discrete Riccati recursion from P = Q until the max-norm step
// drops below `tol`. Throws Error(kSolver) naming the closed-loop spectral
// radius when the iteration does not settle or the loop is not stable.
LqrResult lqr_gain(const Matrix6& a, const Matrix6x2& b, const CostWeights& w,
                   double tol = 1e-9, int max_iterations = 10000);

// max |Q + A'PA - A'PB (R + B'PB)^-1 B'PA - P|.
double dare_residual(const Matrix6& a, const Matrix6x2& b, const CostWeights& w, const Matrix6& p);

// Cost of rolling `controls` through the model from x0; the last state is
// charged the terminal cost.
double rollout_cost(const KoopmanModel& model, const StateVector& x0,
                    const std::vector<ControlVector>& controls, const CostWeights& w);

struct SacResult {
  ControlInput action;
  bool descent = false;      // strictly improved on the nominal rollout
  bool fallback = false;     // returned the nominal control
  bool regularized = false;  // (Lambda + R) needed a ridge
  int insertion_step = 0;    // argmin of the mode-insertion gradient
  int duration = 1;          // steps the scored burst is held
  double nominal_cost = 0.0;
  double action_cost = 0.0;
};

// Single-burst receding-horizon action from the learned dynamics.
SacResult sac_action(const KoopmanModel& model, const LanderState& state, const CostWeights& w,
                     const MpcParams& params);

// Control that holds `goal` fixed under the model, by Gauss-Newton on u.
ControlInput model_trim(const KoopmanModel& model, const LanderState& goal);

struct CommandTelemetry {
  double latency_ms = 0.0;
  bool descent = false;
  bool fallback = false;
  bool failed = false;  // solver fault, command zeroed
};

// Uniform front over the two solvers. Holds an immutable model snapshot;
// swap it with set_model() when the learner publishes a new one.
class AutonomyController {
 public:
  AutonomyController(std::shared_ptr<const KoopmanModel> model, CostWeights weights,
                     MpcParams params);

  void set_model(std::shared_ptr<const KoopmanModel> model);
  const KoopmanModel& model() const { return *model_; }
  const MpcParams& params() const { return params_; }
  const CostWeights& weights() const { return weights_; }

  // Saturated command. Solver faults propagate.
  ControlInput command(const LanderState& state, CommandTelemetry* telemetry = nullptr);

  // For LQR: the cached gain for the current model (computed lazily).
  const LqrResult& lqr();

 private:
  std::shared_ptr<const KoopmanModel> model_;
  CostWeights weights_;
  MpcParams params_;
  std::optional<LqrResult> lqr_;
  void apply_trim();
};

}  // namespace mbsc

#endif  // MBSC_POLICY_HPP
