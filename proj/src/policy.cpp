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

#include "mbsc/policy.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace mbsc {

CostWeights CostWeights::for_goal(const LanderState& goal) {
  CostWeights w;
  w.goal = goal.vec();
  return w;
}

void CostWeights::validate() const {
  if ((q.array() < 0).any() || (qt.array() < 0).any())
    throw Error(ErrorCode::kConfig, "state cost weights must be non-negative");
  if (!(r.array() > 0).all()) throw Error(ErrorCode::kConfig, "control cost weights must be positive");
  if (!goal.allFinite()) throw Error(ErrorCode::kConfig, "goal state must be finite");
}

double running_cost(const StateVector& x, const ControlVector& u, const CostWeights& w) {
  const StateVector e = x - w.goal;
  return 0.5 * e.dot(w.q.cwiseProduct(e)) + 0.5 * u.dot(w.r.cwiseProduct(u));
}

double terminal_cost(const StateVector& x, const CostWeights& w) {
  const StateVector e = x - w.goal;
  return 0.5 * e.dot(w.qt.cwiseProduct(e));
}

StateVector running_cost_grad(const StateVector& x, const CostWeights& w) {
  return w.q.cwiseProduct(x - w.goal);
}

StateVector terminal_cost_grad(const StateVector& x, const CostWeights& w) {
  return w.qt.cwiseProduct(x - w.goal);
}

std::string_view to_string(SolverKind kind) { return kind == SolverKind::kLqr ? "lqr" : "sac"; }

SolverKind solver_kind_from_string(std::string_view s) {
  if (s == "lqr" || s == "LQR") return SolverKind::kLqr;
  if (s == "sac" || s == "SAC") return SolverKind::kSac;
  throw Error(ErrorCode::kInvalidArgument, "unknown solver kind: " + std::string(s));
}

void MpcParams::validate() const {
  if (horizon < 1) throw Error(ErrorCode::kConfig, "horizon must be >= 1");
  if (!(dt > 0)) throw Error(ErrorCode::kConfig, "prediction dt must be > 0");
  if (!(descent_factor < 0)) throw Error(ErrorCode::kConfig, "descent factor must be negative");
  if (durations.empty()) throw Error(ErrorCode::kConfig, "duration grid is empty");
  for (int d : durations)
    if (d < 1 || d > horizon) throw Error(ErrorCode::kConfig, "duration outside [1, horizon]");
  if (scales.empty()) throw Error(ErrorCode::kConfig, "scale grid is empty");
  if (nominal(0) < kMainMin || nominal(0) > kMainMax || nominal(1) < kSideMin ||
      nominal(1) > kSideMax)
    throw Error(ErrorCode::kConfig, "nominal control outside saturation bounds");
}

namespace {

double spectral_radius(const Matrix6& m) {
  Eigen::EigenSolver<Matrix6> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix6 riccati_step(const Matrix6& a, const Matrix6x2& b, const Matrix6& q, const Matrix2& r,
                     const Matrix6& p) {
  const Matrix2 s = r + b.transpose() * p * b;
  const Matrix2x6 bpa = b.transpose() * p * a;
  return q + a.transpose() * p * a - bpa.transpose() * s.ldlt().solve(bpa);
}

}  // namespace

LqrResult lqr_gain(const Matrix6& a, const Matrix6x2& b, const CostWeights& w, double tol,
                   int max_iterations) {
  const Matrix6 q = w.q.asDiagonal();
  const Matrix2 r = w.r.asDiagonal();
  LqrResult out;
  Matrix6 p = q;
  bool converged = false;
  for (int it = 1; it <= max_iterations; ++it) {
    const Matrix6 next = riccati_step(a, b, q, r, p);
    if (!next.allFinite()) break;
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    out.iterations = it;
    if (change < tol) {
      converged = true;
      break;
    }
  }
  const Matrix2 s = r + b.transpose() * p * b;
  out.gain = s.ldlt().solve(b.transpose() * p * a);
  out.p = p;
  const Matrix6 closed = a - b * out.gain;
  out.spectral_radius = closed.allFinite() ? spectral_radius(closed)
                                           : std::numeric_limits<double>::infinity();
  if (!converged || !(out.spectral_radius < 1.0))
    throw Error(ErrorCode::kSolver,
                "LQR did not converge to a stabilizing gain (closed-loop spectral radius " +
                    std::to_string(out.spectral_radius) + ")");
  return out;
}

double dare_residual(const Matrix6& a, const Matrix6x2& b, const CostWeights& w,
                     const Matrix6& p) {
  const Matrix6 q = w.q.asDiagonal();
  const Matrix2 r = w.r.asDiagonal();
  return (riccati_step(a, b, q, r, p) - p).cwiseAbs().maxCoeff();
}

double rollout_cost(const KoopmanModel& model, const StateVector& x0,
                    const std::vector<ControlVector>& controls, const CostWeights& w) {
  StateVector x = x0;
  double j = 0.0;
  for (const auto& u : controls) {
    j += running_cost(x, u, w);
    x = model.predict(x, u);
  }
  return j + terminal_cost(x, w);
}

namespace {

ControlVector clamp_vec(const ControlVector& u) {
  return saturate(ControlInput::from(u)).vec();
}

}  // namespace

SacResult sac_action(const KoopmanModel& model, const LanderState& state, const CostWeights& w,
                     const MpcParams& params) {
  if (!model.has_operator()) throw Error(ErrorCode::kNotFitted, "sac_action: model is not fitted");
  const int horizon = params.horizon;
  const ControlVector u_nom = params.nominal;
  const StateVector x0 = state.vec();

  SacResult out;
  out.action = ControlInput::from(u_nom);
  out.fallback = true;

  // Nominal rollout.
  std::vector<StateVector> xs(horizon + 1);
  xs[0] = x0;
  for (int t = 0; t < horizon; ++t) xs[t + 1] = model.predict(xs[t], u_nom);
  const std::vector<ControlVector> nominal_seq(horizon, u_nom);
  out.nominal_cost = rollout_cost(model, x0, nominal_seq, w);
  out.action_cost = out.nominal_cost;
  if (!std::isfinite(out.nominal_cost)) return out;

  // Adjoint along the nominal rollout: rho[t] holds rho_t for t = 1..T.
  std::vector<Linearization> lin(horizon);
  for (int t = 0; t < horizon; ++t) lin[t] = model.linearize(xs[t], u_nom);
  std::vector<StateVector> rho(horizon + 1);
  rho[horizon] = terminal_cost_grad(xs[horizon], w);
  for (int t = horizon - 1; t >= 1; --t)
    rho[t] = running_cost_grad(xs[t], w) + lin[t].a.transpose() * rho[t + 1];

  const double alpha_d = params.descent_factor * out.nominal_cost;
  const Matrix2 r = w.r.asDiagonal();
  std::vector<ControlVector> schedule(horizon);
  double best_gradient = std::numeric_limits<double>::infinity();
  for (int t = 0; t < horizon; ++t) {
    const ControlVector btr = lin[t].b.transpose() * rho[t + 1];
    const Matrix2 lambda = btr * btr.transpose();
    Matrix2 lhs = lambda + r.transpose();
    const ControlVector rhs = lambda * u_nom + btr * alpha_d;
    Eigen::FullPivLU<Matrix2> lu(lhs);
    if (!lu.isInvertible()) {
      lhs += 1e-8 * Matrix2::Identity();
      lu.compute(lhs);
      out.regularized = true;
    }
    schedule[t] = lu.solve(rhs);
    const double gradient =
        rho[t + 1].dot(model.predict(xs[t], schedule[t]) - model.predict(xs[t], u_nom));
    if (gradient < best_gradient) {
      best_gradient = gradient;
      out.insertion_step = t;
    }
  }

  // Score saturated bursts applied from now; keep the cheapest.
  std::vector<ControlVector> candidates;
  for (const ControlVector& base : {schedule[out.insertion_step], schedule[0]})
    for (double s : params.scales) candidates.push_back(clamp_vec(u_nom + s * (base - u_nom)));

  std::vector<ControlVector> seq = nominal_seq;
  for (const auto& cand : candidates) {
    if (!cand.allFinite()) continue;
    for (int d : params.durations) {
      for (int t = 0; t < horizon; ++t) seq[t] = t < d ? cand : u_nom;
      const double j = rollout_cost(model, x0, seq, w);
      if (std::isfinite(j) && j < out.action_cost) {
        out.action_cost = j;
        out.action = ControlInput::from(cand);
        out.duration = d;
        out.descent = true;
        out.fallback = false;
      }
    }
  }
  return out;
}

ControlInput model_trim(const KoopmanModel& model, const LanderState& goal) {
  const StateVector xd = goal.vec();
  ControlVector u = ControlVector::Zero();
  for (int it = 0; it < 20; ++it) {
    const StateVector res = model.predict(xd, u) - xd;
    const Matrix6x2 b = model.linearize(xd, u).b;
    const ControlVector du = (b.transpose() * b + 1e-9 * Matrix2::Identity()).ldlt().solve(
        -b.transpose() * res);
    u += du;
    if (du.norm() < 1e-12) break;
  }
  if (!u.allFinite()) return {};
  return saturate(ControlInput::from(u));
}

AutonomyController::AutonomyController(std::shared_ptr<const KoopmanModel> model,
                                       CostWeights weights, MpcParams params)
    : model_(std::move(model)), weights_(std::move(weights)), params_(std::move(params)) {
  if (!model_) throw Error(ErrorCode::kInvalidArgument, "controller needs a model");
  weights_.validate();
  params_.validate();
  apply_trim();
}

void AutonomyController::apply_trim() {
  if (params_.trim_nominal)
    params_.nominal = model_trim(*model_, LanderState::from(weights_.goal)).vec();
}

void AutonomyController::set_model(std::shared_ptr<const KoopmanModel> model) {
  if (!model) throw Error(ErrorCode::kInvalidArgument, "controller needs a model");
  model_ = std::move(model);
  lqr_.reset();
  apply_trim();
}

const LqrResult& AutonomyController::lqr() {
  if (!lqr_) {
    const Linearization lin = model_->linearize(weights_.goal, params_.nominal);
    lqr_ = lqr_gain(lin.a, lin.b, weights_);
  }
  return *lqr_;
}

ControlInput AutonomyController::command(const LanderState& state, CommandTelemetry* telemetry) {
  if (!state.finite()) throw Error(ErrorCode::kNonFinite, "controller: non-finite state");
  const auto start = std::chrono::steady_clock::now();
  ControlInput u;
  CommandTelemetry tel;
  if (params_.solver == SolverKind::kLqr) {
    const ControlVector raw = params_.nominal - lqr().gain * (state.vec() - weights_.goal);
    u = saturate(ControlInput::from(raw));
    tel.descent = true;
  } else {
    const SacResult r = sac_action(*model_, state, weights_, params_);
    u = saturate(r.action);
    tel.descent = r.descent;
    tel.fallback = r.fallback;
  }
  tel.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (telemetry) *telemetry = tel;
  return u;
}

}  // namespace mbsc
