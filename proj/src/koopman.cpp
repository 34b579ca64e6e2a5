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

#include "mbsc/koopman.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace mbsc {

std::string_view to_string(BasisKind kind) {
  return kind == BasisKind::kLinear ? "linear" : "nonlinear";
}

BasisKind basis_kind_from_string(std::string_view s) {
  if (s == "linear" || s == "Linear") return BasisKind::kLinear;
  if (s == "nonlinear" || s == "Nonlinear") return BasisKind::kNonlinear;
  throw Error(ErrorCode::kInvalidArgument, "unknown basis kind: " + std::string(s));
}

namespace {
constexpr std::array<std::string_view, Basis::kNonlinearDim> kTermNames = {
    "1",        "x1",       "x2",       "x3",       "x4",       "x5",       "x6",
    "u1",       "u2",       "u1*x1",    "u1*x2",    "u1*x3",    "u1*x4",    "u1*x5",
    "u1*x6",    "u2*x1",    "u2*x2",    "u2*x3",    "u2*x4",    "u2*x5",    "u2*x6",
    "u1*cos(x3)", "u1*sin(x3)", "u2*cos(x3)", "u2*sin(x3)"};
}  // namespace

std::string_view Basis::term_name(int i) { return kTermNames.at(static_cast<std::size_t>(i)); }

Eigen::VectorXd Basis::eval(const LanderState& x, const ControlInput& u) const {
  Eigen::VectorXd out(dim());
  eval(x.vec(), u.vec(), out);
  return out;
}

void Basis::eval(const StateVector& x, const ControlVector& u,
                 Eigen::Ref<Eigen::VectorXd> out) const {
  out(0) = 1.0;
  out.segment<kStateDim>(1) = x;
  out.segment<kControlDim>(7) = u;
  if (kind_ == BasisKind::kLinear) return;
  out.segment<kStateDim>(9) = u(0) * x;
  out.segment<kStateDim>(15) = u(1) * x;
  const double c = std::cos(x(2));
  const double s = std::sin(x(2));
  out(21) = u(0) * c;
  out(22) = u(0) * s;
  out(23) = u(1) * c;
  out(24) = u(1) * s;
}

void Basis::jacobians(const StateVector& x, const ControlVector& u, Eigen::MatrixXd& dphi_dx,
                      Eigen::MatrixXd& dphi_du) const {
  const int d = dim();
  dphi_dx.setZero(d, kStateDim);
  dphi_du.setZero(d, kControlDim);
  dphi_dx.block<kStateDim, kStateDim>(1, 0).setIdentity();
  dphi_du.block<kControlDim, kControlDim>(7, 0).setIdentity();
  if (kind_ == BasisKind::kLinear) return;
  for (int i = 0; i < kStateDim; ++i) {
    dphi_dx(9 + i, i) = u(0);
    dphi_du(9 + i, 0) = x(i);
    dphi_dx(15 + i, i) = u(1);
    dphi_du(15 + i, 1) = x(i);
  }
  const double c = std::cos(x(2));
  const double s = std::sin(x(2));
  dphi_dx(21, 2) = -u(0) * s;
  dphi_du(21, 0) = c;
  dphi_dx(22, 2) = u(0) * c;
  dphi_du(22, 0) = s;
  dphi_dx(23, 2) = -u(1) * s;
  dphi_du(23, 1) = c;
  dphi_dx(24, 2) = u(1) * c;
  dphi_du(24, 1) = s;
}

EdmdAccumulator::EdmdAccumulator(int dim)
    : g_sum_(Eigen::MatrixXd::Zero(dim, dim)), a_sum_(Eigen::MatrixXd::Zero(dim, dim)) {}

void EdmdAccumulator::add(const Eigen::VectorXd& phi, const Eigen::VectorXd& phi_next) {
  g_sum_.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  a_sum_.noalias() += phi * phi_next.transpose();
  ++count_;
}

Eigen::MatrixXd EdmdAccumulator::g() const {
  if (count_ == 0) return Eigen::MatrixXd::Zero(dim(), dim());
  Eigen::MatrixXd g = g_sum_.selfadjointView<Eigen::Lower>();
  return g / static_cast<double>(count_);
}

Eigen::MatrixXd EdmdAccumulator::a() const {
  if (count_ == 0) return Eigen::MatrixXd::Zero(dim(), dim());
  return a_sum_ / static_cast<double>(count_);
}

void EdmdAccumulator::assign(const Eigen::MatrixXd& g, const Eigen::MatrixXd& a,
                             std::int64_t count) {
  g_sum_ = g * static_cast<double>(count);
  a_sum_ = a * static_cast<double>(count);
  count_ = count;
}

Eigen::MatrixXd EdmdAccumulator::solve(double eps, bool* rank_deficient) const {
  Eigen::MatrixXd gram = g();
  gram.diagonal().array() += eps;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  if (rank_deficient) *rank_deficient = cod.rank() < gram.rows();
  return cod.solve(a());
}

double edmd_residual(const Eigen::MatrixXd& k, std::span<const Eigen::VectorXd> phi,
                     std::span<const Eigen::VectorXd> phi_next) {
  double j = 0.0;
  for (std::size_t t = 0; t < phi.size(); ++t)
    j += (phi_next[t] - k.transpose() * phi[t]).squaredNorm();
  return 0.5 * j;
}

KoopmanModel::KoopmanModel(BasisKind kind, double epsilon)
    : basis_(kind), epsilon_(epsilon), acc_(basis_.dim()),
      k_(Eigen::MatrixXd::Zero(basis_.dim(), basis_.dim())) {
  if (!(epsilon >= 0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be finite and >= 0");
}

KoopmanModel KoopmanModel::random_init(BasisKind kind, double epsilon, std::uint64_t seed) {
  KoopmanModel m(kind, epsilon);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index c = 0; c < m.k_.cols(); ++c)
    for (Eigen::Index r = 0; r < m.k_.rows(); ++r) m.k_(r, c) = unit(rng);
  m.has_operator_ = true;
  return m;
}

void KoopmanModel::accumulate(const SnapshotPair& pair) {
  if (!pair.finite()) throw Error(ErrorCode::kNonFinite, "snapshot pair is not finite");
  acc_.add(basis_.eval(pair.state, pair.control),
           basis_.eval(pair.next_state, pair.next_control));
}

void KoopmanModel::refresh() {
  if (acc_.count() == 0) return;
  k_ = acc_.solve(epsilon_, &rank_deficient_);
  has_operator_ = true;
}

void KoopmanModel::update(const SnapshotPair& pair) {
  accumulate(pair);
  refresh();
}

void KoopmanModel::set_operator(const Eigen::MatrixXd& k) {
  if (k.rows() != basis_.dim() || k.cols() != basis_.dim())
    throw Error(ErrorCode::kInvalidArgument, "operator shape does not match basis");
  k_ = k;
  has_operator_ = true;
}

void KoopmanModel::require_operator(const char* what) const {
  if (!has_operator_) throw Error(ErrorCode::kNotFitted, std::string(what) + ": model is not fitted");
}

StateVector KoopmanModel::predict(const StateVector& x, const ControlVector& u) const {
  require_operator("predict");
  Eigen::VectorXd phi(basis_.dim());
  basis_.eval(x, u, phi);
  StateVector out;
  const auto idx = Basis::state_indices();
  for (int i = 0; i < kStateDim; ++i) out(i) = k_.col(idx[i]).dot(phi);
  return out;
}

LanderState KoopmanModel::predict(const LanderState& x, const ControlInput& u) const {
  return LanderState::from(predict(x.vec(), u.vec()));
}

Linearization KoopmanModel::linearize(const StateVector& x, const ControlVector& u) const {
  require_operator("linearize");
  Eigen::MatrixXd dx, du;
  basis_.jacobians(x, u, dx, du);
  Eigen::Matrix<double, kStateDim, Eigen::Dynamic> recover(kStateDim, basis_.dim());
  const auto idx = Basis::state_indices();
  for (int i = 0; i < kStateDim; ++i) recover.row(i) = k_.col(idx[i]).transpose();
  return {recover * dx, recover * du};
}

namespace {

void write_matrix(std::ostream& os, const char* name, const Eigen::MatrixXd& m) {
  os << name << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& is, const char* name, int d) {
  std::string tag;
  if (!(is >> tag) || tag != name)
    throw Error(ErrorCode::kModel, std::string("model file: expected section ") + name);
  Eigen::MatrixXd m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      if (!(is >> m(r, c)) || !std::isfinite(m(r, c)))
        throw Error(ErrorCode::kModel, std::string("model file: bad entry in ") + name);
  return m;
}

template <typename T>
T read_field(std::istream& is, const char* key) {
  std::string tag;
  T value{};
  if (!(is >> tag) || tag != key || !(is >> value))
    throw Error(ErrorCode::kModel, std::string("model file: expected field ") + key);
  return value;
}

}  // namespace

void KoopmanModel::save(std::ostream& os) const {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "mbsc-koopman " << kFormatVersion << '\n';
  os << "basis " << to_string(basis_.kind()) << '\n';
  os << "terms_version " << Basis::kTermsVersion << '\n';
  os << "dim " << basis_.dim() << '\n';
  os << "epsilon " << epsilon_ << '\n';
  os << "samples " << acc_.count() << '\n';
  os << "has_operator " << (has_operator_ ? 1 : 0) << '\n';
  write_matrix(os, "K", k_);
  write_matrix(os, "G", acc_.g());
  write_matrix(os, "A", acc_.a());
}

KoopmanModel KoopmanModel::load(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "mbsc-koopman")
    throw Error(ErrorCode::kModel, "model file: missing header");
  if (version != kFormatVersion)
    throw Error(ErrorCode::kModel, "model file: unsupported format version " + std::to_string(version));
  const auto kind = basis_kind_from_string(read_field<std::string>(is, "basis"));
  const int terms = read_field<int>(is, "terms_version");
  if (terms != Basis::kTermsVersion)
    throw Error(ErrorCode::kModel, "model file: basis term order version mismatch");
  const int d = read_field<int>(is, "dim");
  const double eps = read_field<double>(is, "epsilon");
  const auto samples = read_field<std::int64_t>(is, "samples");
  const int has_op = read_field<int>(is, "has_operator");
  KoopmanModel m(kind, eps);
  if (d != m.basis_.dim()) throw Error(ErrorCode::kModel, "model file: dim does not match basis");
  if (samples < 0) throw Error(ErrorCode::kModel, "model file: negative sample count");
  m.k_ = read_matrix(is, "K", d);
  const Eigen::MatrixXd g = read_matrix(is, "G", d);
  const Eigen::MatrixXd a = read_matrix(is, "A", d);
  m.acc_.assign(g, a, samples);
  m.has_operator_ = has_op != 0;
  return m;
}

void KoopmanModel::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write model file " + path);
  save(os);
  if (!os) throw Error(ErrorCode::kIo, "failed writing model file " + path);
}

KoopmanModel KoopmanModel::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kModel, "cannot open model file " + path);
  return load(is);
}

KoopmanModel fit(std::span<const SnapshotPair> dataset, BasisKind kind, double epsilon) {
  if (dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "fit: empty dataset");
  KoopmanModel m(kind, epsilon);
  for (const auto& p : dataset) m.accumulate(p);
  m.refresh();
  return m;
}

KoopmanModel update(KoopmanModel model, const SnapshotPair& pair) {
  model.update(pair);
  return model;
}

OnlineLearner::OnlineLearner(KoopmanModel initial)
    : model_(std::move(initial)), snapshot_(std::make_shared<const KoopmanModel>(model_)) {}

void OnlineLearner::observe(const SnapshotPair& pair) {
  model_.update(pair);
  snapshot_ = std::make_shared<const KoopmanModel>(model_);
}

HStepStats h_step_error(const KoopmanModel& model,
                        std::span<const std::vector<SnapshotPair>> trajectories, int max_h) {
  HStepStats out;
  out.mean.assign(max_h, 0.0);
  out.variance.assign(max_h, 0.0);
  out.count.assign(max_h, 0);
  std::vector<double> m2(max_h, 0.0);
  for (const auto& traj : trajectories) {
    const auto n = static_cast<int>(traj.size());
    for (int start = 0; start < n; ++start) {
      StateVector x = traj[start].state.vec();
      for (int h = 1; h <= max_h && start + h - 1 < n; ++h) {
        const auto& pair = traj[start + h - 1];
        x = model.predict(x, pair.control.vec());
        const double err = std::hypot(x(0) - pair.next_state.x, x(1) - pair.next_state.y);
        // Welford update per horizon.
        auto& c = out.count[h - 1];
        ++c;
        const double delta = err - out.mean[h - 1];
        out.mean[h - 1] += delta / static_cast<double>(c);
        m2[h - 1] += delta * (err - out.mean[h - 1]);
      }
    }
  }
  for (int h = 0; h < max_h; ++h)
    out.variance[h] = out.count[h] > 1 ? m2[h] / static_cast<double>(out.count[h] - 1) : 0.0;
  return out;
}

}  // namespace mbsc
