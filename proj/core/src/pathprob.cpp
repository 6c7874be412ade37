#include "qpath/pathprob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/KroneckerProduct>

namespace qpath {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};
constexpr double kDegenerateDiffusion = 1e-14;

double sse_residual_log(const QuantumState& psi0, const QuantumState& psi1, const SseOps& ops,
                        double dt, double denom_factor) {
  if (dt <= 0.0) throw std::invalid_argument("step log prob: dt must be positive");
  if (psi0.size() != psi1.size()) throw std::invalid_argument("step log prob: size mismatch");
  const QuantumState p0 = psi0.normalized();
  const QuantumState u = sse_drift(p0, ops);
  const QuantumState sig = sse_diffusion(p0, ops);
  const double s2 = sig.squaredNorm();
  if (s2 < kDegenerateDiffusion)
    throw DegenerateDiffusionError("step log prob: diffusion degenerate at this state");
  const std::complex<double> r = sig.dot(psi1 - p0 - dt * u);
  return -std::norm(r) / (denom_factor * dt * s2 * s2);
}

}  // namespace

double classical_step_log_prob(const ClassicalState& s0, const ClassicalState& s1,
                               const SimParams& prm) {
  prm.validate();
  if (prm.gamma <= 0.0)
    throw std::domain_error("classical_step_log_prob: gamma must be positive (noiseless steps are singular)");
  const double resid = s1.p - s0.p + prm.dt * (prm.well.grad(s0.x) + 2.0 * prm.gamma * s0.p);
  return -resid * resid / (8.0 * prm.mass * prm.gamma * prm.temperature * prm.dt);
}

double classical_backward_log_prob(const ClassicalState& s1, const ClassicalState& s0,
                                   const SimParams& prm) {
  return classical_step_log_prob(time_reversed(s1), time_reversed(s0), prm);
}

double sse_step_log_prob(const QuantumState& psi0, const QuantumState& psi1, const SseOps& ops,
                         double dt) {
  return sse_residual_log(psi0, psi1, ops, dt, 2.0);
}

double sse_backward_log_prob(const QuantumState& psi1, const QuantumState& psi0,
                             const SseOps& ops, double dt) {
  return sse_step_log_prob(time_reversed(psi1), time_reversed(psi0), ops, dt);
}

double qsd_step_log_prob(const QuantumState& psi0, const QuantumState& psi1, const SseOps& ops,
                         double dt) {
  return sse_residual_log(psi0, psi1, ops, dt, 4.0);
}

double step_amplitude_phase(const QuantumState& psi0, const SseOps& ops, double dt,
                            double /*xi*/) {
  if (dt <= 0.0) throw std::invalid_argument("step_amplitude_phase: dt must be positive");
  return psi0.dot(sse_drift(psi0, ops)).imag() * dt;
}

double path_log_prob(const Trajectory<ClassicalState>& traj, const SimParams& prm) {
  if (traj.steps() < 1) throw std::invalid_argument("path_log_prob: need at least one step");
  if (std::abs(traj.dt - prm.dt) > 1e-15 * std::max(1.0, prm.dt))
    throw std::invalid_argument("path_log_prob: trajectory dt does not match params");
  double sum = 0.0;
  for (int i = 0; i < traj.steps(); ++i)
    sum += classical_step_log_prob(traj.slices[i], traj.slices[i + 1], prm);
  return sum;
}

double path_log_prob(const Trajectory<QuantumState>& traj, const SseOps& ops) {
  if (traj.steps() < 1) throw std::invalid_argument("path_log_prob: need at least one step");
  double sum = 0.0;
  for (int i = 0; i < traj.steps(); ++i)
    sum += sse_step_log_prob(traj.slices[i], traj.slices[i + 1], ops, traj.dt);
  return sum;
}

Eigen::MatrixXcd lindblad_superoperator(const SseOps& ops) {
  const auto& h = ops.h_damped;
  const auto& l = ops.coupling;
  const double hbar = ops.basis.hbar;
  const Eigen::Index n = h.rows();
  const Operator id = Operator::Identity(n, n);
  const Operator ldl = (ops.coupling_adj * l).eval();
  Eigen::MatrixXcd m = -kI / hbar *
                       (Eigen::kroneckerProduct(id, h) - Eigen::kroneckerProduct(h.transpose(), id));
  m += (1.0 / hbar) * Eigen::kroneckerProduct(l.conjugate(), l);
  m -= (0.5 / hbar) * Eigen::kroneckerProduct(id, ldl);
  m -= (0.5 / hbar) * Eigen::kroneckerProduct(ldl.transpose(), id);
  return m;
}

StationaryState stationary_state(const SseOps& ops) {
  const Eigen::Index n = ops.h_damped.rows();
  const Eigen::MatrixXcd m = lindblad_superoperator(ops);
  const double mnorm = m.norm();

  // Smallest singular vector by inverse iteration on M+ M, with a Tikhonov
  // shift well below the spectral gap so the factorization stays regular.
  Eigen::MatrixXcd shifted = m;
  const double eps = 1e-13 * mnorm;
  shifted.diagonal().array() += eps;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(shifted);

  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n * n);
  for (Eigen::Index i = 0; i < n; ++i) v(i * n + i) = 1.0 / double(n);  // vec(I/n) start
  double resid = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 8; ++it) {
    v = lu.solve(lu.adjoint().solve(v)).normalized();
    resid = (m * v).norm();
    if (resid < 1e-13 * mnorm) break;
  }

  Operator rho = Eigen::Map<const Operator>(v.data(), n, n);
  rho = 0.5 * (rho + rho.adjoint().eval());
  const double tr = rho.trace().real();
  if (std::abs(tr) < 1e-14)
    throw std::runtime_error("stationary_state: null vector has vanishing trace");
  rho /= tr;

  StationaryState out;
  out.rho = rho;
  out.generator_norm = mnorm;
  out.residual = (m * Eigen::Map<const Eigen::VectorXcd>(rho.data(), n * n)).norm();
  Eigen::SelfAdjointEigenSolver<Operator> es(rho, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  if (out.min_eigenvalue < -1e-8)
    throw std::runtime_error("stationary_state: negative eigenvalue " +
                             std::to_string(out.min_eigenvalue));
  return out;
}

Operator gibbs_state(const Operator& h, double temperature) {
  if (temperature <= 0.0) throw std::domain_error("gibbs_state: temperature must be positive");
  Eigen::SelfAdjointEigenSolver<Operator> es(h);
  if (es.info() != Eigen::Success) throw std::runtime_error("gibbs_state: eigensolve failed");
  Eigen::ArrayXd w = ((es.eigenvalues().array() - es.eigenvalues().minCoeff()) / -temperature).exp();
  w /= w.sum();
  return es.eigenvectors() * w.matrix().cast<std::complex<double>>().asDiagonal() *
         es.eigenvectors().adjoint();
}

double fidelity(const Operator& rho, const Operator& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw std::invalid_argument("fidelity: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Operator> er(rho);
  if (er.info() != Eigen::Success) throw std::runtime_error("fidelity: eigensolve failed");
  Eigen::ArrayXd lam = er.eigenvalues().array().max(0.0);  // clip tiny negatives
  const Operator root = er.eigenvectors() *
                        lam.sqrt().matrix().cast<std::complex<double>>().asDiagonal() *
                        er.eigenvectors().adjoint();
  Operator inner = root * sigma * root;
  inner = 0.5 * (inner + inner.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Operator> ei(inner, Eigen::EigenvaluesOnly);
  const double tr = ei.eigenvalues().array().max(0.0).sqrt().sum();
  // Rounding can push the square a shade past 1; keep results in [0, 1 + 1e-9].
  return std::min(tr * tr, 1.0 + 1e-9);
}

double stationary_log_weight(const ClassicalState& s, const SimParams& prm) {
  const double h = 0.5 * s.p * s.p / prm.mass + prm.well.value(s.x);
  return -h / prm.temperature;
}

double stationary_log_weight(const QuantumState& psi, const Operator& rho_st) {
  const double w = psi.dot(rho_st * psi).real();
  if (w < 1e-300)
    throw std::runtime_error("stationary_log_weight: nonpositive weight; state outside support");
  return std::log(w);
}

}  // namespace qpath
