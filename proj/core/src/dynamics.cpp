#include "qpath/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace qpath {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

void GaussianMoments::validate(double hbar) const {
  if (var_x <= 0.0 || var_p <= 0.0)
    throw std::invalid_argument("GaussianMoments: spreads must be positive");
  if (var_x * var_p < 0.25 * hbar * hbar - 1e-9)
    throw std::invalid_argument("GaussianMoments: var_x var_p below hbar^2/4");
}

void SimParams::validate() const {
  if (dt <= 0.0) throw std::invalid_argument("SimParams: dt must be positive");
  if (gamma < 0.0) throw std::invalid_argument("SimParams: gamma must be nonnegative");
  if (temperature <= 0.0) throw std::invalid_argument("SimParams: temperature must be positive");
  if (mass <= 0.0) throw std::invalid_argument("SimParams: mass must be positive");
  well.validate();
}

SseOps make_sse_ops(const BasisConfig& cfg, const DoubleWell& well, double gamma,
                    double temperature, int pad) {
  SseOps ops;
  ops.basis = cfg;
  ops.gamma = gamma;
  ops.temperature = temperature;
  ops.h_damped = damped_hamiltonian(cfg, well, gamma, pad);
  ops.coupling = lindblad_operator(cfg, gamma, temperature);
  ops.coupling_adj = ops.coupling.adjoint();
  ops.position = position_operator(cfg);
  ops.momentum = momentum_operator(cfg);
  return ops;
}

ClassicalState langevin_step(const ClassicalState& s, const SimParams& prm, double xi) {
  ClassicalState out;
  out.x = s.x + s.p / prm.mass * prm.dt;
  out.p = s.p - (prm.well.grad(s.x) + 2.0 * prm.gamma * s.p) * prm.dt +
          2.0 * std::sqrt(prm.gamma * prm.mass * prm.temperature) * xi * std::sqrt(prm.dt);
  return out;
}

QuantumState sse_drift(const QuantumState& psi, const SseOps& ops) {
  const double hbar = ops.basis.hbar;
  const QuantumState lpsi = ops.coupling * psi;
  const std::complex<double> l_mean = psi.dot(lpsi);          // <L>
  const std::complex<double> ldag_mean = std::conj(l_mean);   // <L+>
  QuantumState u = -kI * (ops.h_damped * psi);
  u.noalias() -= 0.5 * (ops.coupling_adj * lpsi);
  u += ldag_mean * lpsi - 0.5 * ldag_mean * l_mean * psi;
  return u / hbar;
}

QuantumState sse_diffusion(const QuantumState& psi, const SseOps& ops) {
  const QuantumState lpsi = ops.coupling * psi;
  return (lpsi - psi.dot(lpsi) * psi) / std::sqrt(ops.basis.hbar);
}

QuantumState sse_euler_step(const QuantumState& psi, const SseOps& ops, double dt, double xi,
                            double norm_guard) {
  if (dt <= 0.0) throw std::invalid_argument("sse_euler_step: dt must be positive");
  QuantumState raw = psi + sse_drift(psi, ops) * dt + sse_diffusion(psi, ops) * (xi * std::sqrt(dt));
  const double nrm = raw.norm();
  if (std::abs(nrm - 1.0) > norm_guard)
    throw std::runtime_error("sse_euler_step: raw norm drifted to " + std::to_string(nrm) +
                             "; reduce dt or enlarge the basis");
  return raw / nrm;
}

GaussianMoments gaussian_centroid_step(const GaussianMoments& g, const SimParams& prm,
                                       double hbar, double xi) {
  g.validate(hbar);
  const double mt = prm.mass * prm.temperature;
  // Minimum-uncertainty moments sit exactly on radicand = 0; tolerate rounding there.
  const double radicand = 1.0 - 4.0 * g.var_p * g.var_x / (hbar * hbar);
  if (radicand < -1e-12)
    throw std::domain_error("gaussian_centroid_step: 4 var_p var_x exceeds hbar^2");
  const double amp_p = std::sqrt(4.0 * prm.gamma * mt * std::max(radicand, 0.0));
  const double amp_x =
      std::sqrt(hbar * hbar * prm.gamma / (4.0 * mt)) - 4.0 * g.var_x * std::sqrt(mt * prm.gamma) / hbar;
  const double rdt = std::sqrt(prm.dt);
  GaussianMoments out = g;  // spreads are carried, not evolved
  out.mean_x = g.mean_x + g.mean_p / prm.mass * prm.dt - amp_x * xi * rdt;
  out.mean_p = g.mean_p - (prm.well.grad(g.mean_x) + 2.0 * prm.gamma * g.mean_p) * prm.dt +
               amp_p * xi * rdt;
  return out;
}

Trajectory<ClassicalState> propagate(const ClassicalState& init, const SimParams& prm,
                                     int n_steps, rng::Engine& eng) {
  prm.validate();
  if (n_steps < 0) throw std::invalid_argument("propagate: negative step count");
  Trajectory<ClassicalState> traj;
  traj.dt = prm.dt;
  traj.slices.reserve(std::size_t(n_steps) + 1);
  traj.slices.push_back(init);
  for (int i = 0; i < n_steps; ++i)
    traj.slices.push_back(langevin_step(traj.slices.back(), prm, rng::normal(eng)));
  return traj;
}

Trajectory<QuantumState> propagate(const QuantumState& init, const SseOps& ops, double dt,
                                   int n_steps, rng::Engine& eng, double norm_guard) {
  if (n_steps < 0) throw std::invalid_argument("propagate: negative step count");
  Trajectory<QuantumState> traj;
  traj.dt = dt;
  traj.slices.reserve(std::size_t(n_steps) + 1);
  traj.slices.push_back(init);
  for (int i = 0; i < n_steps; ++i)
    traj.slices.push_back(
        sse_euler_step(traj.slices.back(), ops, dt, rng::normal(eng), norm_guard));
  return traj;
}

Trajectory<GaussianMoments> propagate(const GaussianMoments& init, const SimParams& prm,
                                      double hbar, int n_steps, rng::Engine& eng) {
  prm.validate();
  if (n_steps < 0) throw std::invalid_argument("propagate: negative step count");
  Trajectory<GaussianMoments> traj;
  traj.dt = prm.dt;
  traj.slices.reserve(std::size_t(n_steps) + 1);
  traj.slices.push_back(init);
  for (int i = 0; i < n_steps; ++i)
    traj.slices.push_back(gaussian_centroid_step(traj.slices.back(), prm, hbar, rng::normal(eng)));
  return traj;
}

Trajectory<QuantumState> coherent_propagate(const QuantumState& init, const Operator& h,
                                            double hbar, double dt, int n_steps) {
  if (dt <= 0.0 || n_steps < 0) throw std::invalid_argument("coherent_propagate: bad dt or steps");
  Eigen::SelfAdjointEigenSolver<Operator> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("coherent_propagate: eigensolve failed");
  Eigen::VectorXcd coeff = es.eigenvectors().adjoint() * init;
  const Eigen::VectorXcd phase = (-kI * (dt / hbar) * es.eigenvalues().array()).exp();
  Trajectory<QuantumState> traj;
  traj.dt = dt;
  traj.slices.reserve(std::size_t(n_steps) + 1);
  traj.slices.push_back(init);
  for (int i = 0; i < n_steps; ++i) {
    coeff.array() *= phase.array();
    traj.slices.push_back(es.eigenvectors() * coeff);
  }
  return traj;
}

double order_parameter(const QuantumState& psi, const Operator& position) {
  return expectation(position, psi).real();
}

}  // namespace qpath
