#include "qpath/fock.hpp"

#include <cmath>
#include <stdexcept>

namespace qpath {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

Operator hermitize(Operator m) { return 0.5 * (m + m.adjoint().eval()); }

// exp(i s G) for Hermitian G, via spectral decomposition.
Operator unitary_exp(const Operator& g, double s) {
  Eigen::SelfAdjointEigenSolver<Operator> es(g);
  if (es.info() != Eigen::Success) throw std::runtime_error("unitary_exp: eigensolve failed");
  Eigen::VectorXcd phases = (kI * s * es.eigenvalues().array()).exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

void BasisConfig::validate() const {
  if (dim < 2) throw std::invalid_argument("BasisConfig: dim must be at least 2");
  if (mass <= 0.0 || hbar <= 0.0 || omega <= 0.0)
    throw std::invalid_argument("BasisConfig: mass, hbar and omega must be positive");
}

double DoubleWell::minimum() const { return std::sqrt(c2 / (2.0 * c4)); }

double DoubleWell::barrier_height() const { return c2 * c2 / (4.0 * c4); }

double DoubleWell::well_frequency(double mass) const {
  // v''(minimum) = 4 c2
  return std::sqrt(4.0 * c2 / mass);
}

void DoubleWell::validate() const {
  if (c4 <= 0.0 || c2 <= 0.0)
    throw std::invalid_argument("DoubleWell: c4 and c2 must be positive for a double well");
}

Operator lowering_operator(const BasisConfig& cfg) {
  cfg.validate();
  Operator a = Operator::Zero(cfg.dim, cfg.dim);
  for (int n = 1; n < cfg.dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

Operator position_operator(const BasisConfig& cfg) {
  const Operator a = lowering_operator(cfg);
  return std::sqrt(cfg.hbar / (2.0 * cfg.mass * cfg.omega)) * (a + a.adjoint().eval());
}

Operator momentum_operator(const BasisConfig& cfg) {
  const Operator a = lowering_operator(cfg);
  return kI * std::sqrt(cfg.mass * cfg.hbar * cfg.omega / 2.0) * (a.adjoint().eval() - a);
}

Operator potential_operator(const BasisConfig& cfg, const DoubleWell& well, int pad) {
  cfg.validate();
  well.validate();
  if (pad < 0) throw std::invalid_argument("potential_operator: pad must be nonnegative");
  BasisConfig padded = cfg;
  padded.dim = cfg.dim + pad;
  const Operator x  = position_operator(padded);
  const Operator x2 = x * x;
  const Operator v  = well.c4 * x2 * x2 - well.c2 * x2;
  return hermitize(v.topLeftCorner(cfg.dim, cfg.dim));
}

Operator hamiltonian(const BasisConfig& cfg, const DoubleWell& well, int pad) {
  const Operator p = momentum_operator(cfg);
  return hermitize(p * p / (2.0 * cfg.mass) + potential_operator(cfg, well, pad));
}

Operator damped_hamiltonian(const BasisConfig& cfg, const DoubleWell& well, double gamma, int pad) {
  if (gamma < 0.0) throw std::domain_error("damped_hamiltonian: gamma must be nonnegative");
  const Operator x = position_operator(cfg);
  const Operator p = momentum_operator(cfg);
  return hermitize(hamiltonian(cfg, well, pad) + 0.5 * gamma * (x * p + p * x));
}

Operator lindblad_operator(const BasisConfig& cfg, double gamma, double temperature) {
  if (gamma < 0.0) throw std::domain_error("lindblad_operator: gamma must be nonnegative");
  if (temperature <= 0.0) throw std::domain_error("lindblad_operator: temperature must be positive");
  const double cx = std::sqrt(4.0 * gamma * cfg.mass * temperature / cfg.hbar);
  const double cp = std::sqrt(gamma * cfg.hbar / (4.0 * cfg.mass * temperature));
  return cx * position_operator(cfg) + kI * cp * momentum_operator(cfg);
}

Operator momentum_displacement(const BasisConfig& cfg, double dp, DisplacementForm form) {
  const Operator x = position_operator(cfg);
  if (form == DisplacementForm::unitary) return unitary_exp(x, dp / cfg.hbar);
  // exp(dp X): Hermitian, positive; spectral form keeps it numerically exact on X's span.
  Eigen::SelfAdjointEigenSolver<Operator> es(x);
  Eigen::VectorXd growth = (dp * es.eigenvalues().array()).exp();
  return es.eigenvectors() * growth.cast<std::complex<double>>().asDiagonal() *
         es.eigenvectors().adjoint();
}

QuantumState apply_parity(const QuantumState& psi) {
  QuantumState out = psi;
  for (Eigen::Index n = 1; n < out.size(); n += 2) out(n) = -out(n);
  return out;
}

QuantumState time_reversed(const QuantumState& psi) { return psi.conjugate(); }

QuantumState coherent_state(const BasisConfig& cfg, double x0, double p0) {
  cfg.validate();
  const Operator g = p0 * position_operator(cfg) - x0 * momentum_operator(cfg);
  QuantumState vac = QuantumState::Zero(cfg.dim);
  vac(0) = 1.0;
  QuantumState psi = unitary_exp(g, 1.0 / cfg.hbar) * vac;
  return psi.normalized();  // truncation can shave a little norm at large |x0|
}

std::complex<double> expectation(const Operator& a, const QuantumState& psi) {
  if (a.rows() != psi.size() || a.cols() != psi.size())
    throw std::invalid_argument("expectation: operator/state dimension mismatch");
  return psi.dot(a * psi);  // Eigen's dot conjugates the left argument
}

}  // namespace qpath
