#pragma once

#include <Eigen/Dense>
#include <complex>

// Truncated Fock-space representation of a particle in a quartic double well.
// Natural units throughout the library: k_B = 1, so temperatures are energies.

namespace qpath {

using Operator     = Eigen::MatrixXcd;
using QuantumState = Eigen::VectorXcd;

// ----------------------------- basis & well -----------------------------

struct BasisConfig {
  int    dim{60};               // truncation dimension (number of Fock states)
  double mass{1.0};
  double hbar{1.0};
  double omega{1.1832159566199232};  // ladder frequency; default = well frequency of the default well

  void validate() const;
};

struct DoubleWell {
  double c4{0.01};   // quartic coefficient
  double c2{0.35};   // (negative) quadratic coefficient: v(x) = c4 x^4 - c2 x^2

  double value(double x) const { return (c4 * x * x - c2) * x * x; }
  double grad(double x) const { return (4.0 * c4 * x * x - 2.0 * c2) * x; }

  double minimum() const;                    // +sqrt(c2 / 2 c4); wells sit at +-minimum()
  double barrier_height() const;             // v(0) - v(minimum)
  double well_frequency(double mass) const;  // sqrt(v''(minimum) / m)

  void validate() const;
};

// --------------------------- operator builders ---------------------------

// Lowering operator a, a|n> = sqrt(n)|n-1>.
Operator lowering_operator(const BasisConfig& cfg);

// X = sqrt(hbar / 2 m w) (a + a+), P = i sqrt(m hbar w / 2) (a+ - a). Hermitian by construction.
Operator position_operator(const BasisConfig& cfg);
Operator momentum_operator(const BasisConfig& cfg);

// v(X) assembled in a padded basis (dim + pad) and truncated back, so the
// upper-left block is not polluted by the missing ladder tail of X^4.
Operator potential_operator(const BasisConfig& cfg, const DoubleWell& well, int pad = 8);

// H = P^2/2m + v(X); damped variant adds the friction term (gamma/2)(XP + PX).
Operator hamiltonian(const BasisConfig& cfg, const DoubleWell& well, int pad = 8);
Operator damped_hamiltonian(const BasisConfig& cfg, const DoubleWell& well, double gamma, int pad = 8);

// Bath coupling L = sqrt(4 gamma m T / hbar) X + i sqrt(gamma hbar / 4 m T) P.
Operator lindblad_operator(const BasisConfig& cfg, double gamma, double temperature);

// ------------------------- state transformations -------------------------

enum class DisplacementForm {
  unitary,  // exp(i dp X / hbar): exact generator of momentum translations
  literal,  // exp(dp X): non-unitary; the caller must renormalize after applying
};

// Momentum kick by dp. The two forms agree to first order in dp but are not
// interchangeable inside one sampler run; pick one and keep it.
Operator momentum_displacement(const BasisConfig& cfg, double dp,
                               DisplacementForm form = DisplacementForm::unitary);

// Parity (-1)^n per Fock amplitude; equivalent to (x,p) -> (-x,-p).
QuantumState apply_parity(const QuantumState& psi);

// Antiunitary time reversal: componentwise conjugation in the Fock basis.
QuantumState time_reversed(const QuantumState& psi);

// Normalized minimum-uncertainty state centred at (x0, p0): the ladder ground
// state displaced by exp(i (p0 X - x0 P) / hbar).
QuantumState coherent_state(const BasisConfig& cfg, double x0, double p0);

// Convenience expectation <psi|A|psi> for a normalized state.
std::complex<double> expectation(const Operator& a, const QuantumState& psi);

}  // namespace qpath
