#pragma once

#include "qpath/dynamics.hpp"
#include "qpath/fock.hpp"
#include "qpath/pathprob.hpp"

#include <stdexcept>
#include <utility>

// Adapters presenting the two dynamics to the path samplers through one
// interface: stepping, order parameter, the involutions, momentum kicks, the
// forward/backward step densities, and the stationary endpoint weight.

namespace qpath {

struct ClassicalSystem {
  using State = ClassicalState;

  SimParams prm;

  double dt() const { return prm.dt; }
  State step(const State& s, double xi) const { return langevin_step(s, prm, xi); }
  double order_parameter(const State& s) const { return s.x; }
  State time_reverse(const State& s) const { return time_reversed(s); }
  State parity(const State& s) const { return apply_parity(s); }
  State displace(const State& s, double dp) const { return {s.x, s.p + dp}; }
  double forward_log_prob(const State& a, const State& b) const {
    return classical_step_log_prob(a, b, prm);
  }
  double backward_log_prob(const State& b, const State& a) const {
    return classical_backward_log_prob(b, a, prm);
  }
  double stationary_log_weight(const State& s) const {
    return qpath::stationary_log_weight(s, prm);
  }
};

class SseSystem {
 public:
  using State = QuantumState;

  // rho_st weights path endpoints; pass the master-equation stationary state
  // (or a substitute, clearly labelled in any reported results).
  SseSystem(SseOps ops, double dt, Operator rho_st,
            DisplacementForm form = DisplacementForm::unitary)
      : ops_(std::move(ops)), dt_(dt), rho_st_(std::move(rho_st)), form_(form) {
    if (dt_ <= 0.0) throw std::invalid_argument("SseSystem: dt must be positive");
    Eigen::SelfAdjointEigenSolver<Operator> es(ops_.position);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("SseSystem: position eigensolve failed");
    xvecs_ = es.eigenvectors();
    xvals_ = es.eigenvalues();
  }

  // Convenience factory that solves for the stationary state itself.
  static SseSystem make(const BasisConfig& cfg, const DoubleWell& well, double gamma,
                        double temperature, double dt) {
    SseOps ops = make_sse_ops(cfg, well, gamma, temperature);
    Operator rho = stationary_state(ops).rho;
    return SseSystem(std::move(ops), dt, std::move(rho));
  }

  double dt() const { return dt_; }
  const SseOps& ops() const { return ops_; }
  const Operator& stationary_density() const { return rho_st_; }

  State step(const State& psi, double xi) const { return sse_euler_step(psi, ops_, dt_, xi); }
  double order_parameter(const State& psi) const {
    return expectation(ops_.position, psi).real();
  }
  State time_reverse(const State& psi) const { return time_reversed(psi); }
  State parity(const State& psi) const { return apply_parity(psi); }

  // Momentum kick through the cached X eigenbasis. dp = 0 is an exact no-op so
  // that replayed moves reproduce paths bitwise.
  State displace(const State& psi, double dp) const {
    if (dp == 0.0) return psi;
    Eigen::VectorXcd amp = xvecs_.adjoint() * psi;
    if (form_ == DisplacementForm::unitary) {
      const std::complex<double> i1(0.0, 1.0);
      amp.array() *= ((i1 * dp / ops_.basis.hbar) * xvals_.array().cast<std::complex<double>>()).exp();
    } else {
      amp.array() *= (dp * xvals_.array()).exp().cast<std::complex<double>>();
    }
    State out = xvecs_ * amp;
    return out / out.norm();
  }

  double forward_log_prob(const State& a, const State& b) const {
    return sse_step_log_prob(a, b, ops_, dt_);
  }
  double backward_log_prob(const State& b, const State& a) const {
    return sse_backward_log_prob(b, a, ops_, dt_);
  }
  double stationary_log_weight(const State& psi) const {
    return qpath::stationary_log_weight(psi, rho_st_);
  }

 private:
  SseOps ops_;
  double dt_{0.0};
  Operator rho_st_;
  DisplacementForm form_;
  Operator xvecs_;
  Eigen::VectorXd xvals_;
};

}  // namespace qpath
