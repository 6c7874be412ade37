#pragma once

#include "qpath/dynamics.hpp"

#include <stdexcept>

// Path-probability machinery: one-step transition log-densities for each
// dynamics (with their time-reversed counterparts), whole-path sums, and the
// stationary distributions that weight path endpoints. Log-densities drop the
// (2 pi dt)^{-1/2} prefactor throughout; it cancels in every ratio we form.

namespace qpath {

// The diffusion direction is a rank-one projector; below numerical rank the
// transition density is undefined. Samplers catch this type to auto-reject
// instead of aborting, so it must stay distinguishable from integrator errors.
struct DegenerateDiffusionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ----------------------------- step densities ----------------------------

// Classical kernel: Gaussian in the momentum residual
//   p1 - p0 + dt (v'(x0) + 2 gamma p0),  variance 4 gamma m T dt.
double classical_step_log_prob(const ClassicalState& s0, const ClassicalState& s1,
                               const SimParams& prm);

// Backward density P~(s1 -> s0): forward density on the time-reversed pair.
double classical_backward_log_prob(const ClassicalState& s1, const ClassicalState& s0,
                                   const SimParams& prm);

// SSE kernel along the one-dimensional noise direction sigma(psi0):
//   -|sigma+ (psi1 - psi0 - u dt)|^2 / (2 dt (sigma+ sigma)^2).
// psi0 is renormalized before evaluating; psi1 enters as stored.
double sse_step_log_prob(const QuantumState& psi0, const QuantumState& psi1, const SseOps& ops,
                         double dt);
double sse_backward_log_prob(const QuantumState& psi1, const QuantumState& psi0,
                             const SseOps& ops, double dt);

// Complex-noise (quantum-state-diffusion) variant: same residual, denominator
// 4 dt (sigma+ sigma)^2, i.e. half the magnitude of the real-noise value. The
// corresponding noise convention has per-component variance 2 dt; diagnostic
// only, no sampler consumes it.
double qsd_step_log_prob(const QuantumState& psi0, const QuantumState& psi1, const SseOps& ops,
                         double dt);

// Phase advanced by one step, theta = Im<psi0|u(psi0)> dt. The Wiener term
// projects out exactly (<psi|sigma> = 0), so xi does not enter; it stays in
// the signature to mirror the step it annotates. Diagnostic only.
double step_amplitude_phase(const QuantumState& psi0, const SseOps& ops, double dt,
                            double xi = 0.0);

// ------------------------------- path sums -------------------------------

double path_log_prob(const Trajectory<ClassicalState>& traj, const SimParams& prm);
double path_log_prob(const Trajectory<QuantumState>& traj, const SseOps& ops);

// --------------------------- stationary states ---------------------------

// Generator of the Lindblad master equation acting on column-stacked density
// matrices: vec(A rho B) = (B^T kron A) vec(rho).
Eigen::MatrixXcd lindblad_superoperator(const SseOps& ops);

struct StationaryState {
  Operator rho;                 // Hermitian, unit trace
  double   residual{0.0};       // ||M vec(rho)||_2
  double   generator_norm{0.0}; // ||M||_F, for relative residual checks
  double   min_eigenvalue{0.0};
};

// Null vector of the superoperator by smallest-singular-vector inverse
// iteration, then Hermitized and trace-normalized.
StationaryState stationary_state(const SseOps& ops);

// exp(-H/T) / Z via spectral decomposition.
Operator gibbs_state(const Operator& h, double temperature);

// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 for density matrices.
double fidelity(const Operator& rho, const Operator& sigma);

// ----------------------------- endpoint weights --------------------------

// log of the stationary weight of a path's first slice.
double stationary_log_weight(const ClassicalState& s, const SimParams& prm);         // -H(x,p)/T
double stationary_log_weight(const QuantumState& psi, const Operator& rho_st);       // log <psi|rho|psi>

}  // namespace qpath
