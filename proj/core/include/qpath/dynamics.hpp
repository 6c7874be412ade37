#pragma once

#include <cstdint>
#include <vector>

#include "qpath/fock.hpp"
#include "qpath/rng.hpp"

// Time integration: classical Langevin dynamics, the real-noise stochastic
// Schroedinger unravelling of quantum Brownian motion, closed-system coherent
// evolution, and the Gaussian centroid reduction. All integrators are plain
// Euler-Maruyama so that sampled steps and path densities share one map.

namespace qpath {

// ------------------------------- states ---------------------------------

struct ClassicalState {
  double x{0.0};
  double p{0.0};
};

inline ClassicalState time_reversed(const ClassicalState& s) { return {s.x, -s.p}; }
inline ClassicalState apply_parity(const ClassicalState& s) { return {-s.x, -s.p}; }

// First and second moments of a Gaussian wavepacket; the centroid equations
// evolve the means and freeze the spreads.
struct GaussianMoments {
  double mean_x{0.0};
  double mean_p{0.0};
  double var_x{0.0};
  double var_p{0.0};

  void validate(double hbar) const;  // positive spreads, var_x var_p >= hbar^2/4
};

// ------------------------------ parameters ------------------------------

struct SimParams {
  double     dt{1e-3};
  double     gamma{0.25};
  double     temperature{0.30625};  // k_B T in natural units
  double     mass{1.0};
  DoubleWell well{};

  void validate() const;
};

// Operators needed per SSE step, built once per (basis, well, gamma, T).
struct SseOps {
  BasisConfig basis;
  double      gamma{0.0};
  double      temperature{0.0};
  Operator    h_damped;       // H + (gamma/2)(XP + PX)
  Operator    coupling;       // L
  Operator    coupling_adj;   // L+
  Operator    position;       // X, for order parameters and displacements
  Operator    momentum;
};

SseOps make_sse_ops(const BasisConfig& cfg, const DoubleWell& well, double gamma,
                    double temperature, int pad = 8);

// ------------------------------ integrators -----------------------------

// One Euler-Maruyama step of dx = p/m dt, dp = -(v'(x) + 2 gamma p) dt + 2 sqrt(gamma m T) dW.
ClassicalState langevin_step(const ClassicalState& s, const SimParams& prm, double xi);

// Drift u(psi) and diffusion sigma(psi) of the norm-preserving SSE,
//   dpsi = u dt + sigma dW,  with  Re<psi|u> = -|sigma|^2/2  and  <sigma|psi> = 0.
QuantumState sse_drift(const QuantumState& psi, const SseOps& ops);
QuantumState sse_diffusion(const QuantumState& psi, const SseOps& ops);

// Euler step with renormalization. Throws if the raw norm drifts further than
// norm_guard from 1, which signals a timestep or basis problem.
QuantumState sse_euler_step(const QuantumState& psi, const SseOps& ops, double dt, double xi,
                            double norm_guard = 0.1);

// Gaussian centroid step: Langevin-like motion of (<X>,<P>) with one shared
// noise; spreads enter the noise amplitudes only.
GaussianMoments gaussian_centroid_step(const GaussianMoments& g, const SimParams& prm,
                                       double hbar, double xi);

// ------------------------------ trajectories ----------------------------

template <class State>
struct Trajectory {
  double             dt{0.0};
  std::vector<State> slices;
  std::uint64_t      seed{0};  // stream seed that generated it; 0 = constructed

  int    steps() const { return int(slices.size()) - 1; }
  double duration() const { return dt * double(steps()); }
};

Trajectory<ClassicalState> propagate(const ClassicalState& init, const SimParams& prm,
                                     int n_steps, rng::Engine& eng);
Trajectory<QuantumState> propagate(const QuantumState& init, const SseOps& ops, double dt,
                                   int n_steps, rng::Engine& eng, double norm_guard = 0.1);
Trajectory<GaussianMoments> propagate(const GaussianMoments& init, const SimParams& prm,
                                      double hbar, int n_steps, rng::Engine& eng);

// Closed-system evolution exp(-i H t / hbar) sampled every dt; spectral form,
// so energy and norm are conserved to machine precision over long horizons.
Trajectory<QuantumState> coherent_propagate(const QuantumState& init, const Operator& h,
                                            double hbar, double dt, int n_steps);

// ----------------------------- order parameter ---------------------------

// The reaction coordinate: position, or its quantum/Gaussian expectation.
inline double order_parameter(const ClassicalState& s) { return s.x; }
inline double order_parameter(const GaussianMoments& g) { return g.mean_x; }
double order_parameter(const QuantumState& psi, const Operator& position);

}  // namespace qpath
