#pragma once

#include "qpath/dynamics.hpp"
#include "qpath/fock.hpp"
#include "qpath/rng.hpp"
#include "qpath/stats.hpp"
#include "qpath/tis.hpp"
#include "qpath/tps.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

// Post-processing: Wigner transforms, passage-time rates with a detection
// cutoff, Arrhenius fits, and the path-length and phase-space histograms.

namespace qpath {

// ------------------------------- phase grids ------------------------------

struct PhaseGrid {
  double x_min{-6.0}, x_max{6.0};
  double p_min{-6.0}, p_max{6.0};
  int nx{101}, np{101};

  void validate() const {
    if (!(x_min < x_max) || !(p_min < p_max))
      throw std::invalid_argument("PhaseGrid: min must lie below max");
    if (nx < 2 || np < 2) throw std::invalid_argument("PhaseGrid: need at least 2 cells per axis");
  }
  double dx() const { return (x_max - x_min) / nx; }
  double dp() const { return (p_max - p_min) / np; }
  double x_center(int i) const { return x_min + (i + 0.5) * dx(); }
  double p_center(int j) const { return p_min + (j + 0.5) * dp(); }
};

struct WignerField {
  PhaseGrid grid;
  Eigen::MatrixXd values;  // nx rows, np columns, cell centers

  double mass() const { return values.sum() * grid.dx() * grid.dp(); }
};

// Pointwise wavefunctions from Fock amplitudes, via the stabilized
// orthonormal Hermite-function recurrence (safe far past n = 30).
Eigen::VectorXcd position_wavefunction(const QuantumState& psi, const BasisConfig& cfg,
                                       const Eigen::VectorXd& xs);
Eigen::VectorXcd momentum_wavefunction(const QuantumState& psi, const BasisConfig& cfg,
                                       const Eigen::VectorXd& ps);

// W(x,p) = (1/pi hbar) Int psi*(x+y) psi(x-y) exp(2ipy/hbar) dy on cell
// centers, by Hermite synthesis of psi on the y quadrature nodes. Signals if
// more than 1% of the state's position or momentum mass lies off the grid.
WignerField wigner_transform(const QuantumState& psi, const BasisConfig& cfg,
                             const PhaseGrid& grid);

// ----------------------------- passage time rate ---------------------------

struct MfptConfig {
  double cutoff_time{2000.0};
  int n_trajectories{100};
  std::uint64_t seed{1};
};

// Direct estimate: k = 1 / mean(first passage time into B), over runs that
// arrive before the cutoff. Runs still in A at the cutoff are censored; past
// 50% censoring the point estimate is replaced by the detection bound
// k < 1/cutoff and bound_only is set.
template <class Sys>
RateEstimate mfpt_rate(const Sys& sys, const StateRegions& regions,
                       const typename Sys::State& initial, const MfptConfig& cfg) {
  regions.validate();
  if (cfg.n_trajectories < 10)
    throw std::invalid_argument("mfpt_rate: need at least 10 trajectories");
  if (cfg.cutoff_time <= 0.0) throw std::invalid_argument("mfpt_rate: cutoff must be positive");

  const std::size_t max_steps = std::size_t(cfg.cutoff_time / sys.dt());
  std::vector<double> times;
  times.reserve(cfg.n_trajectories);
  for (int t = 0; t < cfg.n_trajectories; ++t) {
    rng::Engine eng = rng::make_stream(cfg.seed, std::uint64_t(t), "mfpt");
    typename Sys::State state = initial;
    std::size_t steps = 0;
    while (steps < max_steps && sys.order_parameter(state) < regions.b_min) {
      state = sys.step(state, rng::normal(eng));
      ++steps;
    }
    if (steps < max_steps) times.push_back(double(steps) * sys.dt());
  }

  RateEstimate est;
  est.method = "mfpt";
  est.censored_fraction = 1.0 - double(times.size()) / double(cfg.n_trajectories);
  if (est.censored_fraction > 0.5) {
    est.bound_only = true;
    est.method = "mfpt_bound";
    est.rate = 1.0 / cfg.cutoff_time;
    est.stderr_ = 0.0;
    return est;
  }
  const double mean_tau = stats::mean(times);
  est.rate = 1.0 / mean_tau;
  const double se_tau = times.size() > 1
                            ? std::sqrt(stats::variance(times) / double(times.size()))
                            : 0.0;
  est.stderr_ = est.rate * se_tau / mean_tau;
  return est;
}

// ------------------------------ arrhenius fits -----------------------------

struct RatePoint {
  double temperature{0.0};
  double rate{0.0};
};

struct ArrheniusFit {
  double slope{0.0};  // of ln k against 1/T
  double intercept{0.0};
  double slope_stderr{0.0};
  double intercept_stderr{0.0};
  std::vector<double> residuals;
  double fixed_slope{0.0};  // the constrained fit's imposed gradient
  double fixed_intercept{0.0};
  std::vector<double> fixed_residuals;
};

// Free least squares of ln k vs 1/T plus the constrained fit with the slope
// pinned (the barrier-height line), whose intercept is the only free term.
ArrheniusFit arrhenius_fit(const std::vector<RatePoint>& points, double fixed_slope);

// ----------------------------- path length table ---------------------------

// Duration of each completed transition in an order-parameter series: the
// slices from the last exit out of A to the first entry into B, counted
// inclusively, times dt. A new transition needs a fresh visit to A first.
std::vector<double> transition_path_durations(const std::vector<double>& op, double dt,
                                              const StateRegions& regions);

struct DensityTable {
  std::vector<double> centers;
  std::vector<double> density;
  double bin_width{0.0};
};

// Normalized histogram over [0, max duration]; needs >= 100 entries.
DensityTable path_length_histogram(const std::vector<double>& durations, int n_bins = 30);

// ---------------------------- phase space tables ---------------------------

enum class PhaseSpaceMode { centers, wigner_sum };

struct PhaseHistogram {
  PhaseGrid grid;
  Eigen::MatrixXd values;  // density, cell-sum mass 1
  long n_samples{0};       // slices that landed inside the grid
};

PhaseHistogram phase_space_histogram(const std::vector<Trajectory<ClassicalState>>& ensembles,
                                     const PhaseGrid& grid);
PhaseHistogram phase_space_histogram(const std::vector<Trajectory<QuantumState>>& ensembles,
                                     const BasisConfig& cfg, const PhaseGrid& grid,
                                     PhaseSpaceMode mode = PhaseSpaceMode::centers);

// z score of the histogram's mass imbalance between p > 0 and p < 0; the
// sample count makes this meaningful for centers mode only.
double momentum_asymmetry_z(const PhaseHistogram& hist);

}  // namespace qpath
