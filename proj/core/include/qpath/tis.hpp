#pragma once

#include "qpath/rng.hpp"
#include "qpath/stats.hpp"
#include "qpath/system.hpp"
#include "qpath/tps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Transition interface sampling: the first-interface flux, per-interface
// conditional crossing probabilities from variable-length shooting, greedy
// interface placement, and the rate assembly k = flux * prod P_i.
//
// Path convention: a path starts at the last slice inside A (order parameter
// <= lambda_0 = a_max), immediately crosses outward, stays strictly between
// lambda_0 and b_min, and ends at the first return to A or arrival in B.

namespace qpath {

// ------------------------------- interfaces -------------------------------

struct InterfaceSet {
  std::vector<double> lambdas;

  void validate(const StateRegions& regions) const {
    if (lambdas.size() < 2) throw std::invalid_argument("InterfaceSet: need at least two interfaces");
    if (lambdas.front() != regions.a_max)
      throw std::invalid_argument("InterfaceSet: first interface must sit on the A boundary");
    if (lambdas.back() != regions.b_min)
      throw std::invalid_argument("InterfaceSet: last interface must sit on the B boundary");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
      if (!(lambdas[i] > lambdas[i - 1]))
        throw std::invalid_argument("InterfaceSet: interfaces must increase strictly");
  }

  std::size_t count() const { return lambdas.size(); }
};

// ------------------------------ flux estimate -----------------------------

struct FluxConfig {
  double a_core_offset{0.5};  // arming boundary sits this far inside A
  std::size_t n_steps{2000000};
  int min_crossings{100};
  int blocks{10};
  std::uint64_t seed{1};
};

struct FluxEstimate {
  double effective{0.0};  // recross-suppressed crossings per unit time
  double effective_stderr{0.0};
  double plain{0.0};  // every outward crossing per unit time
  double plain_stderr{0.0};
  long crossings_effective{0};
  long crossings_plain{0};
  double total_time{0.0};
};

// Long stationary run started in A. An effective crossing needs a visit to
// the core (op <= a_max - a_core_offset) since the previous count; the plain
// count takes every outward crossing of the A boundary. A walker reaching B
// is re-injected from a pool of states sampled earlier in the run while deep
// in A, so the run keeps probing an equilibrated A side; in the rare event
// regime this never fires.
template <class Sys>
FluxEstimate first_interface_flux(const Sys& sys, const StateRegions& regions,
                                  const typename Sys::State& initial, const FluxConfig& cfg) {
  regions.validate();
  if (cfg.blocks < 10) throw std::invalid_argument("first_interface_flux: need >= 10 blocks");
  if (cfg.n_steps < std::size_t(cfg.blocks))
    throw std::invalid_argument("first_interface_flux: run shorter than the block count");
  const double a_core = regions.a_max - cfg.a_core_offset;
  if (cfg.a_core_offset <= 0.0)
    throw std::invalid_argument("first_interface_flux: core must sit strictly inside A");

  rng::Engine eng = rng::make_stream(cfg.seed, 0, "flux");
  typename Sys::State state = initial;
  double op = sys.order_parameter(state);
  bool armed = op <= a_core;

  std::vector<typename Sys::State> pool;
  constexpr std::size_t pool_cap = 256;
  pool.reserve(pool_cap);
  std::size_t pool_at = 0;

  const std::size_t block_len = cfg.n_steps / cfg.blocks;
  std::vector<double> eff_blocks(cfg.blocks, 0.0), plain_blocks(cfg.blocks, 0.0);
  long eff_total = 0, plain_total = 0;

  for (std::size_t i = 0; i < block_len * std::size_t(cfg.blocks); ++i) {
    const double prev = op;
    state = sys.step(state, rng::normal(eng));
    op = sys.order_parameter(state);
    if (op >= regions.b_min) {
      if (pool.empty()) {
        state = initial;
      } else {
        state = pool[rng::below(eng, pool.size())];
      }
      op = sys.order_parameter(state);
      armed = op <= a_core;
      continue;
    }
    if (op <= a_core) {
      armed = true;
      if ((i & 63u) == 0u) {
        if (pool.size() < pool_cap) {
          pool.push_back(state);
        } else {
          pool[pool_at] = state;
          pool_at = (pool_at + 1) % pool_cap;
        }
      }
    }
    if (prev <= regions.a_max && op > regions.a_max) {
      const std::size_t b = i / block_len;
      plain_blocks[b] += 1.0;
      ++plain_total;
      if (armed) {
        eff_blocks[b] += 1.0;
        ++eff_total;
        armed = false;
      }
    }
  }

  if (eff_total < cfg.min_crossings)
    throw std::runtime_error("first_interface_flux: only " + std::to_string(eff_total) +
                             " effective crossings; lengthen the run (need " +
                             std::to_string(cfg.min_crossings) + ")");

  FluxEstimate est;
  est.crossings_effective = eff_total;
  est.crossings_plain = plain_total;
  est.total_time = double(block_len * std::size_t(cfg.blocks)) * sys.dt();
  const double block_time = double(block_len) * sys.dt();
  for (double& c : eff_blocks) c /= block_time;
  for (double& c : plain_blocks) c /= block_time;
  est.effective = stats::mean(eff_blocks);
  est.plain = stats::mean(plain_blocks);
  est.effective_stderr = std::sqrt(stats::variance(eff_blocks) / cfg.blocks);
  est.plain_stderr = std::sqrt(stats::variance(plain_blocks) / cfg.blocks);
  return est;
}

// ------------------------------ path ensemble -----------------------------

template <class State>
struct TisPath {
  Trajectory<State> traj;
  std::vector<double> fwd_step_log;
  std::vector<double> bwd_step_log;
  std::vector<double> op;
  double max_op{-std::numeric_limits<double>::infinity()};

  std::size_t steps() const { return traj.steps(); }
};

inline bool tis_series_ok(const std::vector<double>& op, const StateRegions& regions) {
  if (op.size() < 2) return false;
  if (op.front() > regions.a_max) return false;
  if (op[1] <= regions.a_max) return false;
  for (std::size_t i = 1; i + 1 < op.size(); ++i)
    if (op[i] <= regions.a_max || op[i] >= regions.b_min) return false;
  return op.back() <= regions.a_max || op.back() >= regions.b_min;
}

template <class Sys>
TisPath<typename Sys::State> make_tis_path(const Sys& sys, Trajectory<typename Sys::State> traj,
                                           const StateRegions& regions) {
  TisPath<typename Sys::State> path;
  path.op = order_parameter_series(sys, traj);
  if (!tis_series_ok(path.op, regions))
    throw std::invalid_argument("make_tis_path: trajectory violates the ensemble structure");
  path.max_op = *std::max_element(path.op.begin(), path.op.end());
  const std::size_t n = traj.steps();
  path.fwd_step_log.reserve(n);
  path.bwd_step_log.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    path.fwd_step_log.push_back(sys.forward_log_prob(traj.slices[i], traj.slices[i + 1]));
    path.bwd_step_log.push_back(sys.backward_log_prob(traj.slices[i + 1], traj.slices[i]));
  }
  path.traj = std::move(traj);
  return path;
}

// First outward excursion observed in a free run from `initial`: capture the
// last in-A slice, follow to termination. Retries across cap hits.
template <class Sys>
TisPath<typename Sys::State> generate_tis_seed(const Sys& sys, const StateRegions& regions,
                                               const typename Sys::State& initial,
                                               rng::Engine& eng,
                                               std::size_t max_path_steps = 400000,
                                               std::size_t max_total_steps = 40000000) {
  regions.validate();
  typename Sys::State state = initial;
  double op = sys.order_parameter(state);
  if (op > regions.a_max)
    throw std::invalid_argument("generate_tis_seed: start the run inside A");

  for (std::size_t i = 0; i < max_total_steps; ++i) {
    typename Sys::State next = sys.step(state, rng::normal(eng));
    const double next_op = sys.order_parameter(next);
    if (op <= regions.a_max && next_op > regions.a_max) {
      Trajectory<typename Sys::State> traj;
      traj.dt = sys.dt();
      traj.slices.push_back(state);
      traj.slices.push_back(next);
      double cur_op = next_op;
      while (cur_op > regions.a_max && cur_op < regions.b_min) {
        if (traj.slices.size() > max_path_steps) break;
        traj.slices.push_back(sys.step(traj.slices.back(), rng::normal(eng)));
        cur_op = sys.order_parameter(traj.slices.back());
      }
      if (cur_op <= regions.a_max || cur_op >= regions.b_min)
        return make_tis_path(sys, std::move(traj), regions);
      state = initial;  // cap hit: abandon the excursion, start over
      op = sys.order_parameter(state);
      continue;
    }
    state = std::move(next);
    op = next_op;
  }
  throw std::runtime_error("generate_tis_seed: no complete excursion found");
}

// --------------------------- ensemble sampling ----------------------------

struct TisConfig {
  int n_moves{4000};
  int burn_in{400};
  double dp_width{0.5};
  std::size_t max_leg_steps{400000};
  int store_stride{0};     // keep every k-th current path (0 = none)
  int max_seed_paths{50};  // successful paths retained for bootstrapping
  std::uint64_t seed{1};
};

struct CrossingStats {
  int trials{0};
  int successes{0};
  double estimate{0.0};
  double stderr_{0.0};  // binomial; correlation makes it optimistic
  int accepted{0};
  int capped{0};
  int structure_rejects{0};
};

template <class State>
struct TisEnsembleResult {
  CrossingStats stats;
  TisPath<State> current;
  std::vector<TisPath<State>> stored;     // thinned snapshots, if requested
  std::vector<TisPath<State>> successes;  // reached the next interface; bootstrap seeds
  std::vector<double> max_progress;       // max order parameter per move (post burn-in)
};

namespace detail {

// Variable-length two-way shot: kick slice s of the old path, run the tail
// forward to termination and the head backward to the first in-A slice.
// Returns the new path and the kicked slice's index in it; empty optional-
// style flag via `ok` when a cap or structure rule rejects the proposal.
template <class Sys>
struct VariableShot {
  bool ok{false};
  bool capped{false};
  TisPath<typename Sys::State> path;
  std::size_t kick_index{0};
};

template <class Sys>
VariableShot<Sys> variable_two_way_shoot(const Sys& sys, const TisPath<typename Sys::State>& old,
                                         std::size_t s, double dp, const StateRegions& regions,
                                         std::size_t max_leg_steps, rng::Engine& eng) {
  using State = typename Sys::State;
  VariableShot<Sys> shot;

  const State kicked = sys.displace(old.traj.slices[s], dp);
  const double kicked_op = sys.order_parameter(kicked);
  if (kicked_op <= regions.a_max || kicked_op >= regions.b_min) return shot;

  std::vector<State> tail{kicked};
  double op = kicked_op;
  while (op > regions.a_max && op < regions.b_min) {
    if (tail.size() > max_leg_steps) {
      shot.capped = true;
      return shot;
    }
    tail.push_back(sys.step(tail.back(), rng::normal(eng)));
    op = sys.order_parameter(tail.back());
  }

  std::vector<State> head;  // backward-generated, reversed order
  State ghost = sys.time_reverse(kicked);
  while (true) {
    if (head.size() > max_leg_steps) {
      shot.capped = true;
      return shot;
    }
    ghost = sys.step(ghost, rng::normal(eng));
    const State fwd = sys.time_reverse(ghost);
    const double fop = sys.order_parameter(fwd);
    if (fop >= regions.b_min) return shot;  // head escaped to B: invalid start
    head.push_back(fwd);
    if (fop <= regions.a_max) break;
  }

  Trajectory<State> traj;
  traj.dt = sys.dt();
  traj.slices.reserve(head.size() + tail.size());
  for (auto it = head.rbegin(); it != head.rend(); ++it) traj.slices.push_back(*it);
  for (auto& s2 : tail) traj.slices.push_back(std::move(s2));

  shot.path = make_tis_path(sys, std::move(traj), regions);
  shot.kick_index = head.size();
  shot.ok = true;
  return shot;
}

}  // namespace detail

// Metropolis ratio for the variable-length shot: interior-slice selection is
// uniform, so the counts enter as a ratio, and only the regrown heads'
// forward/backward mismatch plus the first-slice weight survive.
template <class Sys>
double tis_acceptance_log_ratio(const Sys& sys, const TisPath<typename Sys::State>& oldp,
                                std::size_t s_old, const TisPath<typename Sys::State>& newp,
                                std::size_t s_new) {
  // Selectable kick slices are the interior ones, so both endpoint slices
  // drop out of the count.
  const double n_old = double(oldp.traj.slices.size() - 2);
  const double n_new = double(newp.traj.slices.size() - 2);
  double lr = std::log(n_old / n_new);
  lr += sys.stationary_log_weight(newp.traj.slices.front());
  lr -= sys.stationary_log_weight(oldp.traj.slices.front());
  for (std::size_t i = 0; i < s_new; ++i) lr += newp.fwd_step_log[i] - newp.bwd_step_log[i];
  for (std::size_t i = 0; i < s_old; ++i) lr -= oldp.fwd_step_log[i] - oldp.bwd_step_log[i];
  return lr;
}

template <class Sys>
TisEnsembleResult<typename Sys::State> tis_ensemble_sample(const Sys& sys,
                                                           const StateRegions& regions,
                                                           const InterfaceSet& interfaces,
                                                           std::size_t i, const TisConfig& cfg,
                                                           TisPath<typename Sys::State> seed) {
  // Deliberately weaker than InterfaceSet::validate: a degenerate gap
  // (lambda_{i+1} == lambda_i) is allowed here and yields estimate 1.
  regions.validate();
  if (interfaces.count() < 2 || interfaces.lambdas.front() != regions.a_max)
    throw std::invalid_argument("tis_ensemble_sample: interfaces must start on the A boundary");
  if (i + 1 >= interfaces.count())
    throw std::invalid_argument("tis_ensemble_sample: interface index beyond the last gap");
  const double lambda_i = interfaces.lambdas[i];
  const double lambda_next = interfaces.lambdas[i + 1];
  if (lambda_next < lambda_i)
    throw std::invalid_argument("tis_ensemble_sample: interfaces out of order");
  if (seed.max_op < lambda_i)
    throw std::invalid_argument("tis_ensemble_sample: seed path never crosses its interface");
  if (seed.traj.slices.size() < 3)
    throw std::invalid_argument("tis_ensemble_sample: seed path has no interior slice");

  TisEnsembleResult<typename Sys::State> result;
  result.current = std::move(seed);
  rng::Engine eng = rng::make_stream(cfg.seed, i, "tis");

  for (int move = 0; move < cfg.n_moves + cfg.burn_in; ++move) {
    const std::size_t n_interior = result.current.traj.slices.size() - 2;
    const std::size_t s = 1 + rng::below(eng, n_interior);
    const double dp = cfg.dp_width * rng::normal(eng);

    bool accepted = false;
    try {
      auto shot = detail::variable_two_way_shoot(sys, result.current, s, dp, regions,
                                                 cfg.max_leg_steps, eng);
      if (shot.capped) ++result.stats.capped;
      if (shot.ok && shot.path.max_op >= lambda_i) {
        const double lr =
            tis_acceptance_log_ratio(sys, result.current, s, shot.path, shot.kick_index);
        if (std::log(rng::uniform(eng)) < lr) {
          result.current = std::move(shot.path);
          accepted = true;
        }
      } else if (shot.ok) {
        ++result.stats.structure_rejects;
      }
    } catch (const DegenerateDiffusionError&) {
    }

    if (move < cfg.burn_in) continue;

    ++result.stats.trials;
    result.stats.accepted += accepted ? 1 : 0;
    const bool success = result.current.max_op >= lambda_next;
    result.stats.successes += success ? 1 : 0;
    result.max_progress.push_back(result.current.max_op);
    if (success && int(result.successes.size()) < cfg.max_seed_paths &&
        (result.successes.empty() || accepted))
      result.successes.push_back(result.current);
    if (cfg.store_stride > 0 && result.stats.trials % cfg.store_stride == 0)
      result.stored.push_back(result.current);
  }

  result.stats.estimate = result.stats.trials > 0
                              ? double(result.stats.successes) / result.stats.trials
                              : 0.0;
  result.stats.stderr_ =
      result.stats.trials > 0
          ? std::sqrt(std::max(result.stats.estimate * (1.0 - result.stats.estimate), 0.0) /
                      result.stats.trials)
          : 0.0;
  return result;
}

// ---------------------------- interface placement -------------------------

struct PlacementConfig {
  double target{0.4};  // desired crossing probability per gap
  double min_spacing{0.05};
  TisConfig pilot;
};

struct PlacementOutcome {
  InterfaceSet interfaces;
  std::vector<double> realized;  // pilot estimate of P for each accepted gap
};

// Greedy placement: pilot each ensemble, put the next interface at the value
// that the target fraction of maximum-progress samples still exceeds, close
// with the B boundary once it comes within reach.
template <class Sys>
PlacementOutcome place_interfaces(const Sys& sys, const StateRegions& regions,
                                  const PlacementConfig& cfg,
                                  TisPath<typename Sys::State> seed) {
  regions.validate();
  if (cfg.target <= 0.0 || cfg.target >= 1.0)
    throw std::invalid_argument("place_interfaces: target must lie in (0,1)");

  PlacementOutcome out;
  out.interfaces.lambdas.push_back(regions.a_max);

  TisConfig pilot = cfg.pilot;
  // The next pilot must be seeded by a path crossing the freshly placed
  // interface. Successes are rare far from B, so keep thinned snapshots:
  // roughly the target fraction of them reach any accepted candidate.
  if (pilot.store_stride <= 0) pilot.store_stride = std::max(1, pilot.n_moves / 200);
  while (out.interfaces.lambdas.back() < regions.b_min) {
    const double lambda = out.interfaces.lambdas.back();
    InterfaceSet probe;
    probe.lambdas = {regions.a_max, regions.b_min};
    if (lambda > regions.a_max) probe.lambdas = {regions.a_max, lambda, regions.b_min};
    const std::size_t gap_index = probe.lambdas.size() - 2;

    pilot.seed = cfg.pilot.seed + out.interfaces.lambdas.size();
    auto result = tis_ensemble_sample(sys, regions, probe, gap_index, pilot, std::move(seed));

    std::vector<double> progress = result.max_progress;
    std::sort(progress.begin(), progress.end());
    const std::size_t idx =
        std::size_t(std::floor((1.0 - cfg.target) * double(progress.size())));
    const double candidate = progress[std::min(idx, progress.size() - 1)];

    if (candidate >= regions.b_min - cfg.min_spacing) {
      out.interfaces.lambdas.push_back(regions.b_min);
      out.realized.push_back(result.stats.estimate);
      break;
    }
    if (candidate < lambda + cfg.min_spacing)
      throw std::runtime_error("place_interfaces: pilot cannot advance past " +
                               std::to_string(lambda) + " (candidate " +
                               std::to_string(candidate) + ")");

    // Realized probability of the accepted gap, from the same pilot sample.
    int beyond = 0;
    for (double m : result.max_progress) beyond += m >= candidate ? 1 : 0;
    out.interfaces.lambdas.push_back(candidate);
    out.realized.push_back(double(beyond) / double(result.max_progress.size()));

    // Bootstrap the next pilot from a stored path that crosses the new
    // interface; the final current path is the fallback.
    seed = result.current;
    bool found = seed.max_op >= candidate;
    for (auto it = result.successes.rbegin(); !found && it != result.successes.rend(); ++it)
      if (it->max_op >= candidate) {
        seed = *it;
        found = true;
      }
    for (auto it = result.stored.rbegin(); !found && it != result.stored.rend(); ++it)
      if (it->max_op >= candidate) {
        seed = *it;
        found = true;
      }
    if (!found)
      throw std::runtime_error("place_interfaces: no pilot path crosses the new interface");
  }

  out.interfaces.validate(regions);
  return out;
}

// ------------------------------ rate assembly -----------------------------

struct RateEstimate {
  double flux0{0.0};
  double flux0_stderr{0.0};
  std::vector<double> crossing_probs;
  std::vector<double> crossing_stderrs;
  double rate{0.0};
  double stderr_{0.0};
  std::string method{"tis"};
  // Fields used by the passage-time estimator; a bound-only result stores
  // the detection limit in `rate`.
  double censored_fraction{0.0};
  bool bound_only{false};
};

// k = flux * prod P_i, errors combined as independent relative variances.
inline RateEstimate tis_rate(double flux0, double flux0_stderr,
                             const std::vector<CrossingStats>& stats) {
  RateEstimate est;
  est.flux0 = flux0;
  est.flux0_stderr = flux0_stderr;
  est.rate = flux0;
  double rel_var = flux0 > 0.0 ? (flux0_stderr / flux0) * (flux0_stderr / flux0) : 0.0;
  for (const auto& s : stats) {
    est.crossing_probs.push_back(s.estimate);
    est.crossing_stderrs.push_back(s.stderr_);
    est.rate *= s.estimate;
    if (s.estimate > 0.0) rel_var += (s.stderr_ / s.estimate) * (s.stderr_ / s.estimate);
  }
  est.stderr_ = est.rate > 0.0 ? est.rate * std::sqrt(rel_var) : 0.0;
  return est;
}

}  // namespace qpath
