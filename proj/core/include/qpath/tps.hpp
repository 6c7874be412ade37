#pragma once

#include "qpath/rng.hpp"
#include "qpath/stats.hpp"
#include "qpath/system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Transition path sampling over a fixed-length path ensemble: two-way
// shooting, mirror moves that rescue failed shots with involutory path
// transforms, the visiting-ensemble correlation function, and the
// umbrella-sampled scale factor that normalizes it.

namespace qpath {

// ------------------------------- ensembles -------------------------------

struct StateRegions {
  double a_max{-3.0};  // A is order-parameter <= a_max
  double b_min{3.0};   // B is order-parameter >= b_min

  void validate() const {
    if (!(a_max < b_min))
      throw std::invalid_argument("StateRegions: a_max must lie below b_min");
  }
  bool in_a(double op) const { return op <= a_max; }
  bool in_b(double op) const { return op >= b_min; }
};

struct PathFlags {
  bool starts_in_a{false};
  bool ends_in_b{false};
  std::vector<char> visits_b;  // per-slice membership of B

  int visit_count() const {
    int c = 0;
    for (char v : visits_b) c += v;
    return c;
  }
};

// endpoint: reactive paths, first slice in A and last in B.
// visiting: first slice in A and any slice in B.
enum class EnsembleMode { endpoint, visiting };

inline bool qualifies(const PathFlags& f, EnsembleMode mode) {
  if (!f.starts_in_a) return false;
  return mode == EnsembleMode::endpoint ? f.ends_in_b : f.visit_count() > 0;
}

// A path plus everything the acceptance rules reuse: per-step forward and
// backward log-densities (log_prob is the forward sum) and indicator flags.
template <class State>
struct PathSample {
  Trajectory<State> traj;
  double log_prob{0.0};
  std::vector<double> fwd_step_log;
  std::vector<double> bwd_step_log;
  PathFlags flags;

  std::size_t steps() const { return traj.steps(); }
};

template <class Sys>
std::vector<double> order_parameter_series(const Sys& sys,
                                           const Trajectory<typename Sys::State>& traj) {
  std::vector<double> op;
  op.reserve(traj.slices.size());
  for (const auto& s : traj.slices) op.push_back(sys.order_parameter(s));
  return op;
}

inline PathFlags flags_from_series(const std::vector<double>& op, const StateRegions& regions) {
  PathFlags f;
  f.visits_b.reserve(op.size());
  for (double v : op) f.visits_b.push_back(regions.in_b(v) ? 1 : 0);
  f.starts_in_a = regions.in_a(op.front());
  f.ends_in_b = f.visits_b.back() != 0;
  return f;
}

template <class Sys>
PathFlags indicators(const Sys& sys, const Trajectory<typename Sys::State>& traj,
                     const StateRegions& regions) {
  return flags_from_series(order_parameter_series(sys, traj), regions);
}

template <class Sys>
PathSample<typename Sys::State> make_sample(const Sys& sys,
                                            Trajectory<typename Sys::State> traj,
                                            const StateRegions& regions) {
  if (traj.slices.size() < 2) throw std::invalid_argument("make_sample: need at least one step");
  PathSample<typename Sys::State> sample;
  sample.flags = indicators(sys, traj, regions);
  const std::size_t n = traj.steps();
  sample.fwd_step_log.reserve(n);
  sample.bwd_step_log.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sample.fwd_step_log.push_back(sys.forward_log_prob(traj.slices[i], traj.slices[i + 1]));
    sample.bwd_step_log.push_back(sys.backward_log_prob(traj.slices[i + 1], traj.slices[i]));
    sample.log_prob += sample.fwd_step_log.back();
  }
  sample.traj = std::move(traj);
  return sample;
}

// ----------------------------- path transforms ----------------------------

enum class PathTransform { identity, time_reversal, parity, parity_time };

inline bool reverses_time(PathTransform t) {
  return t == PathTransform::time_reversal || t == PathTransform::parity_time;
}
inline bool flips_parity(PathTransform t) {
  return t == PathTransform::parity || t == PathTransform::parity_time;
}

template <class Sys>
Trajectory<typename Sys::State> apply_transform(const Sys& sys,
                                                const Trajectory<typename Sys::State>& traj,
                                                PathTransform t) {
  Trajectory<typename Sys::State> out;
  out.dt = traj.dt;
  out.slices.reserve(traj.slices.size());
  const std::size_t n = traj.slices.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& src = traj.slices[reverses_time(t) ? n - 1 - k : k];
    auto state = reverses_time(t) ? sys.time_reverse(src) : src;
    if (flips_parity(t)) state = sys.parity(state);
    out.slices.push_back(std::move(state));
  }
  return out;
}

// Order-parameter series of a transformed path, derived from the original
// series: time reversal reverses the order (states keep their positions) and
// parity negates the values.
inline std::vector<double> transform_series(std::vector<double> op, PathTransform t) {
  if (reverses_time(t)) std::reverse(op.begin(), op.end());
  if (flips_parity(t)) for (double& v : op) v = -v;
  return op;
}

// ------------------------------ shooting move -----------------------------

// Perturb slice s with a momentum kick, integrate forward to the end with
// fresh noise, and grow the head by integrating the time-reversed perturbed
// slice forward and reversing the result. Forward leg consumes noise first.
template <class Sys>
PathSample<typename Sys::State> two_way_shoot(const Sys& sys,
                                              const PathSample<typename Sys::State>& old,
                                              std::size_t s, double dp,
                                              const StateRegions& regions, rng::Engine& eng) {
  using State = typename Sys::State;
  const auto& slices = old.traj.slices;
  if (s == 0 || s + 1 >= slices.size())
    throw std::invalid_argument("two_way_shoot: shooting index must be interior");

  const std::size_t n = slices.size() - 1;
  std::vector<State> fresh(slices.size());
  fresh[s] = sys.displace(slices[s], dp);
  for (std::size_t i = s; i < n; ++i) fresh[i + 1] = sys.step(fresh[i], rng::normal(eng));
  State ghost = sys.time_reverse(fresh[s]);
  for (std::size_t j = s; j > 0; --j) {
    ghost = sys.step(ghost, rng::normal(eng));
    fresh[j - 1] = sys.time_reverse(ghost);
  }

  Trajectory<State> traj;
  traj.dt = old.traj.dt;
  traj.slices = std::move(fresh);
  return make_sample(sys, std::move(traj), regions);
}

// Log of the Metropolis ratio for a two-way shot at index s. The kick and
// index selection are symmetric, so only the stationary weight of the first
// slice and the forward/backward mismatch of the regrown head survive:
//   dlog = dlog(stationary weight at slice 0)
//        + sum_{i<s} [fwd - bwd](new) - sum_{i<s} [fwd - bwd](old).
// The caller gates acceptance on the ensemble indicator separately.
template <class Sys>
double shoot_acceptance_log_ratio(const Sys& sys, const PathSample<typename Sys::State>& oldp,
                                  const PathSample<typename Sys::State>& newp, std::size_t s) {
  if (oldp.steps() != newp.steps())
    throw std::invalid_argument("shoot_acceptance_log_ratio: length mismatch");
  if (s == 0 || s >= oldp.steps())
    throw std::invalid_argument("shoot_acceptance_log_ratio: shooting index must be interior");

  double lr = sys.stationary_log_weight(newp.traj.slices.front()) -
              sys.stationary_log_weight(oldp.traj.slices.front());
  for (std::size_t i = 0; i < s; ++i) {
    lr += newp.fwd_step_log[i] - newp.bwd_step_log[i];
    lr -= oldp.fwd_step_log[i] - oldp.bwd_step_log[i];
  }
  return lr;
}

// ------------------------------- mirror move ------------------------------

template <class State>
struct MirrorProposal {
  PathSample<State> base;    // the raw two-way shot
  PathSample<State> chosen;  // selected among base and its transforms
  PathTransform transform{PathTransform::identity};
  int n_s{0};  // qualifying candidates; 0 means nothing to choose
};

// Shoot once, then look for ensemble members among the shot and its
// transforms; choose uniformly among the qualifying candidates.
template <class Sys>
MirrorProposal<typename Sys::State> mirror_propose(const Sys& sys,
                                                   const PathSample<typename Sys::State>& old,
                                                   std::size_t s, double dp,
                                                   const std::vector<PathTransform>& transforms,
                                                   const StateRegions& regions, EnsembleMode mode,
                                                   rng::Engine& eng) {
  MirrorProposal<typename Sys::State> prop;
  prop.base = two_way_shoot(sys, old, s, dp, regions, eng);

  const std::vector<double> series = order_parameter_series(sys, prop.base.traj);
  std::vector<PathTransform> qualifying;
  if (qualifies(prop.base.flags, mode)) qualifying.push_back(PathTransform::identity);
  for (PathTransform t : transforms)
    if (qualifies(flags_from_series(transform_series(series, t), regions), mode))
      qualifying.push_back(t);

  prop.n_s = int(qualifying.size());
  if (prop.n_s == 0) return prop;

  prop.transform = qualifying[rng::below(eng, qualifying.size())];
  prop.chosen = prop.transform == PathTransform::identity
                    ? prop.base
                    : make_sample(sys, apply_transform(sys, prop.base.traj, prop.transform),
                                  regions);
  return prop;
}

// Number of qualifying candidates the reverse move would see: the reverse
// shot regenerates S*(old), whose candidate set is that base and its
// transforms.
template <class Sys>
int reverse_candidate_count(const Sys& sys, const PathSample<typename Sys::State>& old,
                            PathTransform chosen, const std::vector<PathTransform>& transforms,
                            const StateRegions& regions, EnsembleMode mode) {
  const std::vector<double> reverse_base =
      transform_series(order_parameter_series(sys, old.traj), chosen);
  int count = qualifies(flags_from_series(reverse_base, regions), mode) ? 1 : 0;
  for (PathTransform t : transforms)
    count += qualifies(flags_from_series(transform_series(reverse_base, t), regions), mode) ? 1 : 0;
  return count;
}

// Unreduced mirror acceptance: candidate-count ratio, target-density ratio of
// chosen vs old, and the generation-density ratio of the reverse base (built
// by transforming the old path, shot at the mapped index) vs the forward
// base. Exact for every transform; the dispatching front end below prefers
// the algebraically reduced forms where they exist.
template <class Sys>
double mirror_acceptance_log_ratio_general(const Sys& sys,
                                           const PathSample<typename Sys::State>& oldp,
                                           const MirrorProposal<typename Sys::State>& prop,
                                           std::size_t s, int n_bar,
                                           const StateRegions& regions) {
  if (prop.n_s < 1) throw std::invalid_argument("mirror acceptance: no qualifying candidate");
  if (n_bar < 1) throw std::invalid_argument("mirror acceptance: reverse move impossible");

  const std::size_t n = oldp.steps();
  const std::size_t s_rev = reverses_time(prop.transform) ? n - s : s;

  double lr = std::log(double(prop.n_s) / double(n_bar));
  lr += sys.stationary_log_weight(prop.chosen.traj.slices.front()) + prop.chosen.log_prob;
  lr -= sys.stationary_log_weight(oldp.traj.slices.front()) + oldp.log_prob;

  const PathSample<typename Sys::State> reverse_base =
      prop.transform == PathTransform::identity
          ? oldp
          : make_sample(sys, apply_transform(sys, oldp.traj, prop.transform), regions);
  for (std::size_t i = 0; i < n; ++i) {
    lr += i < s_rev ? reverse_base.bwd_step_log[i] : reverse_base.fwd_step_log[i];
    lr -= i < s ? prop.base.bwd_step_log[i] : prop.base.fwd_step_log[i];
  }
  return lr;
}

// Mirror acceptance with the reduced forms: identity reduces to the plain
// shooting ratio, time reversal to a backward/forward mismatch over the tail
// of the shot and the head of the old path. Parity branches keep the general
// expression (slice-wise parity leaves step densities invariant, so it costs
// one density sweep over the transformed old path).
template <class Sys>
double mirror_acceptance_log_ratio(const Sys& sys, const PathSample<typename Sys::State>& oldp,
                                   const MirrorProposal<typename Sys::State>& prop,
                                   std::size_t s, int n_bar, const StateRegions& regions) {
  if (prop.n_s < 1) throw std::invalid_argument("mirror acceptance: no qualifying candidate");
  if (n_bar < 1) throw std::invalid_argument("mirror acceptance: reverse move impossible");

  const double count_term = std::log(double(prop.n_s) / double(n_bar));

  if (prop.transform == PathTransform::identity)
    return count_term + shoot_acceptance_log_ratio(sys, oldp, prop.base, s);

  if (prop.transform == PathTransform::time_reversal) {
    double lr = count_term;
    lr += sys.stationary_log_weight(prop.chosen.traj.slices.front()) -
          sys.stationary_log_weight(oldp.traj.slices.front());
    for (std::size_t i = s; i < prop.base.steps(); ++i)
      lr += prop.base.bwd_step_log[i] - prop.base.fwd_step_log[i];
    for (std::size_t i = 0; i < s; ++i)
      lr += oldp.bwd_step_log[i] - oldp.fwd_step_log[i];
    return lr;
  }

  return mirror_acceptance_log_ratio_general(sys, oldp, prop, s, n_bar, regions);
}

// ------------------------------- chain runner -----------------------------

struct MoveRecord {
  enum class Kind { shoot, mirror };
  Kind kind{Kind::shoot};
  std::size_t s{0};
  double dp{0.0};
  bool accepted{false};
  int n_s{1};
  int n_bar{1};
  double log_ratio{0.0};
  PathTransform transform{PathTransform::identity};
};

template <class State>
struct TpsChain {
  PathSample<State> current;
  std::vector<MoveRecord> moves;
  std::vector<PathSample<State>> snapshots;   // thinned copies, if requested
  std::vector<double> midpoint_series;        // order parameter at the middle slice, per move
  std::vector<double> endpoint_series;        // order parameter at the last slice, per move
  std::vector<double> visit_mean;             // running mean of the per-slice B indicator
  std::size_t accepted_count{0};
  std::uint64_t seed{0};

  double acceptance_rate() const {
    return moves.empty() ? 0.0 : double(accepted_count) / double(moves.size());
  }
};

struct TpsConfig {
  int n_moves{1000};
  int target_accepted{0};  // stop early once this many moves accepted (0 = run all)
  double dp_width{0.5};
  double mirror_fraction{0.0};
  std::vector<PathTransform> transforms{PathTransform::time_reversal, PathTransform::parity,
                                        PathTransform::parity_time};
  EnsembleMode mode{EnsembleMode::endpoint};
  double min_acceptance{0.01};
  int acceptance_window{500};
  int snapshot_every{0};  // 0 = keep no snapshots
  std::uint64_t seed{1};
};

template <class Sys>
TpsChain<typename Sys::State> tps_run(const Sys& sys, const StateRegions& regions,
                                      const TpsConfig& cfg,
                                      PathSample<typename Sys::State> initial) {
  regions.validate();
  if (!qualifies(initial.flags, cfg.mode))
    throw std::invalid_argument("tps_run: initial path violates the ensemble constraint");

  TpsChain<typename Sys::State> chain;
  chain.seed = cfg.seed;
  chain.current = std::move(initial);
  chain.visit_mean.assign(chain.current.traj.slices.size(), 0.0);

  rng::Engine eng = rng::make_stream(cfg.seed, 0, "tps");
  const std::size_t n_steps = chain.current.steps();
  if (n_steps < 2)
    throw std::invalid_argument("tps_run: shooting needs an interior slice");
  const std::size_t mid = chain.current.traj.slices.size() / 2;
  int window_accepts = 0;

  for (int move = 0; move < cfg.n_moves; ++move) {
    const std::size_t s = 1 + rng::below(eng, n_steps - 1);
    const double dp = cfg.dp_width * rng::normal(eng);
    const bool mirror = rng::uniform(eng) < cfg.mirror_fraction;

    MoveRecord rec;
    rec.kind = mirror ? MoveRecord::Kind::mirror : MoveRecord::Kind::shoot;
    rec.s = s;
    rec.dp = dp;
    rec.log_ratio = -std::numeric_limits<double>::infinity();

    try {
      if (mirror) {
        auto prop = mirror_propose(sys, chain.current, s, dp, cfg.transforms, regions,
                                   cfg.mode, eng);
        rec.n_s = prop.n_s;
        rec.transform = prop.transform;
        if (prop.n_s > 0) {
          rec.n_bar = reverse_candidate_count(sys, chain.current, prop.transform,
                                              cfg.transforms, regions, cfg.mode);
          if (rec.n_bar > 0) {
            rec.log_ratio = mirror_acceptance_log_ratio(sys, chain.current, prop, s,
                                                        rec.n_bar, regions);
            if (std::log(rng::uniform(eng)) < rec.log_ratio) {
              chain.current = std::move(prop.chosen);
              rec.accepted = true;
            }
          }
        }
      } else {
        auto fresh = two_way_shoot(sys, chain.current, s, dp, regions, eng);
        if (qualifies(fresh.flags, cfg.mode)) {
          rec.log_ratio = shoot_acceptance_log_ratio(sys, chain.current, fresh, s);
          if (std::log(rng::uniform(eng)) < rec.log_ratio) {
            chain.current = std::move(fresh);
            rec.accepted = true;
          }
        }
      }
    } catch (const DegenerateDiffusionError&) {
      // undefined proposal density: the move is rejected, the chain stands
    }

    chain.accepted_count += rec.accepted ? 1 : 0;
    window_accepts += rec.accepted ? 1 : 0;
    chain.moves.push_back(rec);

    const auto& cur = chain.current;
    chain.midpoint_series.push_back(sys.order_parameter(cur.traj.slices[mid]));
    chain.endpoint_series.push_back(sys.order_parameter(cur.traj.slices.back()));
    for (std::size_t i = 0; i < chain.visit_mean.size(); ++i)
      chain.visit_mean[i] += (double(cur.flags.visits_b[i]) - chain.visit_mean[i]) / (move + 1);

    if (cfg.snapshot_every > 0 && (move + 1) % cfg.snapshot_every == 0)
      chain.snapshots.push_back(chain.current);

    if (cfg.target_accepted > 0 && chain.accepted_count >= std::size_t(cfg.target_accepted))
      break;

    if ((move + 1) % cfg.acceptance_window == 0) {
      const double rate = double(window_accepts) / cfg.acceptance_window;
      if (rate < cfg.min_acceptance)
        throw std::runtime_error(
            "tps_run: acceptance " + std::to_string(rate) + " below floor " +
            std::to_string(cfg.min_acceptance) + " over the last " +
            std::to_string(cfg.acceptance_window) + " moves (" +
            std::to_string(move + 1) + " total; check dp width and path length)");
      window_accepts = 0;
    }
  }
  return chain;
}

// Reactive seed path: shoot two ways from a synthetic barrier-top state until
// the assembled path joins A to B. Works at any temperature, unlike waiting
// for a spontaneous transition.
template <class Sys>
PathSample<typename Sys::State> generate_initial_path(
    const Sys& sys, const StateRegions& regions, std::size_t n_steps, EnsembleMode mode,
    const typename Sys::State& barrier_state, rng::Engine& eng, int max_tries = 2000) {
  using State = typename Sys::State;
  if (n_steps < 2) throw std::invalid_argument("generate_initial_path: need at least two steps");

  for (int attempt = 0; attempt < max_tries; ++attempt) {
    const std::size_t s = n_steps / 2;
    std::vector<State> slices(n_steps + 1);
    slices[s] = barrier_state;
    for (std::size_t i = s; i < n_steps; ++i) slices[i + 1] = sys.step(slices[i], rng::normal(eng));
    State ghost = sys.time_reverse(barrier_state);
    for (std::size_t j = s; j > 0; --j) {
      ghost = sys.step(ghost, rng::normal(eng));
      slices[j - 1] = sys.time_reverse(ghost);
    }
    Trajectory<State> traj;
    traj.dt = sys.dt();
    traj.slices = std::move(slices);
    auto sample = make_sample(sys, std::move(traj), regions);
    if (qualifies(sample.flags, mode)) return sample;
  }
  throw std::runtime_error("generate_initial_path: no qualifying path found; "
                           "lengthen the path or soften the regions");
}

// --------------------------- correlation function -------------------------

struct CorrelationTable {
  std::vector<double> time;
  std::vector<double> value;   // C(t) on the path's slice grid
  double c_tprime{0.0};        // the external scale at the matching point
  std::size_t tprime_index{0};
};

// C(t) from a visiting-ensemble chain: the per-slice B occupation, scaled so
// that the value at t' matches an externally supplied C(t') (from the
// umbrella scale factor or a brute-force estimate).
template <class Sys>
CorrelationTable correlation_function(const Sys& sys, const StateRegions& regions,
                                      TpsConfig cfg, PathSample<typename Sys::State> initial,
                                      double t_prime, double c_tprime) {
  cfg.mode = EnsembleMode::visiting;
  const auto chain = tps_run(sys, regions, cfg, std::move(initial));

  const double dt = chain.current.traj.dt;
  const auto idx = std::size_t(std::lround(t_prime / dt));
  if (idx >= chain.visit_mean.size())
    throw std::invalid_argument("correlation_function: t' beyond the path duration");
  if (chain.visit_mean[idx] <= 0.0)
    throw std::runtime_error("correlation_function: no B visits by t'; t' too early");

  CorrelationTable table;
  table.c_tprime = c_tprime;
  table.tprime_index = idx;
  table.time.reserve(chain.visit_mean.size());
  table.value.reserve(chain.visit_mean.size());
  for (std::size_t i = 0; i < chain.visit_mean.size(); ++i) {
    table.time.push_back(double(i) * dt);
    table.value.push_back(chain.visit_mean[i] / chain.visit_mean[idx] * c_tprime);
  }
  return table;
}

// ------------------------------ umbrella factor ---------------------------

struct UmbrellaConfig {
  int n_windows{8};
  int moves_per_window{4000};
  int burn_in{400};
  double bin_width{0.2};
  double dp_width{0.5};
  std::uint64_t seed{11};
};

namespace detail {

struct UmbrellaWindow {
  double lo{0.0};
  double hi{0.0};
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Equal windows spanning [a_max, b_min] with half-width overlap; the first
// extends to -infinity (the non-reactive bulk) and the last to +infinity.
inline std::vector<UmbrellaWindow> make_windows(const StateRegions& regions, int n_windows) {
  if (n_windows < 2) throw std::invalid_argument("umbrella: need at least two windows");
  const double span = regions.b_min - regions.a_max;
  const double width = 2.0 * span / (n_windows + 1);
  std::vector<UmbrellaWindow> windows(n_windows);
  for (int k = 0; k < n_windows; ++k) {
    windows[k].lo = regions.a_max + 0.5 * k * width;
    windows[k].hi = windows[k].lo + width;
  }
  windows.front().lo = -std::numeric_limits<double>::infinity();
  windows.back().hi = std::numeric_limits<double>::infinity();
  return windows;
}

}  // namespace detail

// P(order parameter of the final slice is in B | first slice in A) for paths
// of the initial sample's length, assembled from overlapping endpoint-window
// ensembles matched at their seams. The initial path must start in A.
template <class Sys>
double umbrella_scale_factor(const Sys& sys, const StateRegions& regions,
                             const UmbrellaConfig& cfg,
                             PathSample<typename Sys::State> initial) {
  regions.validate();
  if (!initial.flags.starts_in_a)
    throw std::invalid_argument("umbrella_scale_factor: initial path must start in A");

  const auto windows = detail::make_windows(regions, cfg.n_windows);
  for (std::size_t k = 0; k + 1 < windows.size(); ++k)
    if (windows[k].hi - windows[k + 1].lo < 2.0 * cfg.bin_width)
      throw std::invalid_argument("umbrella_scale_factor: adjacent windows overlap by "
                                  "fewer than two bins; widen windows or shrink bins");

  // Global binning over the reachable order-parameter range; endpoint values
  // beyond the edges land in the edge bins.
  const double lo_edge = regions.a_max - 2.0 * (regions.b_min - regions.a_max);
  const double hi_edge = regions.b_min + 2.0 * (regions.b_min - regions.a_max);
  const int n_bins = int(std::ceil((hi_edge - lo_edge) / cfg.bin_width));
  auto bin_of = [&](double v) {
    const int b = int(std::floor((v - lo_edge) / cfg.bin_width));
    return std::clamp(b, 0, n_bins - 1);
  };

  rng::Engine eng = rng::make_stream(cfg.seed, 0, "umbrella");
  const std::size_t n_steps = initial.steps();

  std::vector<std::vector<double>> histogram(windows.size(), std::vector<double>(n_bins, 0.0));
  PathSample<typename Sys::State> seed_path = std::move(initial);

  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& win = windows[k];
    auto gate = [&](const PathSample<typename Sys::State>& p) {
      return p.flags.starts_in_a && win.contains(sys.order_parameter(p.traj.slices.back()));
    };

    // Steer the seed into this window, accepting only moves whose endpoint
    // gets closer to it. Steering biases the walk, but these moves precede
    // the burn-in of the gated sampling below.
    auto window_dist = [&](const PathSample<typename Sys::State>& p) {
      const double v = sys.order_parameter(p.traj.slices.back());
      return std::max({win.lo - v, v - win.hi, 0.0});
    };
    int steer = 0;
    while (!gate(seed_path)) {
      const std::size_t s = 1 + rng::below(eng, n_steps - 1);
      try {
        auto fresh = two_way_shoot(sys, seed_path, s, cfg.dp_width * rng::normal(eng),
                                   regions, eng);
        if (fresh.flags.starts_in_a && window_dist(fresh) < window_dist(seed_path) &&
            std::log(rng::uniform(eng)) <
                shoot_acceptance_log_ratio(sys, seed_path, fresh, s))
          seed_path = std::move(fresh);
      } catch (const DegenerateDiffusionError&) {
      }
      if (++steer > 200 * cfg.moves_per_window)
        throw std::runtime_error("umbrella_scale_factor: could not steer into window " +
                                 std::to_string(k));
    }

    PathSample<typename Sys::State> cur = seed_path;
    bool seeded_next = false;
    for (int move = 0; move < cfg.moves_per_window + cfg.burn_in; ++move) {
      const std::size_t s = 1 + rng::below(eng, n_steps - 1);
      try {
        auto fresh = two_way_shoot(sys, cur, s, cfg.dp_width * rng::normal(eng), regions, eng);
        if (gate(fresh) &&
            std::log(rng::uniform(eng)) < shoot_acceptance_log_ratio(sys, cur, fresh, s))
          cur = std::move(fresh);
      } catch (const DegenerateDiffusionError&) {
      }
      if (move < cfg.burn_in) continue;
      const double end_op = sys.order_parameter(cur.traj.slices.back());
      histogram[k][std::size_t(bin_of(end_op))] += 1.0;
      if (k + 1 < windows.size() && windows[k + 1].contains(end_op)) {
        seed_path = cur;
        seeded_next = true;
      }
    }
    if (k + 1 < windows.size() && !seeded_next) seed_path = std::move(cur);
  }

  // Match window histograms at their seams, then average the scaled counts.
  std::vector<double> scale(windows.size(), 1.0);
  for (std::size_t k = 0; k + 1 < windows.size(); ++k) {
    double shared_cur = 0.0, shared_next = 0.0;
    int shared_bins = 0;
    for (int b = 0; b < n_bins; ++b)
      if (histogram[k][b] > 0.0 && histogram[k + 1][b] > 0.0) {
        shared_cur += scale[k] * histogram[k][b];
        shared_next += histogram[k + 1][b];
        ++shared_bins;
      }
    if (shared_bins < 2 || shared_next <= 0.0)
      throw std::runtime_error("umbrella_scale_factor: windows " + std::to_string(k) + " and " +
                               std::to_string(k + 1) + " share fewer than two occupied bins");
    scale[k + 1] = shared_cur / shared_next;
  }

  double total = 0.0, in_b = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    double weight_sum = 0.0, count_sum = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k)
      if (histogram[k][b] > 0.0) {
        weight_sum += scale[k] * histogram[k][b] * histogram[k][b];
        count_sum += histogram[k][b];
      }
    if (count_sum <= 0.0) continue;
    const double density = weight_sum / count_sum;
    total += density;
    const double center = lo_edge + (b + 0.5) * cfg.bin_width;
    if (center >= regions.b_min) in_b += density;
  }
  if (total <= 0.0) throw std::runtime_error("umbrella_scale_factor: empty histograms");
  return in_b / total;
}

}  // namespace qpath
