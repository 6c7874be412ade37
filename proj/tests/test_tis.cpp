#include "doctest.h"

#include "qpath/fock.hpp"
#include "qpath/tis.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace qpath;

namespace {

ClassicalSystem hot_system(double tb) {
  SimParams prm;
  prm.dt = 1e-3;
  prm.gamma = 0.25;
  prm.temperature = tb * prm.well.barrier_height();
  return ClassicalSystem{prm};
}

const ClassicalState kWellBottom{-4.1833001327, 0.0};

SseSystem make_quantum_system(int dim, double tb, double dt) {
  BasisConfig cfg;
  cfg.dim = dim;
  DoubleWell well;
  const double temperature = tb * well.barrier_height();
  SseOps ops = make_sse_ops(cfg, well, 0.25, temperature);
  // Any fixed parity-even positive density works as the endpoint weight for
  // sampler mechanics; the damped Gibbs form avoids solving for the exact
  // stationary state of the truncated generator.
  Operator rho = gibbs_state(ops.h_damped, temperature);
  return SseSystem(ops, dt, rho);
}

// Brute-force crossing ensemble at tb = 0.5: every outward crossing of the A
// boundary starts a path that runs to the first A return or B arrival. The
// maximum order parameter of each path feeds every conditional probability
// the sampler is checked against.
struct TisOracle {
  static constexpr double tb = 0.5;
  StateRegions regions{-3.0, 3.0};
  std::vector<double> maxes;
  long paths = 0;
  long to_b = 0;
  double total_time = 0.0;

  TisOracle() {
    ClassicalSystem sys = hot_system(tb);
    rng::Engine eng = rng::make_stream(47, 0, "tisoracle");
    ClassicalState state = kWellBottom;
    double op = state.x;
    const std::size_t n_steps = 30000000;
    maxes.reserve(2000);
    bool in_path = false;
    double path_max = 0.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
      const double prev = op;
      state = sys.step(state, rng::normal(eng));
      op = state.x;
      if (!in_path && prev <= regions.a_max && op > regions.a_max) {
        in_path = true;
        path_max = op;
        continue;
      }
      if (in_path) {
        path_max = std::max(path_max, op);
        if (op <= regions.a_max || op >= regions.b_min) {
          ++paths;
          to_b += op >= regions.b_min ? 1 : 0;
          maxes.push_back(path_max);
          in_path = false;
        }
      }
    }
    total_time = double(n_steps) * sys.dt();
  }

  double p_beyond(double lambda) const {
    long n = 0;
    for (double m : maxes) n += m >= lambda ? 1 : 0;
    return double(n) / double(paths);
  }

  // conditional P(max >= hi | max >= lo)
  double conditional(double lo, double hi) const { return p_beyond(hi) / p_beyond(lo); }
};

const TisOracle& tis_oracle() {
  static TisOracle oracle;
  return oracle;
}

template <class Sys>
TisPath<typename Sys::State> seed_path(const Sys& sys, const StateRegions& regions,
                                       const typename Sys::State& initial, std::uint64_t seed) {
  rng::Engine eng = rng::make_stream(seed, 0, "tisseed");
  return generate_tis_seed(sys, regions, initial, eng);
}

// Independent composition of the shot acceptance: full path weight difference
// plus the generation densities of each path's regrown segments.
template <class State>
double ratio_via_generation(const ClassicalSystem& sys, const TisPath<State>& oldp,
                            std::size_t s_old, const TisPath<State>& newp, std::size_t s_new) {
  auto path_weight = [&](const TisPath<State>& p) {
    double w = sys.stationary_log_weight(p.traj.slices.front());
    for (double f : p.fwd_step_log) w += f;
    return w;
  };
  auto generation = [&](const TisPath<State>& p, std::size_t s) {
    double g = 0.0;
    for (std::size_t i = s; i < p.steps(); ++i) g += p.fwd_step_log[i];
    for (std::size_t i = 0; i < s; ++i) g += p.bwd_step_log[i];
    return g;
  };
  const double n_old = double(oldp.traj.slices.size() - 2);
  const double n_new = double(newp.traj.slices.size() - 2);
  return std::log(n_old / n_new) + path_weight(newp) - path_weight(oldp) +
         generation(oldp, s_old) - generation(newp, s_new);
}

}  // namespace

TEST_CASE("interface sets validate their shape") {
  const StateRegions regions{-3.0, 3.0};
  InterfaceSet good;
  good.lambdas = {-3.0, -2.0, 0.0, 3.0};
  CHECK_NOTHROW(good.validate(regions));
  CHECK(good.count() == 4);

  InterfaceSet two;
  two.lambdas = {-3.0, 3.0};
  CHECK_NOTHROW(two.validate(regions));

  InterfaceSet short_set;
  short_set.lambdas = {-3.0};
  CHECK_THROWS_AS(short_set.validate(regions), std::invalid_argument);

  InterfaceSet bad_front;
  bad_front.lambdas = {-2.9, 0.0, 3.0};
  CHECK_THROWS_AS(bad_front.validate(regions), std::invalid_argument);

  InterfaceSet bad_back;
  bad_back.lambdas = {-3.0, 0.0, 2.9};
  CHECK_THROWS_AS(bad_back.validate(regions), std::invalid_argument);

  InterfaceSet flat;
  flat.lambdas = {-3.0, 0.0, 0.0, 3.0};
  CHECK_THROWS_AS(flat.validate(regions), std::invalid_argument);
}

TEST_CASE("first interface flux counts armed crossings") {
  const StateRegions regions{-3.0, 3.0};

  FluxConfig cfg;
  cfg.n_steps = 10000000;
  cfg.seed = 7;

  ClassicalSystem hot = hot_system(0.5);
  const FluxEstimate warm = first_interface_flux(hot, regions, kWellBottom, cfg);
  CHECK(warm.effective > 0.05);
  CHECK(warm.effective < 0.11);
  CHECK(warm.plain >= warm.effective);
  CHECK(warm.crossings_plain >= warm.crossings_effective);
  CHECK(warm.crossings_effective > 400);
  CHECK(warm.effective_stderr > 0.0);
  CHECK(warm.effective_stderr < 0.2 * warm.effective);
  CHECK(warm.total_time == doctest::Approx(10000.0));
  // recross suppression is a small correction, not a rewrite of the count
  CHECK(warm.effective / warm.plain > 0.85);

  ClassicalSystem cool = hot_system(0.3);
  const FluxEstimate cooler = first_interface_flux(cool, regions, kWellBottom, cfg);
  CHECK(cooler.effective > 0.0);
  CHECK(warm.effective > cooler.effective);

  SUBCASE("too few crossings is an error") {
    FluxConfig tiny = cfg;
    tiny.n_steps = 50000;
    CHECK_THROWS_AS(first_interface_flux(cool, regions, kWellBottom, tiny), std::runtime_error);
  }
  SUBCASE("config validation") {
    FluxConfig bad = cfg;
    bad.blocks = 4;
    CHECK_THROWS_AS(first_interface_flux(hot, regions, kWellBottom, bad), std::invalid_argument);
    FluxConfig core = cfg;
    core.a_core_offset = 0.0;
    CHECK_THROWS_AS(first_interface_flux(hot, regions, kWellBottom, core), std::invalid_argument);
  }
}

TEST_CASE("seed paths satisfy the ensemble structure") {
  const StateRegions regions{-3.0, 3.0};
  ClassicalSystem sys = hot_system(0.5);

  auto seed = seed_path(sys, regions, kWellBottom, 17);
  REQUIRE(seed.steps() >= 2);
  CHECK(tis_series_ok(seed.op, regions));
  CHECK(seed.op.front() <= regions.a_max);
  CHECK(seed.op[1] > regions.a_max);
  const bool ends_a = seed.op.back() <= regions.a_max;
  const bool ends_b = seed.op.back() >= regions.b_min;
  CHECK((ends_a || ends_b));
  CHECK(seed.max_op == *std::max_element(seed.op.begin(), seed.op.end()));
  CHECK(seed.fwd_step_log.size() == seed.steps());
  CHECK(seed.bwd_step_log.size() == seed.steps());

  SUBCASE("runs must start inside A") {
    rng::Engine eng = rng::make_stream(18, 0, "tisseed");
    CHECK_THROWS_AS(generate_tis_seed(sys, regions, ClassicalState{0.0, 0.0}, eng),
                    std::invalid_argument);
  }
  SUBCASE("structurally invalid trajectories are rejected") {
    rng::Engine eng = rng::make_stream(19, 0, "stay");
    Trajectory<ClassicalState> inside = propagate(kWellBottom, sys.prm, 200, eng);
    CHECK_THROWS_AS(make_tis_path(sys, inside, regions), std::invalid_argument);
  }
}

TEST_CASE("variable length shots keep structure and the dual route ratio agrees") {
  const StateRegions regions{-3.0, 3.0};
  ClassicalSystem sys = hot_system(0.5);
  auto old = seed_path(sys, regions, kWellBottom, 23);
  REQUIRE(old.traj.slices.size() >= 3);

  rng::Engine eng = rng::make_stream(29, 0, "shots");
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 12; ++trial) {
    const std::size_t s = 1 + rng::below(eng, old.traj.slices.size() - 2);
    const double dp = 0.6 * rng::normal(eng);
    auto shot = detail::variable_two_way_shoot(sys, old, s, dp, regions, 200000, eng);
    if (!shot.ok) continue;
    ++checked;

    CHECK(tis_series_ok(shot.path.op, regions));
    // the momentum kick leaves the kicked slice's order parameter untouched
    CHECK(shot.path.op[shot.kick_index] == old.op[s]);
    CHECK(shot.kick_index >= 1);
    CHECK(shot.kick_index + 1 < shot.path.traj.slices.size());

    const double lr = tis_acceptance_log_ratio(sys, old, s, shot.path, shot.kick_index);
    const double lr_gen = ratio_via_generation(sys, old, s, shot.path, shot.kick_index);
    CHECK(std::abs(lr - lr_gen) < 1e-9);
    const double lr_back = tis_acceptance_log_ratio(sys, shot.path, shot.kick_index, old, s);
    CHECK(std::abs(lr + lr_back) < 1e-10);
  }
  REQUIRE(checked >= 12);

  CHECK(std::abs(tis_acceptance_log_ratio(sys, old, 5, old, 5)) < 1e-12);
}

TEST_CASE("ensemble estimates match the brute force oracle") {
  const auto& oracle = tis_oracle();
  const StateRegions regions = oracle.regions;
  ClassicalSystem sys = hot_system(TisOracle::tb);

  REQUIRE(oracle.paths > 1000);
  const double p_b = double(oracle.to_b) / double(oracle.paths);
  CHECK(p_b > 0.10);
  CHECK(p_b < 0.24);

  TisConfig cfg;
  cfg.n_moves = 3000;
  cfg.burn_in = 300;
  cfg.dp_width = 0.6;
  cfg.max_leg_steps = 200000;

  struct Gap {
    std::vector<double> lambdas;
    std::size_t index;
    double lo, hi;
  };
  const std::vector<Gap> gaps = {
      {{-3.0, -2.5, 3.0}, 0, -3.0, -2.5},
      {{-3.0, -2.5, -2.0, 3.0}, 1, -2.5, -2.0},
      {{-3.0, -2.0, -1.0, 3.0}, 1, -2.0, -1.0},
      {{-3.0, -1.0, 3.0}, 1, -1.0, 3.0},
  };

  auto current = seed_path(sys, regions, kWellBottom, 31);
  std::vector<double> estimates;
  for (std::size_t g = 0; g < gaps.size(); ++g) {
    const Gap& gap = gaps[g];
    InterfaceSet ifs;
    ifs.lambdas = gap.lambdas;
    cfg.seed = 61 + g;
    REQUIRE(current.max_op >= gap.lo);
    auto res = tis_ensemble_sample(sys, regions, ifs, gap.index, cfg, current);

    CHECK(res.stats.trials == cfg.n_moves);
    CHECK(res.stats.successes <= res.stats.trials);
    CHECK(double(res.stats.accepted) / res.stats.trials > 0.2);
    const double expected = oracle.conditional(gap.lo, gap.hi);
    CAPTURE(gap.lo);
    CAPTURE(gap.hi);
    CHECK(std::abs(res.stats.estimate - expected) < 0.065);
    estimates.push_back(res.stats.estimate);

    REQUIRE(!res.successes.empty());
    current = res.successes.back();
  }

  // chained product against the direct B arrival fraction; binomial errors
  // understate the chain noise, so the margin is an absolute one
  double product_b = 1.0;
  for (double e : estimates) product_b *= e;
  CHECK(std::abs(product_b - p_b) < 0.045);

  // nesting: the direct estimate cannot sit below the three gap product by
  // more than a generously inflated combined uncertainty
  const double direct_m1 = oracle.p_beyond(-1.0);
  const double product_m1 = estimates[0] * estimates[1] * estimates[2];
  const double sigma = std::sqrt(direct_m1 * (1.0 - direct_m1) / double(oracle.paths)) +
                       product_m1 * 0.03;
  CHECK(direct_m1 >= product_m1 - 3.0 * sigma);
}

TEST_CASE("degenerate gaps count fully and targets order the estimates") {
  const StateRegions regions{-3.0, 3.0};
  ClassicalSystem sys = hot_system(0.5);
  auto seed = seed_path(sys, regions, kWellBottom, 37);

  TisConfig cfg;
  cfg.n_moves = 1200;
  cfg.burn_in = 150;
  cfg.dp_width = 0.6;
  cfg.seed = 71;

  SUBCASE("a zero width gap is crossed by every qualifying path") {
    InterfaceSet flat;
    flat.lambdas = {-3.0, -2.0, -2.0, 3.0};
    auto boosted = seed;
    if (boosted.max_op < -2.0) {
      InterfaceSet probe;
      probe.lambdas = {-3.0, -2.0, 3.0};
      auto res = tis_ensemble_sample(sys, regions, probe, 0, cfg, seed);
      REQUIRE(!res.successes.empty());
      boosted = res.successes.back();
    }
    auto res = tis_ensemble_sample(sys, regions, flat, 1, cfg, boosted);
    CHECK(res.stats.estimate == 1.0);
    CHECK(res.stats.successes == res.stats.trials);
  }

  SUBCASE("same chain, farther targets, smaller estimates") {
    std::vector<double> targets{-2.5, -1.0, 2.0};
    std::vector<double> estimates;
    for (double next : targets) {
      InterfaceSet ifs;
      ifs.lambdas = {-3.0, next, 3.0};
      auto res = tis_ensemble_sample(sys, regions, ifs, 0, cfg, seed);
      estimates.push_back(res.stats.estimate);
    }
    // identical seeds make the chains identical, so ordering is exact
    CHECK(estimates[0] > estimates[1]);
    CHECK(estimates[1] > estimates[2]);
    CHECK(estimates[2] > 0.0);
  }

  SUBCASE("misuse is rejected") {
    InterfaceSet ifs;
    ifs.lambdas = {-3.0, -1.0, 3.0};
    CHECK_THROWS_AS(tis_ensemble_sample(sys, regions, ifs, 2, cfg, seed), std::invalid_argument);

    InterfaceSet wrong_front;
    wrong_front.lambdas = {-2.8, 3.0};
    CHECK_THROWS_AS(tis_ensemble_sample(sys, regions, wrong_front, 0, cfg, seed),
                    std::invalid_argument);

    InterfaceSet order;
    order.lambdas = {-3.0, -1.0, -2.0, 3.0};
    CHECK_THROWS_AS(tis_ensemble_sample(sys, regions, order, 1, cfg, seed),
                    std::invalid_argument);

    InterfaceSet fine;
    fine.lambdas = {-3.0, 2.5, 3.0};
    CHECK_THROWS_AS(tis_ensemble_sample(sys, regions, fine, 1, cfg, seed),
                    std::invalid_argument);  // seed never crosses 2.5
  }
}

TEST_CASE("stored paths keep structure and caps reject moves") {
  const StateRegions regions{-3.0, 3.0};
  ClassicalSystem sys = hot_system(0.5);
  auto seed = seed_path(sys, regions, kWellBottom, 41);

  InterfaceSet ifs;
  ifs.lambdas = {-3.0, -2.0, 3.0};

  TisConfig cfg;
  cfg.n_moves = 1000;
  cfg.burn_in = 100;
  cfg.dp_width = 0.6;
  cfg.store_stride = 100;
  cfg.seed = 83;

  auto res = tis_ensemble_sample(sys, regions, ifs, 0, cfg, seed);
  REQUIRE(res.stored.size() == 10);
  for (const auto& p : res.stored) {
    CHECK(tis_series_ok(p.op, regions));
    CHECK(p.op.front() <= regions.a_max);
    CHECK(p.op[1] > regions.a_max);
    CHECK((p.op.back() <= regions.a_max || p.op.back() >= regions.b_min));
    CHECK(p.max_op >= ifs.lambdas[0]);
  }
  CHECK(res.max_progress.size() == std::size_t(cfg.n_moves));

  SUBCASE("tight leg caps show up as rejected moves") {
    TisConfig capped = cfg;
    capped.store_stride = 0;
    capped.max_leg_steps = 400;
    capped.seed = 89;
    auto r = tis_ensemble_sample(sys, regions, ifs, 0, capped, seed);
    CHECK(r.stats.capped > 0);
    CHECK(r.stats.trials == capped.n_moves);
    CHECK(r.stats.estimate >= 0.0);
    CHECK(r.stats.estimate <= 1.0);
    CHECK(r.stats.accepted < cfg.n_moves);
  }

  SUBCASE("identical configuration reproduces the chain") {
    auto a = tis_ensemble_sample(sys, regions, ifs, 0, cfg, seed);
    auto b = tis_ensemble_sample(sys, regions, ifs, 0, cfg, seed);
    CHECK(a.stats.successes == b.stats.successes);
    CHECK(a.stats.accepted == b.stats.accepted);
    REQUIRE(a.current.steps() == b.current.steps());
    for (std::size_t i = 0; i < a.current.traj.slices.size(); ++i) {
      CHECK(a.current.traj.slices[i].x == b.current.traj.slices[i].x);
      CHECK(a.current.traj.slices[i].p == b.current.traj.slices[i].p);
    }
  }
}

TEST_CASE("greedy placement spans the gap with near target probabilities") {
  const StateRegions regions{-3.0, 3.0};
  ClassicalSystem sys = hot_system(0.5);
  auto seed = seed_path(sys, regions, kWellBottom, 43);

  PlacementConfig cfg;
  cfg.target = 0.4;
  cfg.min_spacing = 0.05;
  cfg.pilot.n_moves = 1500;
  cfg.pilot.burn_in = 200;
  cfg.pilot.dp_width = 0.6;
  cfg.pilot.seed = 97;

  auto out = place_interfaces(sys, regions, cfg, seed);
  const auto& l = out.interfaces.lambdas;
  REQUIRE(l.size() >= 3);
  CHECK(l.front() == regions.a_max);
  CHECK(l.back() == regions.b_min);
  for (std::size_t i = 1; i < l.size(); ++i) CHECK(l[i] - l[i - 1] >= cfg.min_spacing);
  CHECK(out.realized.size() == l.size() - 1);
  for (std::size_t i = 0; i + 1 < out.realized.size(); ++i) {
    CAPTURE(i);
    CHECK(out.realized[i] > 0.28);
    CHECK(out.realized[i] < 0.52);
  }

  SUBCASE("unreachable targets stall with an error") {
    PlacementConfig stall = cfg;
    stall.target = 0.995;
    stall.min_spacing = 0.5;
    CHECK_THROWS_AS(place_interfaces(sys, regions, stall, seed), std::runtime_error);
  }
  SUBCASE("target must be a probability") {
    PlacementConfig bad = cfg;
    bad.target = 1.0;
    CHECK_THROWS_AS(place_interfaces(sys, regions, bad, seed), std::invalid_argument);
    bad.target = 0.0;
    CHECK_THROWS_AS(place_interfaces(sys, regions, bad, seed), std::invalid_argument);
  }
}

TEST_CASE("rate assembly is the exact product with propagated errors") {
  std::vector<CrossingStats> stats(3);
  stats[0].estimate = 0.4;
  stats[0].stderr_ = 0.02;
  stats[1].estimate = 0.3;
  stats[1].stderr_ = 0.015;
  stats[2].estimate = 0.2;
  stats[2].stderr_ = 0.01;

  const double flux = 4.30e-3;
  const double flux_err = 2.0e-4;
  RateEstimate est = tis_rate(flux, flux_err, stats);

  double expected = flux;
  for (const auto& s : stats) expected *= s.estimate;
  CHECK(est.rate == expected);
  CHECK(est.flux0 == flux);
  CHECK(est.crossing_probs.size() == 3);

  double rel = (flux_err / flux) * (flux_err / flux);
  for (const auto& s : stats) rel += (s.stderr_ / s.estimate) * (s.stderr_ / s.estimate);
  CHECK(est.stderr_ == doctest::Approx(est.rate * std::sqrt(rel)).epsilon(1e-14));

  SUBCASE("certain crossings leave the flux") {
    std::vector<CrossingStats> sure(2);
    sure[0].estimate = 1.0;
    sure[1].estimate = 1.0;
    RateEstimate e = tis_rate(flux, flux_err, sure);
    CHECK(e.rate == flux);
    CHECK(e.stderr_ == doctest::Approx(flux_err).epsilon(1e-14));
  }
  SUBCASE("a dead gap zeroes the rate") {
    std::vector<CrossingStats> dead(1);
    dead[0].estimate = 0.0;
    RateEstimate e = tis_rate(flux, flux_err, dead);
    CHECK(e.rate == 0.0);
    CHECK(e.stderr_ == 0.0);
  }
  SUBCASE("no gaps at all") {
    RateEstimate e = tis_rate(flux, flux_err, {});
    CHECK(e.rate == flux);
  }
}

TEST_CASE("quantum ensembles run with the same machinery") {
  const StateRegions regions{-1.5, 1.5};
  SseSystem sys = make_quantum_system(20, 0.5, 1e-3);

  QuantumState start = coherent_state(sys.ops().basis, -2.5, 0.0);
  rng::Engine eng = rng::make_stream(53, 0, "qseed");
  auto seed = generate_tis_seed(sys, regions, start, eng, 50000, 4000000);
  REQUIRE(seed.steps() >= 2);
  CHECK(tis_series_ok(seed.op, regions));

  SUBCASE("flux estimator") {
    FluxConfig fcfg;
    fcfg.n_steps = 1000000;
    fcfg.min_crossings = 10;
    fcfg.a_core_offset = 0.4;
    fcfg.seed = 59;
    auto flux = first_interface_flux(sys, regions, start, fcfg);
    CHECK(flux.effective > 0.0);
    CHECK(flux.plain >= flux.effective);
    CHECK(flux.effective_stderr > 0.0);
  }

  SUBCASE("crossing ensemble") {
    InterfaceSet ifs;
    ifs.lambdas = {-1.5, 0.0, 1.5};

    TisConfig cfg;
    cfg.n_moves = 220;
    cfg.burn_in = 40;
    cfg.dp_width = 0.75;
    cfg.max_leg_steps = 30000;
    cfg.max_seed_paths = 5;
    cfg.seed = 67;

    auto res = tis_ensemble_sample(sys, regions, ifs, 0, cfg, seed);
    CHECK(res.stats.trials == cfg.n_moves);
    CHECK(double(res.stats.accepted) / res.stats.trials > 0.02);
    CHECK(res.stats.estimate >= 0.0);
    CHECK(res.stats.estimate <= 1.0);
    CHECK(tis_series_ok(res.current.op, regions));
    for (const auto& psi : res.current.traj.slices)
      CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}
