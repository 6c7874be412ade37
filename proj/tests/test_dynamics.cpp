// Integrators checked against closed forms and equilibrium statistics:
//   - Langevin: force-free points, free drift, Boltzmann marginal (KS)
//   - SSE drift/diffusion algebraic identities, renormalized Euler step
//   - coherent evolution: conservation, eigenstate phases, doublet tunneling
//   - Gaussian centroid: noise-amplitude roots, Langevin drift reduction

#include "doctest.h"

#include <cmath>
#include <functional>
#include <memory>
#include <complex>
#include <vector>

#include "qpath/dynamics.hpp"
#include "qpath/rng.hpp"
#include "qpath/stats.hpp"

using namespace qpath;
using std::complex;

namespace {

SimParams default_params(double t_over_barrier) {
  SimParams prm;
  prm.dt = 1e-3;
  prm.gamma = 0.25;
  prm.temperature = t_over_barrier * prm.well.barrier_height();
  return prm;
}

// Empirical CDF target: normalized integral of exp(-v(x)/T) on a fine grid.
std::function<double(double)> boltzmann_position_cdf(const DoubleWell& well, double temp) {
  const int n = 4001;
  const double lo = -10.0, hi = 10.0, dx = (hi - lo) / (n - 1);
  auto cum = std::make_shared<std::vector<double>>(n, 0.0);
  double prev = std::exp(-well.value(lo) / temp);
  for (int i = 1; i < n; ++i) {
    const double x = lo + i * dx;
    const double cur = std::exp(-well.value(x) / temp);
    (*cum)[std::size_t(i)] = (*cum)[std::size_t(i) - 1] + 0.5 * (prev + cur) * dx;
    prev = cur;
  }
  const double z = cum->back();
  for (auto& c : *cum) c /= z;
  return [cum, lo, hi, dx](double x) {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    const double f = (x - lo) / dx;
    const auto i = std::size_t(f);
    const double w = f - double(i);
    return (*cum)[i] * (1.0 - w) + (*cum)[i + 1] * w;
  };
}

SseOps test_ops(int dim, double gamma, double temp) {
  BasisConfig cfg;
  cfg.dim = dim;
  return make_sse_ops(cfg, DoubleWell{}, gamma, temp);
}

}  // namespace

TEST_CASE("langevin step at special points") {
  SimParams prm = default_params(0.1);
  const double xmin = prm.well.minimum();

  ClassicalState still = langevin_step({xmin, 0.0}, prm, 0.0);
  CHECK(std::abs(still.p) < 1e-4);   // force vanishes at the minimum
  CHECK(still.x == doctest::Approx(xmin));

  SimParams free_prm = prm;
  free_prm.gamma = 0.0;
  ClassicalState top = langevin_step({0.0, 1.0}, free_prm, 0.0);
  CHECK(top.p == doctest::Approx(1.0).epsilon(1e-14));  // v'(0) = 0
  CHECK(top.x == doctest::Approx(free_prm.dt / free_prm.mass).epsilon(1e-14));
}

TEST_CASE("langevin free ballistic motion is exact") {
  SimParams prm;
  prm.gamma = 0.0;                 // no friction and, with it, no noise
  prm.well = DoubleWell{1e-300, 1e-300};  // effectively flat potential
  ClassicalState s{-1.0, 0.8};
  for (int i = 0; i < 1000; ++i) s = langevin_step(s, prm, 3.0);  // xi moot at gamma = 0
  CHECK(s.x == doctest::Approx(-1.0 + 0.8 * 1000 * prm.dt).epsilon(1e-12));
  CHECK(s.p == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("langevin long-run marginal is Boltzmann") {
  SimParams prm = default_params(0.5);
  rng::Engine eng = rng::make_stream(12345, 0, "boltzmann");
  ClassicalState s{-prm.well.minimum(), 0.0};
  const long burn = 100000, total = 20000000, stride = 50000;
  for (long i = 0; i < burn; ++i) s = langevin_step(s, prm, rng::normal(eng));
  std::vector<double> xs;
  for (long i = 0; i < total; ++i) {
    s = langevin_step(s, prm, rng::normal(eng));
    if (i % stride == stride - 1) xs.push_back(s.x);
  }
  auto res = stats::ks_test(xs, boltzmann_position_cdf(prm.well, prm.temperature));
  CHECK(res.p > 0.01);
}

TEST_CASE("sse drift identities") {
  SseOps ops = test_ops(30, 0.25, 0.30625);
  QuantumState psi = coherent_state(ops.basis, -2.0, 0.5);

  QuantumState u = sse_drift(psi, ops);
  QuantumState sig = sse_diffusion(psi, ops);
  CHECK(psi.dot(u).real() == doctest::Approx(-0.5 * sig.squaredNorm()).epsilon(1e-10));

  // Global phase covariance.
  const complex<double> phase = std::polar(1.0, 0.7);
  CHECK((sse_drift(phase * psi, ops) - phase * u).norm() < 1e-12);
  CHECK((sse_diffusion(phase * psi, ops) - phase * sig).norm() < 1e-12);

  // Closed-system limit: zero out the coupling.
  SseOps closed = ops;
  closed.coupling.setZero();
  closed.coupling_adj.setZero();
  QuantumState u0 = sse_drift(psi, closed);
  QuantumState expect = complex<double>(0, -1) / ops.basis.hbar * (ops.h_damped * psi);
  CHECK((u0 - expect).norm() < 1e-12);
}

TEST_CASE("sse diffusion identities") {
  SseOps ops = test_ops(30, 0.25, 0.30625);
  QuantumState psi = coherent_state(ops.basis, 1.5, -1.0);
  QuantumState sig = sse_diffusion(psi, ops);

  CHECK(std::abs(psi.dot(sig)) < 1e-12);

  const complex<double> lmean = expectation(ops.coupling, psi);
  const double ldl = expectation(ops.coupling_adj * ops.coupling, psi).real();
  CHECK(sig.squaredNorm() ==
        doctest::Approx((ldl - std::norm(lmean)) / ops.basis.hbar).epsilon(1e-10));

  // Two-level toy with diagonal coupling: eigenstates of L have no diffusion.
  SseOps toy;
  toy.basis.dim = 2;
  toy.h_damped = Operator::Zero(2, 2);
  toy.coupling = Operator::Zero(2, 2);
  toy.coupling(0, 0) = 2.0;
  toy.coupling(1, 1) = -1.0;
  toy.coupling_adj = toy.coupling.adjoint();
  QuantumState e0 = QuantumState::Zero(2);
  e0(0) = 1.0;
  CHECK(sse_diffusion(e0, toy).norm() < 1e-14);
}

TEST_CASE("sse euler step norm behaviour") {
  SseOps ops = test_ops(30, 0.25, 0.30625);
  const double dt = 1e-3;
  rng::Engine eng = rng::make_stream(99, 1, "norm");
  QuantumState psi = coherent_state(ops.basis, -3.0, 0.0);

  double dev_sum = 0.0;
  const int n = 10000;
  QuantumState cur = psi;
  for (int i = 0; i < n; ++i) {
    const double xi = rng::normal(eng);
    QuantumState raw = cur + sse_drift(cur, ops) * dt + sse_diffusion(cur, ops) * (xi * std::sqrt(dt));
    dev_sum += std::abs(raw.norm() - 1.0);
    cur = raw.normalized();
    CHECK(cur.norm() == doctest::Approx(1.0).epsilon(1e-13));
  }
  CHECK(dev_sum / n < 5.0 * dt);

  // Oversized dt trips the guard.
  CHECK_THROWS_AS(sse_euler_step(psi, ops, 1.0, 3.0), std::runtime_error);
}

TEST_CASE("sse propagation is phase covariant") {
  SseOps ops = test_ops(24, 0.25, 0.30625);
  QuantumState psi = coherent_state(ops.basis, -2.5, 0.3);
  const complex<double> phase = std::polar(1.0, -1.1);
  rng::Engine a = rng::make_stream(7, 0, "phase");
  rng::Engine b = rng::make_stream(7, 0, "phase");
  auto t1 = propagate(psi, ops, 1e-3, 200, a);
  auto t2 = propagate((phase * psi).eval(), ops, 1e-3, 200, b);
  CHECK((t2.slices.back() - phase * t1.slices.back()).norm() < 1e-10);
}

TEST_CASE("coherent propagation conserves and tunnels") {
  BasisConfig cfg;
  cfg.dim = 60;
  DoubleWell well;
  const Operator h = hamiltonian(cfg, well);

  QuantumState left = coherent_state(cfg, -well.minimum(), 0.0);
  auto traj = coherent_propagate(left, h, cfg.hbar, 0.05, 200);
  const double e0 = expectation(h, traj.slices.front()).real();
  for (const auto& s : traj.slices) {
    CHECK(std::abs(expectation(h, s).real() - e0) < 1e-8);
    CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Eigenstate only picks up a phase.
  Eigen::SelfAdjointEigenSolver<Operator> es(h);
  QuantumState g = es.eigenvectors().col(0);
  auto etraj = coherent_propagate(g, h, cfg.hbar, 0.5, 50);
  CHECK(std::abs(etraj.slices.back().dot(g)) == doctest::Approx(1.0).epsilon(1e-10));

  // Doublet splitting sets the tunneling clock: half transfer at pi hbar / 2 dE.
  const double de = es.eigenvalues()(1) - es.eigenvalues()(0);
  const double t_half = M_PI * cfg.hbar / (2.0 * de);
  CHECK(t_half == doctest::Approx(1.38e5).epsilon(0.15));

  // Scan the left-well population through the first half transfer.
  Eigen::SelfAdjointEigenSolver<Operator> ex(position_operator(cfg));
  Operator proj_left = Operator::Zero(cfg.dim, cfg.dim);
  for (int i = 0; i < cfg.dim; ++i)
    if (ex.eigenvalues()(i) < 0.0)
      proj_left += ex.eigenvectors().col(i) * ex.eigenvectors().col(i).adjoint();
  const double scan_dt = t_half / 40.0;
  auto scan = coherent_propagate(left, h, cfg.hbar, scan_dt, 45);
  const double pop_start = expectation(proj_left, scan.slices.front()).real();
  CHECK(pop_start > 0.99);
  const double pop_half = expectation(proj_left, scan.slices[40]).real();
  CHECK(pop_half == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("gaussian centroid noise amplitudes") {
  SimParams prm = default_params(0.1);
  const double hbar = 1.0;
  const double mt = prm.mass * prm.temperature;

  // Minimum-uncertainty pair kills the momentum noise.
  GaussianMoments g;
  g.mean_x = -4.0;
  g.mean_p = 0.0;
  g.var_x = hbar / 2.0;
  g.var_p = hbar * hbar / (4.0 * g.var_x);
  GaussianMoments up = gaussian_centroid_step(g, prm, hbar, 1.0);
  GaussianMoments dn = gaussian_centroid_step(g, prm, hbar, -1.0);
  CHECK(up.mean_p == doctest::Approx(dn.mean_p).epsilon(1e-14));

  // var_x = hbar^2 / 8 m T is the root of the position-noise coefficient.
  GaussianMoments h = g;
  h.var_x = hbar * hbar / (8.0 * mt);
  h.var_p = hbar * hbar / (4.0 * h.var_x);  // stay on the uncertainty floor
  GaussianMoments hu = gaussian_centroid_step(h, prm, hbar, 1.0);
  GaussianMoments hd = gaussian_centroid_step(h, prm, hbar, -1.0);
  CHECK(hu.mean_x == doctest::Approx(hd.mean_x).epsilon(1e-14));

  // xi = 0 reduces to the Langevin drift on the means.
  GaussianMoments w;
  w.mean_x = -3.5;
  w.mean_p = 0.4;
  w.var_x = 0.5;
  w.var_p = 0.5;
  GaussianMoments drift = gaussian_centroid_step(w, prm, hbar, 0.0);
  ClassicalState ref = langevin_step({w.mean_x, w.mean_p}, prm, 0.0);
  CHECK(drift.mean_x == doctest::Approx(ref.x).epsilon(1e-14));
  CHECK(drift.mean_p == doctest::Approx(ref.p).epsilon(1e-14));
  CHECK(drift.var_x == w.var_x);  // spreads frozen

  // Moments outside the validity domain are rejected.
  GaussianMoments bad = w;
  bad.var_x = 4.0;
  bad.var_p = 4.0;
  CHECK_THROWS_AS(gaussian_centroid_step(bad, prm, hbar, 0.0), std::domain_error);
}

TEST_CASE("order parameter across kinds") {
  CHECK(order_parameter(ClassicalState{-4.18, 2.0}) == doctest::Approx(-4.18));
  CHECK(order_parameter(GaussianMoments{1.5, 0.0, 1.0, 1.0}) == doctest::Approx(1.5));

  BasisConfig cfg;
  cfg.dim = 40;
  const Operator x = position_operator(cfg);
  QuantumState vac = QuantumState::Zero(cfg.dim);
  vac(0) = 1.0;
  CHECK(order_parameter(vac, x) == doctest::Approx(0.0));
  QuantumState psi = coherent_state(cfg, -2.2, 0.9);
  CHECK(order_parameter(apply_parity(psi), x) ==
        doctest::Approx(-order_parameter(psi, x)).epsilon(1e-10));
}

TEST_CASE("propagate bookkeeping and determinism") {
  SimParams prm = default_params(0.1);
  rng::Engine e1 = rng::make_stream(42, 3, "traj");
  rng::Engine e2 = rng::make_stream(42, 3, "traj");
  auto t1 = propagate(ClassicalState{-4.0, 0.0}, prm, 500, e1);
  auto t2 = propagate(ClassicalState{-4.0, 0.0}, prm, 500, e2);
  CHECK(t1.slices.size() == 501);
  for (int i = 0; i <= 500; ++i) {
    CHECK(t1.slices[std::size_t(i)].x == t2.slices[std::size_t(i)].x);
    CHECK(t1.slices[std::size_t(i)].p == t2.slices[std::size_t(i)].p);
  }

  rng::Engine e3 = rng::make_stream(42, 4, "one");
  rng::Engine e4 = rng::make_stream(42, 4, "one");
  auto one = propagate(ClassicalState{1.0, -1.0}, prm, 1, e3);
  ClassicalState manual = langevin_step({1.0, -1.0}, prm, rng::normal(e4));
  CHECK(one.slices[1].x == manual.x);
  CHECK(one.slices[1].p == manual.p);
}

TEST_CASE("barrier top is unstable: trajectories settle into a well") {
  SimParams prm = default_params(0.1);
  const double edge = 3.0;
  int resolved = 0;
  for (int seed = 0; seed < 100; ++seed) {
    rng::Engine eng = rng::make_stream(2024, std::uint64_t(seed), "settle");
    ClassicalState s{0.0, 0.0};
    for (int i = 0; i < 200000; ++i) {
      s = langevin_step(s, prm, rng::normal(eng));
      if (std::abs(s.x) >= edge) {
        ++resolved;
        break;
      }
    }
  }
  CHECK(resolved == 100);
}

TEST_CASE("energy drift of the conservative integrator is O(dt)") {
  SimParams prm = default_params(0.1);
  prm.gamma = 0.0;  // disables both friction and noise
  auto energy = [&](const ClassicalState& s) {
    return 0.5 * s.p * s.p / prm.mass + prm.well.value(s.x);
  };
  auto drift_at = [&](double dt) {
    SimParams p2 = prm;
    p2.dt = dt;
    ClassicalState s{-3.0, 0.5};
    const double e0 = energy(s);
    const int n = int(std::lround(2.0 / dt));
    for (int i = 0; i < n; ++i) s = langevin_step(s, p2, 0.0);
    return std::abs(energy(s) - e0);
  };
  const double ratio = drift_at(1e-3) / drift_at(5e-4);
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.5);
}
