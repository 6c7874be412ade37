#include "CLI11.hpp"

#include "qpath/analysis.hpp"
#include "qpath/config.hpp"
#include "qpath/io.hpp"
#include "qpath/system.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

// Experiment driver: every subcommand reads one config, runs one workflow,
// and leaves a self-describing run directory behind (config snapshot, CSV or
// binary artifacts, manifest with per-file checksums). Identical config and
// seed reproduce every artifact byte for byte.

namespace fs = std::filesystem;
using namespace qpath;

namespace {

std::string num(double v) { return io::format_number(v); }

// ------------------------------ run directory ------------------------------

struct RunDir {
  fs::path dir;
  std::vector<std::string> files;

  explicit RunDir(const std::string& out) : dir(out) { fs::create_directories(dir); }
  std::string file(const std::string& name) {
    files.push_back(name);
    return (dir / name).string();
  }
};

// ------------------------------ shared pieces ------------------------------

ClassicalState classical_start(const ExperimentConfig& cfg) {
  return {-cfg.well().minimum(), 0.0};
}

QuantumState quantum_start(const ExperimentConfig& cfg) {
  return coherent_state(cfg.basis(), -cfg.well().minimum(), 0.0);
}

SseSystem make_sse_system(const ExperimentConfig& cfg) {
  return SseSystem::make(cfg.basis(), cfg.well(), cfg.gamma, cfg.temperature, cfg.dt);
}

std::vector<PathTransform> parse_transforms(const std::string& names) {
  std::vector<PathTransform> out;
  std::stringstream ss(names);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item == "time")
      out.push_back(PathTransform::time_reversal);
    else if (item == "parity")
      out.push_back(PathTransform::parity);
    else if (item == "parity_time")
      out.push_back(PathTransform::parity_time);
    else if (!item.empty())
      throw std::invalid_argument("tps.transforms: unknown transform '" + item + "'");
  }
  if (out.empty()) throw std::invalid_argument("tps.transforms: empty transform set");
  return out;
}

TisConfig tis_config(const ExperimentConfig& cfg) {
  TisConfig tc;
  tc.n_moves = cfg.tis_moves;
  tc.burn_in = cfg.tis_burn_in;
  tc.dp_width = cfg.tis_dp_width;
  tc.max_leg_steps = std::size_t(cfg.tis_max_leg_steps);
  tc.store_stride = cfg.tis_store_stride;
  tc.seed = cfg.seed;
  return tc;
}

// Flux, interfaces (configured or placed), one sampler pass per gap, and the
// assembled rate. Shared by `tis` and `compare`.
struct TisOutcome {
  FluxEstimate flux;
  InterfaceSet interfaces;
  std::vector<double> realized;  // pilot fractions when auto-placed
  std::vector<CrossingStats> stats;
  RateEstimate rate;
};

template <class Sys>
TisOutcome tis_pipeline(const Sys& sys, const typename Sys::State& start,
                        const ExperimentConfig& cfg, std::uint64_t seed) {
  const StateRegions regions = cfg.regions();
  TisOutcome out;

  FluxConfig fc;
  fc.a_core_offset = cfg.tis_a_core_offset;
  fc.n_steps = std::size_t(cfg.tis_flux_steps);
  fc.min_crossings = cfg.tis_min_crossings;
  fc.seed = seed;
  out.flux = first_interface_flux(sys, regions, start, fc);

  rng::Engine eng = rng::make_stream(seed, 0, "tis-seed");
  auto current = generate_tis_seed(sys, regions, start, eng,
                                   std::size_t(cfg.tis_max_leg_steps));

  if (!cfg.tis_interfaces.empty()) {
    out.interfaces.lambdas = cfg.tis_interfaces;
    out.interfaces.validate(regions);
  } else {
    PlacementConfig pc;
    pc.target = cfg.tis_place_target;
    pc.min_spacing = cfg.tis_min_spacing;
    pc.pilot = tis_config(cfg);
    pc.pilot.n_moves = cfg.tis_pilot_moves;
    pc.pilot.burn_in = std::min(cfg.tis_burn_in, cfg.tis_pilot_moves / 10);
    pc.pilot.seed = seed;
    auto placed = place_interfaces(sys, regions, pc, current);
    out.interfaces = std::move(placed.interfaces);
    out.realized = std::move(placed.realized);
  }

  TisConfig tc = tis_config(cfg);
  tc.seed = seed;
  for (std::size_t i = 0; i + 1 < out.interfaces.count(); ++i) {
    auto res = tis_ensemble_sample(sys, regions, out.interfaces, i, tc, current);
    out.stats.push_back(res.stats);
    if (i + 2 < out.interfaces.count()) {
      if (res.successes.empty())
        throw std::runtime_error("tis: ensemble " + std::to_string(i) +
                                 " found no crossing paths; raise tis.moves");
      current = res.successes.back();
    }
  }
  out.rate = tis_rate(out.flux.effective, out.flux.effective_stderr, out.stats);
  return out;
}

void write_rate_csv(const std::string& path, const RateEstimate& rate,
                    const std::vector<double>& lambdas) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"flux0", num(rate.flux0), num(rate.flux0_stderr)});
  for (std::size_t i = 0; i < rate.crossing_probs.size(); ++i) {
    const std::string name =
        "p_cross_" + (i + 1 < lambdas.size() ? num(lambdas[i + 1]) : std::to_string(i));
    rows.push_back({name, num(rate.crossing_probs[i]), num(rate.crossing_stderrs[i])});
  }
  rows.push_back({"rate", num(rate.rate), num(rate.stderr_)});
  io::write_csv_text(path, {"record", "value", "stderr"}, rows);
}

// transition segments (first slice outside A .. arrival slice), for phase
// space statistics over reactive paths only
std::vector<std::pair<std::size_t, std::size_t>> transition_segments(
    const std::vector<double>& op, const StateRegions& regions) {
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  long exit_index = -1;
  bool need_a = op.empty() ? true : op.front() > regions.a_max;
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (op[i] <= regions.a_max) {
      need_a = false;
      exit_index = -1;
      continue;
    }
    if (!need_a && exit_index < 0) exit_index = long(i);
    if (op[i] >= regions.b_min) {
      if (exit_index >= 0) segments.emplace_back(std::size_t(exit_index), i);
      need_a = true;
      exit_index = -1;
    }
  }
  return segments;
}

// ------------------------------- subcommands -------------------------------

void cmd_simulate(const ExperimentConfig& cfg, RunDir& rd) {
  rng::Engine eng = rng::make_stream(cfg.seed, 0, "simulate");
  std::vector<std::vector<double>> rows;
  const auto record = [&](long i, double x, double p) {
    if (i % cfg.sim_stride == 0) rows.push_back({double(i) * cfg.dt, x, p});
  };

  if (cfg.kind == "classical") {
    auto traj = propagate(classical_start(cfg), cfg.sim_params(), int(cfg.sim_steps), eng);
    for (long i = 0; i < long(traj.slices.size()); ++i)
      record(i, traj.slices[i].x, traj.slices[i].p);
  } else if (cfg.kind == "sse") {
    SseOps ops = make_sse_ops(cfg.basis(), cfg.well(), cfg.gamma, cfg.temperature);
    auto traj = propagate(quantum_start(cfg), ops, cfg.dt, int(cfg.sim_steps), eng);
    for (long i = 0; i < long(traj.slices.size()); ++i)
      record(i, expectation(ops.position, traj.slices[i]).real(),
             expectation(ops.momentum, traj.slices[i]).real());
  } else {
    const BasisConfig basis = cfg.basis();
    GaussianMoments g;
    g.mean_x = -cfg.well().minimum();
    g.var_x = basis.hbar / (2.0 * basis.mass * basis.omega);
    g.var_p = basis.mass * basis.omega * basis.hbar / 2.0;
    auto traj = propagate(g, cfg.sim_params(), basis.hbar, int(cfg.sim_steps), eng);
    for (long i = 0; i < long(traj.slices.size()); ++i)
      record(i, traj.slices[i].mean_x, traj.slices[i].mean_p);
  }
  io::write_csv(rd.file("trajectory.csv"), {"t", "x", "p"}, rows);
}

template <class Sys>
void tps_for(const Sys& sys, const typename Sys::State& barrier, const ExperimentConfig& cfg,
             RunDir& rd) {
  TpsConfig tc;
  tc.n_moves = cfg.tps_moves;
  tc.dp_width = cfg.tps_dp_width;
  tc.mirror_fraction = cfg.tps_mirror_fraction;
  tc.transforms = parse_transforms(cfg.tps_transforms);
  tc.mode = cfg.tps_mode == "visiting" ? EnsembleMode::visiting : EnsembleMode::endpoint;
  tc.min_acceptance = cfg.tps_min_acceptance;
  tc.snapshot_every = cfg.tps_snapshot_every;
  tc.seed = cfg.seed;

  rng::Engine eng = rng::make_stream(cfg.seed, 0, "tps-init");
  auto initial = generate_initial_path(sys, cfg.regions(), std::size_t(cfg.tps_path_steps),
                                       tc.mode, barrier, eng);
  auto chain = tps_run(sys, cfg.regions(), tc, std::move(initial));

  std::vector<std::vector<double>> moves, series;
  for (std::size_t m = 0; m < chain.moves.size(); ++m) {
    const auto& rec = chain.moves[m];
    moves.push_back({double(m), rec.kind == MoveRecord::Kind::mirror ? 1.0 : 0.0,
                     double(rec.s), rec.dp, rec.accepted ? 1.0 : 0.0, double(rec.n_s),
                     double(rec.n_bar), rec.log_ratio});
    series.push_back({double(m), chain.midpoint_series[m], chain.endpoint_series[m]});
  }
  io::write_csv(rd.file("moves.csv"),
                {"move", "mirror", "s", "dp", "accepted", "n_s", "n_bar", "log_ratio"}, moves);
  io::write_csv(rd.file("series.csv"), {"move", "midpoint_op", "endpoint_op"}, series);
  io::write_csv(rd.file("summary.csv"), {"moves", "accepted", "acceptance_rate"},
                {{double(chain.moves.size()), double(chain.accepted_count),
                  chain.acceptance_rate()}});

  io::ChainCheckpoint ckpt;
  ckpt.kind = cfg.kind == "sse" ? "quantum" : "classical";
  ckpt.config_hash = config_hash(cfg);
  ckpt.moves_done = long(chain.moves.size());
  ckpt.accepted = long(chain.accepted_count);
  // resume continues on a fresh documented stream, indexed by moves done
  ckpt.rng_state = io::serialize_engine(
      rng::make_stream(cfg.seed, std::uint64_t(chain.moves.size()), "tps-resume"));
  ckpt.dt = sys.dt();
  for (const auto& s : chain.current.traj.slices) ckpt.slices.push_back(io::pack_slice(s));
  io::write_checkpoint(rd.file("chain.ckpt"), ckpt);
}

void cmd_tps(const ExperimentConfig& cfg, RunDir& rd) {
  if (cfg.kind == "classical") {
    ClassicalSystem sys{cfg.sim_params()};
    tps_for(sys, ClassicalState{0.0, 0.0}, cfg, rd);
  } else if (cfg.kind == "sse") {
    SseSystem sys = make_sse_system(cfg);
    tps_for(sys, coherent_state(cfg.basis(), 0.0, 0.0), cfg, rd);
  } else {
    throw std::invalid_argument("tps: gaussian dynamics has no path sampler");
  }
}

template <class Sys>
void tis_for(const Sys& sys, const typename Sys::State& start, const ExperimentConfig& cfg,
             RunDir& rd) {
  const auto out = tis_pipeline(sys, start, cfg, cfg.seed);

  io::write_csv(rd.file("flux.csv"),
                {"effective", "effective_stderr", "plain", "plain_stderr",
                 "crossings_effective", "crossings_plain", "total_time"},
                {{out.flux.effective, out.flux.effective_stderr, out.flux.plain,
                  out.flux.plain_stderr, double(out.flux.crossings_effective),
                  double(out.flux.crossings_plain), out.flux.total_time}});

  std::vector<std::vector<double>> ifrows;
  for (std::size_t i = 0; i < out.interfaces.count(); ++i)
    ifrows.push_back({double(i), out.interfaces.lambdas[i],
                      i < out.realized.size() ? out.realized[i] : -1.0});
  io::write_csv(rd.file("interfaces.csv"), {"index", "lambda", "pilot_fraction"}, ifrows);

  std::vector<std::vector<double>> cross, cumulative;
  double cum = 0.0;
  cumulative.push_back({out.interfaces.lambdas.front(), 0.0});
  for (std::size_t i = 0; i < out.stats.size(); ++i) {
    const auto& st = out.stats[i];
    cross.push_back({double(i), out.interfaces.lambdas[i + 1], double(st.trials),
                     double(st.successes), st.estimate, st.stderr_, double(st.accepted),
                     double(st.capped), double(st.structure_rejects)});
    cum += std::log(st.estimate);
    cumulative.push_back({out.interfaces.lambdas[i + 1], cum});
  }
  io::write_csv(rd.file("crossings.csv"),
                {"ensemble", "lambda_next", "trials", "successes", "estimate", "stderr",
                 "accepted", "capped", "structure_rejects"},
                cross);
  io::write_csv(rd.file("cumulative.csv"), {"lambda", "cumulative_log_p"}, cumulative);
  write_rate_csv(rd.file("rate.csv"), out.rate, out.interfaces.lambdas);
}

void cmd_tis(const ExperimentConfig& cfg, RunDir& rd) {
  if (cfg.kind == "classical") {
    ClassicalSystem sys{cfg.sim_params()};
    tis_for(sys, classical_start(cfg), cfg, rd);
  } else if (cfg.kind == "sse") {
    SseSystem sys = make_sse_system(cfg);
    tis_for(sys, quantum_start(cfg), cfg, rd);
  } else {
    throw std::invalid_argument("tis: gaussian dynamics has no path sampler");
  }
}

void cmd_mfpt(const ExperimentConfig& cfg, RunDir& rd) {
  MfptConfig mc;
  mc.cutoff_time = cfg.mfpt_cutoff;
  mc.n_trajectories = cfg.mfpt_trajectories;
  mc.seed = cfg.seed;

  RateEstimate rate;
  if (cfg.kind == "classical") {
    ClassicalSystem sys{cfg.sim_params()};
    rate = mfpt_rate(sys, cfg.regions(), classical_start(cfg), mc);
  } else if (cfg.kind == "sse") {
    SseSystem sys = make_sse_system(cfg);
    rate = mfpt_rate(sys, cfg.regions(), quantum_start(cfg), mc);
  } else {
    throw std::invalid_argument("mfpt: gaussian dynamics has no passage sampler");
  }

  io::write_csv_text(
      rd.file("rate.csv"),
      {"method", "rate", "stderr", "censored_fraction", "bound_only", "cutoff_time",
       "trajectories"},
      {{rate.method, num(rate.rate), num(rate.stderr_), num(rate.censored_fraction),
        rate.bound_only ? "1" : "0", num(cfg.mfpt_cutoff), std::to_string(cfg.mfpt_trajectories)}});
}

void cmd_stationary(const ExperimentConfig& cfg, RunDir& rd) {
  if (cfg.kind != "sse")
    throw std::invalid_argument("stationary: requires kind = sse");
  const BasisConfig basis = cfg.basis();
  SseOps ops = make_sse_ops(basis, cfg.well(), cfg.gamma, cfg.temperature);
  StationaryState st = stationary_state(ops);
  const Operator gibbs = gibbs_state(hamiltonian(basis, cfg.well()), cfg.temperature);
  const double fid = fidelity(st.rho, gibbs);

  io::write_csv(rd.file("stationary.csv"),
                {"dim", "temperature", "gamma", "residual", "relative_residual",
                 "min_eigenvalue", "fidelity_gibbs"},
                {{double(basis.dim), cfg.temperature, cfg.gamma, st.residual,
                  st.residual / st.generator_norm, st.min_eigenvalue, fid}});

  Eigen::MatrixXd dump(basis.dim, 2 * basis.dim);
  dump << st.rho.real(), st.rho.imag();
  io::write_field(rd.file("rho.bin"),
                  {{"dim", std::to_string(basis.dim)},
                   {"temperature", num(cfg.temperature)},
                   {"gamma", num(cfg.gamma)},
                   {"residual", num(st.residual)},
                   {"layout", "re-then-im-columns"}},
                  dump);
}

void cmd_wigner(const ExperimentConfig& cfg, RunDir& rd) {
  if (cfg.kind != "sse")
    throw std::invalid_argument("wigner: requires kind = sse");
  const BasisConfig basis = cfg.basis();

  Operator rho;
  if (cfg.wigner_source == "stationary") {
    SseOps ops = make_sse_ops(basis, cfg.well(), cfg.gamma, cfg.temperature);
    rho = stationary_state(ops).rho;
  } else if (cfg.wigner_source == "gibbs") {
    rho = gibbs_state(hamiltonian(basis, cfg.well()), cfg.temperature);
  } else {
    throw std::invalid_argument("wigner.source must be stationary or gibbs");
  }

  PhaseGrid grid;
  grid.x_min = cfg.wig_x_min;
  grid.x_max = cfg.wig_x_max;
  grid.p_min = cfg.wig_p_min;
  grid.p_max = cfg.wig_p_max;
  grid.nx = cfg.wig_nx;
  grid.np = cfg.wig_np;
  grid.validate();

  // Mixed-state transform: eigenvalue-weighted sum over the pure parts,
  // truncated once all but 1e-6 of the trace is in. The skipped tail would
  // also be the spatially widest states, which a sane grid cannot hold.
  Eigen::SelfAdjointEigenSolver<Operator> es(rho);
  if (es.info() != Eigen::Success) throw std::runtime_error("wigner: density eigensolve failed");
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(grid.nx, grid.np);
  double mass = 0.0;
  for (int k = basis.dim - 1; k >= 0 && mass < 1.0 - 1e-6; --k) {
    const double w = es.eigenvalues()(k);
    if (w <= 0.0) break;  // ascending order: the rest are smaller still
    QuantumState psi = es.eigenvectors().col(k);
    values += w * wigner_transform(psi, basis, grid).values;
    mass += w;
  }

  io::write_field(rd.file("wigner.bin"),
                  {{"x_min", num(grid.x_min)}, {"x_max", num(grid.x_max)},
                   {"p_min", num(grid.p_min)}, {"p_max", num(grid.p_max)},
                   {"source", cfg.wigner_source}, {"weight_mass", num(mass)},
                   {"normalization", "unit-total-mass-before-truncation"}},
                  values);

  std::vector<std::vector<double>> mx, mp;
  for (int i = 0; i < grid.nx; ++i)
    mx.push_back({grid.x_center(i), values.row(i).sum() * grid.dp()});
  for (int j = 0; j < grid.np; ++j)
    mp.push_back({grid.p_center(j), values.col(j).sum() * grid.dx()});
  io::write_csv(rd.file("marginal_x.csv"), {"x", "density"}, mx);
  io::write_csv(rd.file("marginal_p.csv"), {"p", "density"}, mp);
}

void analyze_outputs(const ExperimentConfig& cfg, RunDir& rd, const std::vector<double>& op,
                     const PhaseHistogram& hist) {
  const auto durations = transition_path_durations(op, cfg.dt, cfg.regions());
  if (durations.empty())
    throw std::runtime_error("analyze: no completed transitions; raise analyze.steps");

  std::vector<std::vector<double>> drows;
  for (double d : durations) drows.push_back({d});
  io::write_csv(rd.file("durations.csv"), {"duration"}, drows);

  double mean = 0.0;
  for (double d : durations) mean += d;
  mean /= double(durations.size());

  std::vector<std::vector<double>> lrows;
  if (durations.size() >= 100) {
    DensityTable table = path_length_histogram(durations, cfg.analyze_bins);
    for (std::size_t b = 0; b < table.density.size(); ++b)
      lrows.push_back({table.centers[b], table.density[b]});
    io::write_csv(rd.file("length_hist.csv"), {"center", "density"}, lrows);
  }

  const double z = momentum_asymmetry_z(hist);
  io::write_field(rd.file("phase_hist.bin"),
                  {{"x_min", num(hist.grid.x_min)}, {"x_max", num(hist.grid.x_max)},
                   {"p_min", num(hist.grid.p_min)}, {"p_max", num(hist.grid.p_max)},
                   {"n_samples", std::to_string(hist.n_samples)},
                   {"content", "reactive-segment-density"}},
                  hist.values);
  io::write_csv(rd.file("summary.csv"),
                {"transitions", "mean_duration", "asymmetry_z", "segment_slices"},
                {{double(durations.size()), mean, z, double(hist.n_samples)}});
}

void cmd_analyze(const ExperimentConfig& cfg, RunDir& rd) {
  PhaseGrid grid;
  grid.x_min = -cfg.analyze_grid_half;
  grid.x_max = cfg.analyze_grid_half;
  grid.p_min = -cfg.analyze_grid_half;
  grid.p_max = cfg.analyze_grid_half;
  grid.nx = cfg.analyze_grid_cells;
  grid.np = cfg.analyze_grid_cells;

  rng::Engine eng = rng::make_stream(cfg.seed, 0, "analyze");
  if (cfg.kind == "classical") {
    auto traj = propagate(classical_start(cfg), cfg.sim_params(), int(cfg.analyze_steps), eng);
    std::vector<double> op(traj.slices.size());
    for (std::size_t i = 0; i < traj.slices.size(); ++i) op[i] = order_parameter(traj.slices[i]);
    std::vector<Trajectory<ClassicalState>> segments;
    for (const auto& [lo, hi] : transition_segments(op, cfg.regions())) {
      Trajectory<ClassicalState> seg;
      seg.dt = cfg.dt;
      seg.slices.assign(traj.slices.begin() + long(lo), traj.slices.begin() + long(hi) + 1);
      segments.push_back(std::move(seg));
    }
    analyze_outputs(cfg, rd, op, phase_space_histogram(segments, grid));
  } else if (cfg.kind == "sse") {
    SseOps ops = make_sse_ops(cfg.basis(), cfg.well(), cfg.gamma, cfg.temperature);
    auto traj = propagate(quantum_start(cfg), ops, cfg.dt, int(cfg.analyze_steps), eng);
    std::vector<double> op(traj.slices.size());
    for (std::size_t i = 0; i < traj.slices.size(); ++i)
      op[i] = order_parameter(traj.slices[i], ops.position);
    std::vector<Trajectory<QuantumState>> segments;
    for (const auto& [lo, hi] : transition_segments(op, cfg.regions())) {
      Trajectory<QuantumState> seg;
      seg.dt = cfg.dt;
      seg.slices.assign(traj.slices.begin() + long(lo), traj.slices.begin() + long(hi) + 1);
      segments.push_back(std::move(seg));
    }
    analyze_outputs(cfg, rd, op,
                    phase_space_histogram(segments, cfg.basis(), grid, PhaseSpaceMode::centers));
  } else {
    throw std::invalid_argument("analyze: gaussian dynamics is not supported here");
  }
}

struct CompareRow {
  double t_b{0.0};
  double temperature{0.0};
  std::string method;
  RateEstimate rate;
};

void cmd_compare(const ExperimentConfig& cfg, RunDir& rd) {
  if (cfg.kind == "gaussian")
    throw std::invalid_argument("compare: gaussian dynamics has no rate estimators");

  struct Job {
    double t_b;
    std::string method;
  };
  std::vector<Job> jobs;
  for (const auto& method : cfg.compare_methods)
    for (double tb : cfg.compare_t_b) jobs.push_back({tb, method});

  const auto run_job = [&cfg](const Job& job) -> CompareRow {
    ExperimentConfig local = cfg;
    local.temperature = job.t_b * cfg.well().barrier_height();
    // per-job stream so concurrent jobs never share randomness
    const std::string tag =
        "compare:" + job.method + ":" + num(job.t_b) + ":" + std::to_string(cfg.seed);
    const std::uint64_t seed = io::fnv1a(tag.data(), tag.size());

    CompareRow row;
    row.t_b = job.t_b;
    row.temperature = local.temperature;
    row.method = job.method;
    if (job.method == "mfpt") {
      MfptConfig mc;
      mc.cutoff_time = local.mfpt_cutoff;
      mc.n_trajectories = local.mfpt_trajectories;
      mc.seed = seed;
      if (local.kind == "classical") {
        ClassicalSystem sys{local.sim_params()};
        row.rate = mfpt_rate(sys, local.regions(), classical_start(local), mc);
      } else {
        SseSystem sys = make_sse_system(local);
        row.rate = mfpt_rate(sys, local.regions(), quantum_start(local), mc);
      }
    } else {
      if (local.kind == "classical") {
        ClassicalSystem sys{local.sim_params()};
        row.rate = tis_pipeline(sys, classical_start(local), local, seed).rate;
      } else {
        SseSystem sys = make_sse_system(local);
        row.rate = tis_pipeline(sys, quantum_start(local), local, seed).rate;
      }
    }
    return row;
  };

  std::vector<CompareRow> rows(jobs.size());
  const std::size_t width = std::size_t(std::max(1, cfg.threads));
  for (std::size_t base = 0; base < jobs.size(); base += width) {
    std::vector<std::future<CompareRow>> batch;
    for (std::size_t j = base; j < std::min(base + width, jobs.size()); ++j)
      batch.push_back(std::async(std::launch::async, run_job, jobs[j]));
    for (std::size_t j = 0; j < batch.size(); ++j) rows[base + j] = batch[j].get();
  }

  std::vector<std::vector<std::string>> table;
  for (const auto& row : rows) {
    const double k = row.rate.rate;
    table.push_back({num(row.t_b), num(row.temperature), num(1.0 / row.temperature),
                     num(k > 0.0 ? std::log(k) : -std::numeric_limits<double>::infinity()),
                     num(k), num(row.rate.stderr_), row.rate.method});
  }
  io::write_csv_text(rd.file("table.csv"),
                     {"t_b", "temperature", "inv_temperature", "ln_k", "k", "k_stderr", "method"},
                     table);

  // free and barrier-pinned lines per method, when enough points survive
  std::vector<std::vector<std::string>> fits;
  for (const auto& method : cfg.compare_methods) {
    std::vector<RatePoint> pts;
    for (const auto& row : rows)
      if (row.method == method && !row.rate.bound_only && row.rate.rate > 0.0)
        pts.push_back({row.temperature, row.rate.rate});
    if (pts.size() < 3) continue;
    ArrheniusFit fit = arrhenius_fit(pts, -cfg.well().barrier_height());
    fits.push_back({method, num(fit.slope), num(fit.slope_stderr), num(fit.intercept),
                    num(fit.intercept_stderr), num(fit.fixed_slope), num(fit.fixed_intercept)});
  }
  if (!fits.empty())
    io::write_csv_text(rd.file("arrhenius.csv"),
                       {"method", "slope", "slope_stderr", "intercept", "intercept_stderr",
                        "fixed_slope", "fixed_intercept"},
                       fits);
}

// ------------------------------- entry point --------------------------------

int run_guarded(const std::string& name, const ExperimentConfig& cfg,
                void (*handler)(const ExperimentConfig&, RunDir&)) {
  RunDir rd(cfg.out_dir);
  try {
    {
      std::ofstream snap(rd.dir / "config.ini", std::ios::binary);
      snap << config_text(cfg);
    }
    rd.files.push_back("config.ini");
    handler(cfg, rd);

    io::RunManifest manifest;
    manifest.subcommand = name;
    manifest.config_hash = config_hash(cfg);
    manifest.wall_clock = io::utc_timestamp();
    for (const auto& f : rd.files)
      manifest.artifacts.emplace_back(f, io::file_checksum((rd.dir / f).string()));
    io::write_manifest((rd.dir / "manifest.txt").string(), manifest);
    fs::remove(rd.dir / "error.txt");  // stale marker from an earlier failed run
    return 0;
  } catch (const std::exception& e) {
    std::ofstream err(rd.dir / "error.txt", std::ios::binary);
    err << "qpath-error 1\nsubcommand " << name << "\nmessage " << e.what() << "\n";
    std::cerr << "qpath " << name << ": " << e.what() << "\n";
    fs::remove(rd.dir / "manifest.txt");  // a failed run leaves no success marker
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"double-well rare-event toolkit"};
  app.set_version_flag("--version", io::kCodeVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "experiment config file (INI)");
  app.add_option("--seed", seed, "master seed override");
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--threads", threads, "independent-job parallelism override");

  struct Entry {
    const char* name;
    const char* blurb;
    void (*handler)(const ExperimentConfig&, RunDir&);
  };
  const std::vector<Entry> entries = {
      {"simulate", "integrate one trajectory and dump it", cmd_simulate},
      {"tps", "transition path sampling chain", cmd_tps},
      {"tis", "interface sampling rate estimate", cmd_tis},
      {"mfpt", "direct passage-time rate estimate", cmd_mfpt},
      {"stationary", "master-equation stationary state", cmd_stationary},
      {"wigner", "phase-space portrait of a density", cmd_wigner},
      {"analyze", "transition statistics of a long run", cmd_analyze},
      {"compare", "rate methods across temperatures", cmd_compare},
  };
  for (const auto& entry : entries) app.add_subcommand(entry.name, entry.blurb)->fallthrough();

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = parse_config(config_path);
    if (app.count("--seed")) cfg.seed = seed;
    if (app.count("--out")) cfg.out_dir = out_dir;
    if (app.count("--threads")) cfg.threads = threads;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "qpath: " << e.what() << "\n";
    return 2;
  }

  for (const auto& entry : entries)
    if (app.got_subcommand(entry.name)) return run_guarded(entry.name, cfg, entry.handler);
  return 2;
}
