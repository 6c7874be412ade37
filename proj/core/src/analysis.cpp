#include "qpath/analysis.hpp"

#include <algorithm>
#include <complex>

namespace qpath {

namespace {

// Orthonormal Hermite functions u_n(xi) by upward recurrence; the functions
// stay O(1), so no overflow at any practical basis size.
void hermite_functions(double xi, int dim, std::vector<double>& u) {
  u.resize(dim);
  u[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * xi * xi);
  if (dim > 1) u[1] = std::sqrt(2.0) * xi * u[0];
  for (int n = 1; n + 1 < dim; ++n)
    u[n + 1] = std::sqrt(2.0 / (n + 1)) * xi * u[n] - std::sqrt(double(n) / (n + 1)) * u[n - 1];
}

std::complex<double> synthesize(const QuantumState& psi, const std::vector<double>& u) {
  std::complex<double> acc{0.0, 0.0};
  for (int n = 0; n < int(u.size()); ++n) acc += psi(n) * u[n];
  return acc;
}

// midpoint-rule mass of |f|^2 over a fine grid
double contained_mass(const Eigen::VectorXcd& f, double spacing) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) m += std::norm(f(i));
  return m * spacing;
}

}  // namespace

Eigen::VectorXcd position_wavefunction(const QuantumState& psi, const BasisConfig& cfg,
                                       const Eigen::VectorXd& xs) {
  const double scale = std::sqrt(cfg.mass * cfg.omega / cfg.hbar);
  const double amp = std::sqrt(scale);
  Eigen::VectorXcd out(xs.size());
  std::vector<double> u;
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    hermite_functions(xs(i) * scale, int(psi.size()), u);
    out(i) = amp * synthesize(psi, u);
  }
  return out;
}

Eigen::VectorXcd momentum_wavefunction(const QuantumState& psi, const BasisConfig& cfg,
                                       const Eigen::VectorXd& ps) {
  const double scale = 1.0 / std::sqrt(cfg.mass * cfg.omega * cfg.hbar);
  const double amp = std::sqrt(scale);
  // the Fourier transform of u_n carries a phase (-i)^n
  QuantumState rotated = psi;
  std::complex<double> phase{1.0, 0.0};
  const std::complex<double> minus_i{0.0, -1.0};
  for (Eigen::Index n = 0; n < rotated.size(); ++n) {
    rotated(n) *= phase;
    phase *= minus_i;
  }
  Eigen::VectorXcd out(ps.size());
  std::vector<double> u;
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    hermite_functions(ps(i) * scale, int(rotated.size()), u);
    out(i) = amp * synthesize(rotated, u);
  }
  return out;
}

WignerField wigner_transform(const QuantumState& psi, const BasisConfig& cfg,
                             const PhaseGrid& grid) {
  grid.validate();
  if (std::abs(psi.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("wigner_transform: state must be normalized");

  // containment check on both marginals before any quadrature
  const int fine = 4096;
  Eigen::VectorXd fx(fine), fp(fine);
  const double fdx = (grid.x_max - grid.x_min) / fine;
  const double fdp = (grid.p_max - grid.p_min) / fine;
  for (int i = 0; i < fine; ++i) {
    fx(i) = grid.x_min + (i + 0.5) * fdx;
    fp(i) = grid.p_min + (i + 0.5) * fdp;
  }
  const double mass_x = contained_mass(position_wavefunction(psi, cfg, fx), fdx);
  const double mass_p = contained_mass(momentum_wavefunction(psi, cfg, fp), fdp);
  if (mass_x < 0.99 || mass_p < 0.99)
    throw std::runtime_error("wigner_transform: more than 1% of the state lies off the grid");

  // y quadrature: resolve both the transform phase at the largest |p| and
  // the fastest basis oscillation, and span the whole overlap support
  const double scale = std::sqrt(cfg.mass * cfg.omega / cfg.hbar);
  const double sigma0 = 1.0 / (scale * std::sqrt(2.0));
  const double p_basis = std::sqrt(2.0 * double(psi.size()) * cfg.mass * cfg.omega * cfg.hbar);
  const double p_extreme = std::max(std::abs(grid.p_min), std::abs(grid.p_max)) + p_basis;
  const double h_y = std::min(M_PI * cfg.hbar / (8.0 * p_extreme), sigma0 / 6.0);
  const double y_span = 0.5 * (grid.x_max - grid.x_min) + 6.0 * sigma0;
  const int n_y = int(std::ceil(y_span / h_y));

  WignerField field;
  field.grid = grid;
  field.values.setZero(grid.nx, grid.np);

  std::vector<double> u;
  Eigen::VectorXcd plus(n_y + 1), minus(n_y + 1);
  for (int i = 0; i < grid.nx; ++i) {
    const double x = grid.x_center(i);
    for (int k = 0; k <= n_y; ++k) {
      hermite_functions((x + k * h_y) * scale, int(psi.size()), u);
      plus(k) = synthesize(psi, u);
      hermite_functions((x - k * h_y) * scale, int(psi.size()), u);
      minus(k) = synthesize(psi, u);
    }
    // g(y) = psi*(x+y) psi(x-y); g(-y) = conj(g(y)) folds the integral onto
    // y >= 0 and makes W manifestly real
    for (int j = 0; j < grid.np; ++j) {
      const double p = grid.p_center(j);
      double w = std::real(std::conj(plus(0)) * minus(0));
      for (int k = 1; k <= n_y; ++k) {
        const double phase = 2.0 * p * k * h_y / cfg.hbar;
        const std::complex<double> g = std::conj(plus(k)) * minus(k);
        w += 2.0 * (std::real(g) * std::cos(phase) - std::imag(g) * std::sin(phase));
      }
      field.values(i, j) = scale * w * h_y / (M_PI * cfg.hbar);
    }
  }
  return field;
}

ArrheniusFit arrhenius_fit(const std::vector<RatePoint>& points, double fixed_slope) {
  if (points.size() < 3) throw std::invalid_argument("arrhenius_fit: need at least 3 points");
  std::vector<double> x, y;
  for (const auto& pt : points) {
    if (pt.temperature <= 0.0 || pt.rate <= 0.0)
      throw std::invalid_argument("arrhenius_fit: temperatures and rates must be positive");
    x.push_back(1.0 / pt.temperature);
    y.push_back(std::log(pt.rate));
  }
  const double x_spread = *std::max_element(x.begin(), x.end()) -
                          *std::min_element(x.begin(), x.end());
  if (x_spread == 0.0) throw std::invalid_argument("arrhenius_fit: all temperatures equal");

  const stats::LinearFit free = stats::linear_fit(x, y);
  ArrheniusFit fit;
  fit.slope = free.slope;
  fit.intercept = free.intercept;
  fit.slope_stderr = free.slope_stderr;
  fit.intercept_stderr = free.intercept_stderr;
  fit.residuals = free.residuals;

  fit.fixed_slope = fixed_slope;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += y[i] - fixed_slope * x[i];
  fit.fixed_intercept = acc / double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    fit.fixed_residuals.push_back(y[i] - fixed_slope * x[i] - fit.fixed_intercept);
  return fit;
}

std::vector<double> transition_path_durations(const std::vector<double>& op, double dt,
                                              const StateRegions& regions) {
  regions.validate();
  std::vector<double> durations;
  long exit_index = -1;  // first slice outside A of the excursion in progress
  bool need_a = op.empty() ? true : op.front() > regions.a_max;
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (op[i] <= regions.a_max) {
      need_a = false;
      exit_index = -1;
      continue;
    }
    if (!need_a && exit_index < 0) exit_index = long(i);
    if (op[i] >= regions.b_min) {
      if (exit_index >= 0) durations.push_back(double(long(i) - exit_index + 1) * dt);
      need_a = true;  // a fresh transition needs a return to A first
      exit_index = -1;
    }
  }
  return durations;
}

DensityTable path_length_histogram(const std::vector<double>& durations, int n_bins) {
  if (durations.size() < 100)
    throw std::invalid_argument("path_length_histogram: need at least 100 transition paths");
  if (n_bins < 1) throw std::invalid_argument("path_length_histogram: need at least one bin");
  const double top = *std::max_element(durations.begin(), durations.end());
  DensityTable table;
  table.bin_width = top > 0.0 ? top * (1.0 + 1e-12) / n_bins : 1.0;
  std::vector<long> counts(n_bins, 0);
  for (double d : durations) {
    int bin = int(d / table.bin_width);
    bin = std::min(std::max(bin, 0), n_bins - 1);
    ++counts[bin];
  }
  const double norm = 1.0 / (double(durations.size()) * table.bin_width);
  for (int b = 0; b < n_bins; ++b) {
    table.centers.push_back((b + 0.5) * table.bin_width);
    table.density.push_back(double(counts[b]) * norm);
  }
  return table;
}

namespace {

PhaseHistogram bin_centers(const std::vector<std::pair<double, double>>& samples,
                           const PhaseGrid& grid) {
  PhaseHistogram hist;
  hist.grid = grid;
  hist.values.setZero(grid.nx, grid.np);
  for (const auto& [x, p] : samples) {
    const int i = int(std::floor((x - grid.x_min) / grid.dx()));
    const int j = int(std::floor((p - grid.p_min) / grid.dp()));
    if (i < 0 || i >= grid.nx || j < 0 || j >= grid.np) continue;
    hist.values(i, j) += 1.0;
    ++hist.n_samples;
  }
  if (hist.n_samples > 0)
    hist.values /= double(hist.n_samples) * grid.dx() * grid.dp();
  return hist;
}

}  // namespace

PhaseHistogram phase_space_histogram(const std::vector<Trajectory<ClassicalState>>& ensembles,
                                     const PhaseGrid& grid) {
  grid.validate();
  std::vector<std::pair<double, double>> samples;
  for (const auto& traj : ensembles)
    for (const auto& s : traj.slices) samples.emplace_back(s.x, s.p);
  return bin_centers(samples, grid);
}

PhaseHistogram phase_space_histogram(const std::vector<Trajectory<QuantumState>>& ensembles,
                                     const BasisConfig& cfg, const PhaseGrid& grid,
                                     PhaseSpaceMode mode) {
  grid.validate();
  if (mode == PhaseSpaceMode::centers) {
    const Operator x_op = position_operator(cfg);
    const Operator p_op = momentum_operator(cfg);
    std::vector<std::pair<double, double>> samples;
    for (const auto& traj : ensembles)
      for (const auto& psi : traj.slices)
        samples.emplace_back(expectation(x_op, psi).real(), expectation(p_op, psi).real());
    return bin_centers(samples, grid);
  }

  PhaseHistogram hist;
  hist.grid = grid;
  hist.values.setZero(grid.nx, grid.np);
  for (const auto& traj : ensembles)
    for (const auto& psi : traj.slices) {
      hist.values += wigner_transform(psi, cfg, grid).values;
      ++hist.n_samples;
    }
  const double mass = hist.values.sum() * grid.dx() * grid.dp();
  if (mass > 0.0) hist.values /= mass;
  return hist;
}

double momentum_asymmetry_z(const PhaseHistogram& hist) {
  if (hist.n_samples <= 0)
    throw std::invalid_argument("momentum_asymmetry_z: histogram carries no samples");
  const double cell = hist.grid.dx() * hist.grid.dp();
  double above = 0.0, below = 0.0;
  for (int j = 0; j < hist.grid.np; ++j) {
    const double p = hist.grid.p_center(j);
    const double mass = hist.values.col(j).sum() * cell;
    if (p > 0.0) above += mass;
    if (p < 0.0) below += mass;
  }
  const double diff = above - below;
  const double var = std::max(1.0 - diff * diff, 1e-12);
  return diff * std::sqrt(double(hist.n_samples)) / std::sqrt(var);
}

}  // namespace qpath
