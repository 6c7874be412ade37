#include "qpath/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qpath::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

// Lower regularized gamma by series; converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma by Lentz continued fraction; for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * double(j) * double(j) * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  return (x < a + 1.0) ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

double chi2_sf(double x, double k) {
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * k, 0.5 * x);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_test: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max(f - double(i) / n, double(i + 1) / n - f));
  }
  const double rt = std::sqrt(n);
  return {d, kolmogorov_q((rt + 0.12 + 0.11 / rt) * d)};
}

Chi2Result chi2_two_sample(const std::vector<double>& counts_a,
                           const std::vector<double>& counts_b) {
  if (counts_a.size() != counts_b.size())
    throw std::invalid_argument("chi2_two_sample: histogram sizes differ");
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < counts_a.size(); ++i) {
    na += counts_a[i];
    nb += counts_b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("chi2_two_sample: empty histogram");
  const double ka = std::sqrt(nb / na), kb = std::sqrt(na / nb);
  Chi2Result r;
  for (std::size_t i = 0; i < counts_a.size(); ++i) {
    const double tot = counts_a[i] + counts_b[i];
    if (tot <= 0.0) continue;
    const double diff = ka * counts_a[i] - kb * counts_b[i];
    r.stat += diff * diff / tot;
    r.dof += 1;
  }
  r.dof -= 1;  // totals tied
  if (r.dof < 1) throw std::invalid_argument("chi2_two_sample: not enough occupied bins");
  r.p = chi2_sf(r.stat, double(r.dof));
  return r;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty");
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double variance(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("variance: need at least 2 values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

double block_stderr(const std::vector<double>& v, int blocks) {
  if (blocks < 2) throw std::invalid_argument("block_stderr: need at least 2 blocks");
  if (v.size() < std::size_t(blocks)) throw std::invalid_argument("block_stderr: too few values");
  std::vector<double> bm(blocks, 0.0);
  const std::size_t per = v.size() / std::size_t(blocks);
  for (int b = 0; b < blocks; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += v[std::size_t(b) * per + i];
    bm[std::size_t(b)] = s / double(per);
  }
  return std::sqrt(variance(bm) / double(blocks));
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need matching x/y with >= 2 points");
  const double n = double(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) throw std::invalid_argument("linear_fit: degenerate abscissae");
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0.0;
  f.residuals.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    ss += f.residuals[i] * f.residuals[i];
  }
  if (x.size() > 2) {
    const double s2 = ss / (n - 2.0);
    f.slope_stderr = std::sqrt(n * s2 / denom);
    f.intercept_stderr = std::sqrt(s2 * sxx / denom);
  }
  return f;
}

}  // namespace qpath::stats
