#pragma once

#include <functional>
#include <vector>

// Small self-contained statistics toolkit shared by the analysis module and
// the statistical tests: CDFs, goodness-of-fit tests, block error bars.

namespace qpath::stats {

double normal_cdf(double z);

// Regularized incomplete gamma functions P(a,x) (lower) and Q(a,x) (upper).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Survival function of chi-squared with k degrees of freedom.
double chi2_sf(double x, double k);

struct KsResult {
  double d{0.0};  // sup |F_emp - F|
  double p{1.0};
};

// One-sample Kolmogorov-Smirnov against a continuous CDF. Samples need not be sorted.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

struct Chi2Result {
  double stat{0.0};
  int    dof{0};
  double p{1.0};
};

// Two-sample chi-squared on aligned histogram counts; bins where both are
// empty are dropped. Counts may come from different totals.
Chi2Result chi2_two_sample(const std::vector<double>& counts_a,
                           const std::vector<double>& counts_b);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // unbiased

// Standard error of the mean from contiguous block means; guards against
// serial correlation that a naive sqrt(var/n) would hide.
double block_stderr(const std::vector<double>& v, int blocks = 10);

struct LinearFit {
  double slope{0.0};
  double intercept{0.0};
  double slope_stderr{0.0};
  double intercept_stderr{0.0};
  std::vector<double> residuals;
};

// Ordinary least squares y = a + b x with residual-based parameter errors.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qpath::stats
