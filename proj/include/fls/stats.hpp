#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace fls::stats {

/// Two-sided one-sample Kolmogorov-Smirnov statistic sup |F_n - F|.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Asymptotic p-value of D for sample size n (Stephens' small-n correction).
double ks_pvalue(double d, std::size_t n);

/// Pearson chi-square statistic and its upper-tail p-value with
/// (bins - 1 - fitted) degrees of freedom.
struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double pvalue = 1.0;
};
ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected, int fitted = 0);

/// Wilson score interval for k successes in n trials at normal quantile z.
std::pair<double, double> wilson_interval(double k, double n, double z = 1.959963984540054);

}  // namespace fls::stats
