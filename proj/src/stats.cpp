#include "fls/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "fls/errors.hpp"

namespace fls::stats {

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw ContractError("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_pvalue(double d, std::size_t n) {
  double sn = std::sqrt(static_cast<double>(n));
  double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected, int fitted) {
  if (observed.size() != expected.size() || observed.size() < 2) {
    throw ContractError("chi_square: need matching bins, at least two");
  }
  ChiSquare out;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw ContractError("chi_square: expected counts must be positive");
    double r = observed[i] - expected[i];
    out.statistic += r * r / expected[i];
  }
  out.dof = static_cast<double>(observed.size()) - 1.0 - fitted;
  if (out.dof < 1.0) throw ContractError("chi_square: no degrees of freedom left");
  boost::math::chi_squared dist(out.dof);
  out.pvalue = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

std::pair<double, double> wilson_interval(double k, double n, double z) {
  if (n <= 0.0) return {0.0, 1.0};
  double p = k / n;
  double z2 = z * z;
  double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace fls::stats
