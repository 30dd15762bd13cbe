#include <cmath>
#include <vector>

#include "doctest.h"
#include "fls/stats.hpp"

using namespace fls;

TEST_CASE("Kolmogorov tail at textbook quantiles") {
  // Asymptotic critical values: P(sqrt(n) D > 1.358) = 0.05, > 1.628 = 0.01.
  double n = 1e8;
  CHECK(stats::ks_pvalue(1.358 / std::sqrt(n), 1e8) == doctest::Approx(0.05).epsilon(2e-3));
  CHECK(stats::ks_pvalue(1.628 / std::sqrt(n), 1e8) == doctest::Approx(0.01).epsilon(5e-3));
}

TEST_CASE("KS statistic of an exact uniform grid") {
  std::vector<double> x;
  for (int i = 0; i < 100; ++i) x.push_back((i + 0.5) / 100.0);
  CHECK(stats::ks_statistic(x, [](double t) { return t; }) == doctest::Approx(0.005));
}

TEST_CASE("chi-square tail matches the closed form for two degrees of freedom") {
  std::vector<double> obs{30, 40, 30};
  std::vector<double> exp{33.3333333333, 33.3333333333, 33.3333333334};
  auto r = stats::chi_square(obs, exp);
  CHECK(r.dof == 2.0);
  // chi2 with 2 dof has survival exp(-x/2).
  CHECK(r.pvalue == doctest::Approx(std::exp(-0.5 * r.statistic)).epsilon(1e-10));
}

TEST_CASE("Wilson interval brackets the proportion") {
  auto [lo, hi] = stats::wilson_interval(50, 100);
  CHECK(lo < 0.5);
  CHECK(hi > 0.5);
  CHECK(hi - 0.5 == doctest::Approx(0.5 - lo));
  auto [l0, h0] = stats::wilson_interval(0, 100);
  CHECK(l0 == doctest::Approx(0.0));
  CHECK(h0 > 0.0);
}
