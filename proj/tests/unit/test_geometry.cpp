#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fls/geometry.hpp"

using namespace fls;

namespace {

// Independent route: integrate the metric along the chart segment 0 -> x.
double radial_length(double x) {
  const int n = 20000;
  double h = x / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double t = (i + 0.5) * h;
    s += 2.0 / (1.0 - t * t) * h;
  }
  return s;
}

}  // namespace

TEST_CASE("hyperbolic distance from the origin to 1/2 is ln 3") {
  auto m = ModelSpace::hyperbolic();
  CHECK(m.dist({0.0, 0.0}, {0.5, 0.0}) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(radial_length(0.5) == doctest::Approx(std::log(3.0)).epsilon(1e-8));
}

TEST_CASE("distance branches agree near the switch-over and far out") {
  auto m = ModelSpace::hyperbolic();
  ChartPoint a{0.3, -0.2};
  for (double r : {0.1, 0.4, 0.6, 0.9, 0.999999}) {
    ChartPoint b{r * std::cos(1.1), r * std::sin(1.1)};
    double num = std::abs(a.z - b.z);
    double den = std::abs(1.0 - std::conj(a.z) * b.z);
    double ref = std::acosh(1.0 + 2.0 * num * num / ((1.0 - std::norm(a.z)) * (1.0 - std::norm(b.z))));
    CHECK(m.dist(a, b) == doctest::Approx(ref).epsilon(1e-9));
    (void)den;
  }
}

TEST_CASE("Mobius maps preserving the disk are isometries") {
  auto m = ModelSpace::hyperbolic();
  MobiusMap g = MobiusMap::hyperbolic_translation(0.7, 1.3) * MobiusMap::rotation(2.1);
  ChartPoint a{0.1, 0.55};
  ChartPoint b{-0.62, 0.05};
  CHECK(m.dist(m.mobius_apply(g, a), m.mobius_apply(g, b)) == doctest::Approx(m.dist(a, b)).epsilon(1e-12));
  TangentVector u{a, {0.03, -0.01}};
  CHECK(m.norm(m.mobius_pushforward(g, u)) == doctest::Approx(m.norm(u)).epsilon(1e-12));
}

TEST_CASE("non-preserving maps are rejected") {
  auto m = ModelSpace::hyperbolic();
  CHECK_THROWS_AS(m.mobius_apply(MobiusMap::translation({0.1, 0.0}), {0.0, 0.0}), ContractError);
  CHECK_THROWS_AS(m.dist({1.0, 0.0}, {0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(m.inner({0.1, 0.0}, {{0.2, 0.0}, 1.0}, {{0.1, 0.0}, 1.0}), ContractError);
}

TEST_CASE("exp_map moves by the requested arclength and log_map inverts it") {
  for (auto m : {ModelSpace::hyperbolic(), ModelSpace::flat()}) {
    ChartPoint p{0.2, -0.35};
    TangentVector v{p, {0.11, 0.07}};
    ChartPoint q = m.exp_map(p, v, 1.7);
    CHECK(m.dist(p, q) == doctest::Approx(1.7 * m.norm(v)).epsilon(1e-12));
    TangentVector back = m.log_map(p, q);
    CHECK(std::abs(back.v - 1.7 * v.v) < 1e-12);
  }
}

TEST_CASE("transport rotation along a geodesic matches the integrated connection") {
  auto m = ModelSpace::hyperbolic();
  ChartPoint p{0.3, 0.4};
  TangentVector v{p, {-0.2, 0.05}};
  double closed = m.geodesic_transport_rotation(p, v, 1.0);
  // Midpoint rule on the geodesic with velocity from finite differences.
  const int n = 4000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    ChartPoint a = m.exp_map(p, v, double(i) / n);
    ChartPoint b = m.exp_map(p, v, double(i + 1) / n);
    ChartPoint mid = m.exp_map(p, v, (i + 0.5) / n);
    acc += m.connection_rotation_rate(mid, {mid, b.z - a.z});
  }
  // The geodesic's own tangent turns against the chart frame by the same
  // amount as any parallel vector.
  Complex start_dir = v.v;
  Complex end_dir = m.exp_map(p, v, 1.0 + 1e-7).z - m.exp_map(p, v, 1.0 - 1e-7).z;
  CHECK(closed == doctest::Approx(acc).epsilon(1e-7));
  CHECK(wrap_angle(std::arg(end_dir) - std::arg(start_dir) - closed) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("connection integral around a chart circle is minus the enclosed area") {
  auto m = ModelSpace::hyperbolic();
  double r = 0.6;
  const int n = 2000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double t = 2.0 * std::numbers::pi * (i + 0.5) / n;
    ChartPoint p = std::polar(r, t);
    acc += m.connection_rotation_rate(p, {p, Complex{0.0, 1.0} * p.z * (2.0 * std::numbers::pi / n)});
  }
  double area = 4.0 * std::numbers::pi * r * r / (1.0 - r * r);
  CHECK(acc == doctest::Approx(-area).epsilon(1e-10));
}

TEST_CASE("flat model is Euclidean") {
  auto m = ModelSpace::flat();
  CHECK(m.dist({0.0, 0.0}, {3.0, 4.0}) == 5.0);
  CHECK(m.connection_rotation_rate({1.0, 2.0}, {{1.0, 2.0}, {1.0, 1.0}}) == 0.0);
  CHECK(m.chart_radius(0.3) == 0.3);
}

TEST_CASE("inverse and normalisation") {
  MobiusMap g = MobiusMap::hyperbolic_translation(-0.4, 2.2) * MobiusMap::rotation(0.9);
  CHECK((g * g.inverse()).distance_to(MobiusMap::identity()) < 1e-12);
  CHECK(wrap_angle(3.0 * std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
}
