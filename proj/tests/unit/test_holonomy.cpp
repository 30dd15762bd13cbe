#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fls/holonomy.hpp"
#include "fls/rng.hpp"

using namespace fls;

namespace {

Frame random_frame(PathRng& rng, double max_radius = 0.7) {
  double r = max_radius * std::sqrt(rng.uniform());
  return {std::polar(r, 2.0 * std::numbers::pi * rng.uniform()), wrap_angle(2.0 * std::numbers::pi * rng.uniform())};
}

// Gauss curvature of lambda^2 |dz|^2 by the Brioschi formula for conformal
// metrics, K = -Laplacian(log lambda) / lambda^2, with a 5-point stencil.
double brioschi_curvature(const ModelSpace& m, ChartPoint p) {
  const double h = 1e-3;
  auto phi = [&](Complex z) { return std::log(m.conformal_factor(z)); };
  double lap = (phi(p.z + h) + phi(p.z - h) + phi(p.z + Complex{0, h}) + phi(p.z - Complex{0, h}) - 4.0 * phi(p.z)) /
               (h * h);
  double lam = m.conformal_factor(p);
  return -lap / (lam * lam);
}

}  // namespace

TEST_CASE("curvature form of the standard horizontal fields is the Gauss curvature") {
  auto m = ModelSpace::hyperbolic();
  PathRng rng(31, 0);
  for (int i = 0; i < 20; ++i) {
    Frame f = random_frame(rng);
    CHECK(curvature_form(m, f, 1, 2) == doctest::Approx(brioschi_curvature(m, f.base)).epsilon(1e-3));
    CHECK(curvature_form(m, f, 1, 2) == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(curvature_form(m, f, 2, 1) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(curvature_form(m, f, 1, 1) == 0.0);
    // Independent route: circulation of the connection form.
    auto h1 = standard_horizontal(m, 1)(f);
    auto h2 = standard_horizontal(m, 2)(f);
    CHECK(curvature_from_circulation(m, f, h1, h2) == doctest::Approx(-1.0).epsilon(1e-6));
  }
}

TEST_CASE("flat curvature vanishes") {
  auto m = ModelSpace::flat();
  PathRng rng(32, 0);
  for (int i = 0; i < 5; ++i) {
    Frame f{{4.0 * rng.uniform() - 2.0, 4.0 * rng.uniform() - 2.0}, rng.uniform()};
    CHECK(std::abs(curvature_form(m, f, 1, 2)) < 1e-9);
  }
}

TEST_CASE("horizontal fields are horizontal and project to the frame") {
  auto m = ModelSpace::hyperbolic();
  Frame f{{0.3, -0.2}, 0.8};
  auto h1 = standard_horizontal(m, 1)(f);
  CHECK(connection_form(m, f, h1) == doctest::Approx(0.0));
  CHECK(std::abs(Complex{h1(0), h1(1)} - f.e1(m)) < 1e-15);
  BundleVector vert{0.0, 0.0, 2.5};
  CHECK(connection_form(m, f, vert) == doctest::Approx(-2.5));
  CHECK((vertical_part(m, f, vert) - vert).norm() < 1e-15);
}

TEST_CASE("curvature is tensorial in its arguments") {
  auto m = ModelSpace::hyperbolic();
  auto h1 = standard_horizontal(m, 1);
  auto h2 = standard_horizontal(m, 2);
  auto g = [](const Frame& s) { return 1.5 + std::sin(3.0 * s.base.x() + s.angle); };
  BundleVectorField gh1 = [=](const Frame& s) -> BundleVector { return g(s) * h1(s); };
  Frame f{{-0.25, 0.4}, 1.3};
  double plain = -connection_form(m, f, bracket(h1, h2, f, 1e-4));
  double scaled = -connection_form(m, f, bracket(gh1, h2, f, 1e-4));
  CHECK(scaled == doctest::Approx(g(f) * plain).epsilon(1e-3));
}

TEST_CASE("bracket spans") {
  auto h = ModelSpace::hyperbolic();
  auto fl = ModelSpace::flat();
  PathRng rng(33, 0);
  for (int i = 0; i < 20; ++i) {
    Frame f = random_frame(rng);
    CHECK(bracket_span_dim(h, f, 0) == 2);
    CHECK(bracket_span_dim(h, f, 1) == 3);
    CHECK(bracket_span_dim(h, f, 2) == 3);
    CHECK(bracket_span_dim(fl, f, 1) == 2);
    CHECK(bracket_span_dim(fl, f, 2) == 2);
    CHECK(infinitesimal_holonomy_dim(h, f) == 1);
    CHECK(infinitesimal_holonomy_dim(fl, f) == 0);
    CHECK(infinitesimal_holonomy_dim(h, f) + 2 == bracket_span_dim(h, f, 2));
    Frame rotated{f.base, f.angle + 0.9};
    CHECK(bracket_span_dim(h, rotated, 1) == bracket_span_dim(h, f, 1));
  }
}

TEST_CASE("vertical identity for the curvature form") {
  auto h = ModelSpace::hyperbolic();
  auto fl = ModelSpace::flat();
  PathRng rng(34, 0);
  for (int i = 0; i < 10; ++i) {
    Frame f = random_frame(rng, 0.6);
    CHECK(verify_vertical_identity(h, f, 0) < 1e-3);
    CHECK(verify_vertical_identity(h, f, 1) < 1e-2);
    CHECK(verify_vertical_identity(fl, f, 0) < 1e-6);
    CHECK(verify_vertical_identity(fl, f, 1) < 1e-6);
  }
}
