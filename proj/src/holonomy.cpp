#include "fls/holonomy.hpp"

#include <Eigen/SVD>
#include <array>
#include <cmath>
#include <vector>

namespace fls {

namespace {

Frame shifted(const Frame& f, int axis, double h) {
  Frame g = f;
  if (axis == 0) g.base = f.base.z + Complex{h, 0.0};
  if (axis == 1) g.base = f.base.z + Complex{0.0, h};
  if (axis == 2) g.angle = f.angle + h;
  return g;
}

Frame moved(const Frame& f, const BundleVector& v, double t) {
  return {f.base.z + t * Complex{v(0), v(1)}, f.angle + t * v(2)};
}

Eigen::Matrix3d jacobian_central(const BundleVectorField& F, const Frame& f, double h) {
  Eigen::Matrix3d j;
  for (int a = 0; a < 3; ++a) j.col(a) = (F(shifted(f, a, h)) - F(shifted(f, a, -h))) / (2.0 * h);
  return j;
}

Eigen::Matrix3d jacobian(const BundleVectorField& F, const Frame& f, double h) {
  return (4.0 * jacobian_central(F, f, 0.5 * h) - jacobian_central(F, f, h)) / 3.0;
}

// Derivative of a scalar function along v, Richardson-extrapolated.
double directional(const std::function<double(const Frame&)>& g, const Frame& f, const BundleVector& v, double h) {
  auto central = [&](double s) { return (g(moved(f, v, s)) - g(moved(f, v, -s))) / (2.0 * s); };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

// Smooth multiplier fields for the identity checks.
BundleVectorField combination(const ModelSpace& m, std::function<double(const Frame&)> a,
                              std::function<double(const Frame&)> b) {
  BundleVectorField h1 = standard_horizontal(m, 1);
  BundleVectorField h2 = standard_horizontal(m, 2);
  return [=](const Frame& f) -> BundleVector { return a(f) * h1(f) + b(f) * h2(f); };
}

}  // namespace

BundleVectorField standard_horizontal(const ModelSpace& m, int i) {
  if (i != 1 && i != 2) throw ContractError("standard_horizontal: index must be 1 or 2");
  return [m, i](const Frame& f) -> BundleVector {
    Complex e = i == 1 ? f.e1(m) : f.e2(m);
    return {e.real(), e.imag(), m.connection_rotation_rate(f.base, {f.base, e})};
  };
}

double connection_form(const ModelSpace& m, const Frame& f, const BundleVector& x) {
  Complex base{x(0), x(1)};
  return m.connection_rotation_rate(f.base, {f.base, base}) - x(2);
}

BundleVector vertical_part(const ModelSpace& m, const Frame& f, const BundleVector& x) {
  return {0.0, 0.0, -connection_form(m, f, x)};
}

BundleVector bracket(const BundleVectorField& X, const BundleVectorField& Y, const Frame& f, double h) {
  return jacobian(Y, f, h) * X(f) - jacobian(X, f, h) * Y(f);
}

BundleVectorField bracket_field(BundleVectorField X, BundleVectorField Y, double h) {
  return [X = std::move(X), Y = std::move(Y), h](const Frame& f) { return bracket(X, Y, f, h); };
}

double curvature_form(const ModelSpace& m, const Frame& f, int v, int w) {
  if (v == w) return 0.0;
  return -connection_form(m, f, bracket(standard_horizontal(m, v), standard_horizontal(m, w), f, 1e-4));
}

double curvature_from_circulation(const ModelSpace& m, const Frame& f, const BundleVector& x, const BundleVector& y,
                                  double h) {
  // Counter-clockwise circulation of rate(., d) around the square, 3-point
  // Gauss-Legendre per edge, divided by the area; Richardson in h.
  auto curl = [&](double s) {
    static constexpr std::array<double, 3> nodes{-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr std::array<double, 3> weights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const Complex c = f.base.z;
    const std::array<Complex, 4> corner{c + Complex{-s, -s} / 2.0, c + Complex{s, -s} / 2.0,
                                        c + Complex{s, s} / 2.0, c + Complex{-s, s} / 2.0};
    double total = 0.0;
    for (int e = 0; e < 4; ++e) {
      Complex a = corner[e];
      Complex b = corner[(e + 1) % 4];
      Complex mid = 0.5 * (a + b);
      Complex half = 0.5 * (b - a);
      for (std::size_t k = 0; k < 3; ++k) {
        ChartPoint p = mid + nodes[k] * half;
        total += weights[k] * m.connection_rotation_rate(p, {p, half});
      }
    }
    return total / (s * s);
  };
  double dw = (4.0 * curl(0.5 * h) - curl(h)) / 3.0;
  return dw * (x(0) * y(1) - x(1) * y(0));
}

int bracket_span_dim(const ModelSpace& m, const Frame& f, int depth) {
  if (depth < 0 || depth > 2) throw ContractError("bracket_span_dim: depth must be 0, 1 or 2");
  BundleVectorField h1 = standard_horizontal(m, 1);
  BundleVectorField h2 = standard_horizontal(m, 2);
  std::vector<BundleVector> cols{h1(f), h2(f)};
  if (depth >= 1) {
    BundleVectorField b12 = bracket_field(h1, h2, 1e-4);
    cols.push_back(b12(f));
    if (depth >= 2) {
      cols.push_back(bracket(h1, b12, f, 1e-3));
      cols.push_back(bracket(h2, b12, f, 1e-3));
    }
  }
  Eigen::MatrixXd a(3, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) a.col(static_cast<Eigen::Index>(i)) = cols[i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-6 * sv(0)) ++rank;
  }
  return rank;
}

double verify_vertical_identity(const ModelSpace& m, const Frame& f, int k) {
  if (k != 0 && k != 1) throw ContractError("verify_vertical_identity: k must be 0 or 1");
  BundleVectorField X = combination(
      m, [](const Frame& s) { return 1.0 + 0.3 * std::sin(s.base.x() + 2.0 * s.angle); },
      [](const Frame& s) { return 0.2 * std::cos(s.base.y() - s.angle); });
  BundleVectorField Y = combination(
      m, [](const Frame& s) { return -0.1 + 0.25 * std::cos(s.angle + s.base.x() * s.base.y()); },
      [](const Frame& s) { return 1.0 + 0.2 * std::sin(s.base.x() - s.base.y() + s.angle); });
  auto omega_xy = [&](const Frame& s) { return curvature_from_circulation(m, s, X(s), Y(s)); };
  if (k == 0) {
    return std::abs(omega_xy(f) - (-connection_form(m, f, bracket(X, Y, f, 1e-3))));
  }
  BundleVectorField U = standard_horizontal(m, 1);
  double lhs = directional(omega_xy, f, U(f), 1e-3);
  BundleVectorField vxy_fine = [&m, X, Y](const Frame& s) { return vertical_part(m, s, bracket(X, Y, s, 1e-4)); };
  double rhs = -connection_form(m, f, vertical_part(m, f, bracket(U, vxy_fine, f, 1e-3)));
  return std::abs(lhs - rhs);
}

int infinitesimal_holonomy_dim(const ModelSpace& m, const Frame& f) {
  BundleVectorField h1 = standard_horizontal(m, 1);
  BundleVectorField h2 = standard_horizontal(m, 2);
  BundleVectorField b12 = bracket_field(h1, h2, 1e-4);
  const std::array<double, 3> values{connection_form(m, f, b12(f)), connection_form(m, f, bracket(h1, b12, f, 1e-3)),
                                     connection_form(m, f, bracket(h2, b12, f, 1e-3))};
  for (double v : values) {
    if (std::abs(v) > 1e-6) return 1;
  }
  return 0;
}

}  // namespace fls
