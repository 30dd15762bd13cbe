#pragma once

#include <array>
#include <complex>

#include "fls/errors.hpp"

namespace fls {

using Complex = std::complex<double>;

/// Points closer than this to the unit circle are outside the hyperbolic chart.
inline constexpr double kChartGuard = 1e-12;

enum class ModelKind { Flat, Hyperbolic };

/// A point of the cover in its global chart (Euclidean plane or Poincare disk).
struct ChartPoint {
  Complex z{};

  ChartPoint() = default;
  constexpr ChartPoint(Complex w) : z(w) {}
  constexpr ChartPoint(double x, double y) : z(x, y) {}

  double x() const { return z.real(); }
  double y() const { return z.imag(); }
};

/// Chart components of a tangent vector at `base`.
struct TangentVector {
  ChartPoint base;
  Complex v{};
};

/// Fractional linear map z -> (a z + b) / (c z + d).
///
/// Hyperbolic isometries are stored in SU(1,1) form (d = conj(a), c = conj(b));
/// Euclidean motions as the affine record [[e^{i t/2}, b], [0, e^{-i t/2}]].
class MobiusMap {
 public:
  MobiusMap() = default;
  MobiusMap(Complex a, Complex b, Complex c, Complex d) : m_{a, b, c, d} {}

  static MobiusMap identity() { return {}; }
  static MobiusMap rotation(double angle);
  /// Euclidean translation z -> z + t.
  static MobiusMap translation(Complex t);
  /// Hyperbolic transvection along the diameter at `direction` moving 0 by
  /// hyperbolic distance `distance`.
  static MobiusMap hyperbolic_translation(double direction, double distance);
  /// Hyperbolic transvection taking 0 to `p`.
  static MobiusMap disk_transvection(Complex p);

  Complex a() const { return m_[0]; }
  Complex b() const { return m_[1]; }
  Complex c() const { return m_[2]; }
  Complex d() const { return m_[3]; }
  Complex det() const { return m_[0] * m_[3] - m_[1] * m_[2]; }

  Complex operator()(Complex z) const { return (m_[0] * z + m_[1]) / (m_[2] * z + m_[3]); }
  /// Complex derivative at z.
  Complex derivative(Complex z) const {
    Complex den = m_[2] * z + m_[3];
    return det() / (den * den);
  }

  MobiusMap inverse() const;
  /// Divides by a square root of the determinant; sign fixed so Re(a) >= 0
  /// (ties broken on Im(a), then on b).
  MobiusMap normalized() const;

  /// Max-entry distance between normalized matrices, modulo the sign ambiguity.
  double distance_to(const MobiusMap& other) const;

  friend MobiusMap operator*(const MobiusMap& lhs, const MobiusMap& rhs);

 private:
  std::array<Complex, 4> m_{Complex{1}, Complex{0}, Complex{0}, Complex{1}};
};

/// Riemannian model: flat plane (curvature 0) or Poincare disk (curvature -1,
/// ds^2 = 4|dz|^2 / (1-|z|^2)^2).
class ModelSpace {
 public:
  static ModelSpace flat() { return ModelSpace(ModelKind::Flat); }
  static ModelSpace hyperbolic() { return ModelSpace(ModelKind::Hyperbolic); }

  ModelKind kind() const { return kind_; }
  bool is_hyperbolic() const { return kind_ == ModelKind::Hyperbolic; }
  double curvature() const { return is_hyperbolic() ? -1.0 : 0.0; }
  const char* name() const { return is_hyperbolic() ? "hyperbolic" : "flat"; }

  bool contains(ChartPoint p) const;
  /// Throws DomainError when p is outside the chart.
  void check(ChartPoint p) const;

  /// lambda(z) with g = lambda^2 |dz|^2.
  double conformal_factor(ChartPoint p) const;
  /// Gradient of log lambda in chart coordinates.
  Complex log_conformal_gradient(ChartPoint p) const;

  double dist(ChartPoint a, ChartPoint b) const;
  double inner(ChartPoint p, const TangentVector& u, const TangentVector& w) const;
  double norm(const TangentVector& u) const;

  /// Point at arclength t*|v| along the geodesic leaving p with velocity v.
  ChartPoint exp_map(ChartPoint p, const TangentVector& v, double t) const;
  /// Rotation (radians) picked up by a vector parallel-transported along the
  /// same geodesic segment exp_map(p, v, s), s in [0, t], measured against
  /// the canonical chart frame.
  double geodesic_transport_rotation(ChartPoint p, const TangentVector& v, double t) const;
  /// Chart velocity v such that exp_map(a, v, 1) = b.
  TangentVector log_map(ChartPoint a, ChartPoint b) const;
  /// Point a fraction s of the way along the geodesic from a to b.
  ChartPoint geodesic_point(ChartPoint a, ChartPoint b, double s) const;

  /// Whether m maps the chart onto itself (unit disk preserving, or a
  /// Euclidean motion).
  bool preserves(const MobiusMap& m) const;
  ChartPoint mobius_apply(const MobiusMap& m, ChartPoint p) const;
  TangentVector mobius_pushforward(const MobiusMap& m, const TangentVector& u) const;

  /// Rotation rate of a parallel orthonormal frame, relative to the canonical
  /// chart frame, per unit chart displacement along `dir`.
  double connection_rotation_rate(ChartPoint p, const TangentVector& dir) const;

  /// Chart radius of the Euclidean disk that is the image of the metric ball
  /// of radius r centred at the origin.
  double chart_radius(double r) const;

  friend bool operator==(const ModelSpace&, const ModelSpace&) = default;

 private:
  explicit ModelSpace(ModelKind k) : kind_(k) {}
  ModelKind kind_;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace fls
