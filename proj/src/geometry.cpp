#include "fls/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fls {

namespace {

double one_minus_norm(Complex z) {
  double r = std::abs(z);
  return (1.0 - r) * (1.0 + r);
}

}  // namespace

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  return w <= -std::numbers::pi ? w + 2.0 * std::numbers::pi : w;
}

// ---------------------------------------------------------------------------
// MobiusMap

MobiusMap MobiusMap::rotation(double angle) {
  Complex h = std::polar(1.0, 0.5 * angle);
  return {h, 0.0, 0.0, std::conj(h)};
}

MobiusMap MobiusMap::translation(Complex t) { return {1.0, t, 0.0, 1.0}; }

MobiusMap MobiusMap::hyperbolic_translation(double direction, double distance) {
  return disk_transvection(std::polar(std::tanh(0.5 * distance), direction));
}

MobiusMap MobiusMap::disk_transvection(Complex p) {
  double s = 1.0 / std::sqrt(one_minus_norm(p));
  return {s, s * p, s * std::conj(p), s};
}

MobiusMap MobiusMap::inverse() const {
  return MobiusMap(m_[3], -m_[1], -m_[2], m_[0]).normalized();
}

MobiusMap MobiusMap::normalized() const {
  Complex s = std::sqrt(det());
  MobiusMap n(m_[0] / s, m_[1] / s, m_[2] / s, m_[3] / s);
  auto negative = [](Complex w) { return w.real() < 0.0 || (w.real() == 0.0 && w.imag() < 0.0); };
  bool flip = n.m_[0] != Complex{0.0} ? negative(n.m_[0]) : negative(n.m_[1]);
  if (flip) {
    for (auto& e : n.m_) e = -e;
  }
  return n;
}

double MobiusMap::distance_to(const MobiusMap& other) const {
  MobiusMap p = normalized();
  MobiusMap q = other.normalized();
  double plus = 0.0;
  double minus = 0.0;
  for (int i = 0; i < 4; ++i) {
    plus = std::max(plus, std::abs(p.m_[i] - q.m_[i]));
    minus = std::max(minus, std::abs(p.m_[i] + q.m_[i]));
  }
  return std::min(plus, minus);
}

MobiusMap operator*(const MobiusMap& l, const MobiusMap& r) {
  const auto& x = l.m_;
  const auto& y = r.m_;
  MobiusMap out(x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3],
                x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]);
  return out.normalized();
}

// ---------------------------------------------------------------------------
// ModelSpace

bool ModelSpace::contains(ChartPoint p) const {
  if (!std::isfinite(p.x()) || !std::isfinite(p.y())) return false;
  return !is_hyperbolic() || std::abs(p.z) < 1.0 - kChartGuard;
}

void ModelSpace::check(ChartPoint p) const {
  if (!contains(p)) throw DomainError("point outside the chart of the " + std::string(name()) + " model");
}

double ModelSpace::conformal_factor(ChartPoint p) const {
  return is_hyperbolic() ? 2.0 / one_minus_norm(p.z) : 1.0;
}

Complex ModelSpace::log_conformal_gradient(ChartPoint p) const {
  return is_hyperbolic() ? 2.0 * p.z / one_minus_norm(p.z) : Complex{};
}

double ModelSpace::dist(ChartPoint a, ChartPoint b) const {
  check(a);
  check(b);
  if (!is_hyperbolic()) return std::abs(a.z - b.z);
  double num = std::abs(a.z - b.z);
  double den = std::abs(1.0 - std::conj(a.z) * b.z);
  if (num < 0.5 * den) return 2.0 * std::atanh(num / den);
  // |1 - conj(a) b|^2 - |a - b|^2 = (1 - |a|^2)(1 - |b|^2)
  return 2.0 * std::log(num + den) - std::log(one_minus_norm(a.z)) - std::log(one_minus_norm(b.z));
}

double ModelSpace::inner(ChartPoint p, const TangentVector& u, const TangentVector& w) const {
  if (u.base.z != p.z || w.base.z != p.z) throw ContractError("inner: tangent vectors based elsewhere");
  check(p);
  double lam = conformal_factor(p);
  return lam * lam * (u.v.real() * w.v.real() + u.v.imag() * w.v.imag());
}

double ModelSpace::norm(const TangentVector& u) const {
  return conformal_factor(u.base) * std::abs(u.v);
}

ChartPoint ModelSpace::exp_map(ChartPoint p, const TangentVector& v, double t) const {
  if (v.base.z != p.z) throw ContractError("exp_map: vector based elsewhere");
  double speed = std::abs(v.v);
  if (t == 0.0 || speed == 0.0) return p;
  if (!is_hyperbolic()) return p.z + t * v.v;
  double arclength = t * conformal_factor(p) * speed;
  Complex w = (std::tanh(0.5 * arclength) / speed) * v.v;
  return (w + p.z) / (1.0 + std::conj(p.z) * w);
}

double ModelSpace::geodesic_transport_rotation(ChartPoint p, const TangentVector& v, double t) const {
  double speed = std::abs(v.v);
  if (!is_hyperbolic() || t == 0.0 || speed == 0.0) return 0.0;
  double arclength = t * conformal_factor(p) * speed;
  Complex w = (std::tanh(0.5 * arclength) / speed) * v.v;
  return -2.0 * std::arg(1.0 + std::conj(p.z) * w);
}

TangentVector ModelSpace::log_map(ChartPoint a, ChartPoint b) const {
  if (!is_hyperbolic()) return {a, b.z - a.z};
  Complex w = (b.z - a.z) / (1.0 - std::conj(a.z) * b.z);
  double r = std::abs(w);
  if (r == 0.0) return {a, 0.0};
  double d = 2.0 * std::atanh(r);
  return {a, (d / (r * conformal_factor(a))) * w};
}

ChartPoint ModelSpace::geodesic_point(ChartPoint a, ChartPoint b, double s) const {
  return exp_map(a, log_map(a, b), s);
}

bool ModelSpace::preserves(const MobiusMap& m) const {
  MobiusMap n = m.normalized();
  double scale = std::max(1.0, std::abs(n.a()));
  constexpr double tol = 1e-9;
  if (is_hyperbolic()) {
    return std::abs(n.c() - std::conj(n.b())) <= tol * scale &&
           std::abs(n.d() - std::conj(n.a())) <= tol * scale;
  }
  return std::abs(n.c()) <= tol && std::abs(std::abs(n.a()) - std::abs(n.d())) <= tol;
}

ChartPoint ModelSpace::mobius_apply(const MobiusMap& m, ChartPoint p) const {
  if (!preserves(m)) throw ContractError("mobius_apply: map does not preserve the chart");
  check(p);
  ChartPoint q = m(p.z);
  check(q);
  return q;
}

TangentVector ModelSpace::mobius_pushforward(const MobiusMap& m, const TangentVector& u) const {
  ChartPoint q = mobius_apply(m, u.base);
  return {q, m.derivative(u.base.z) * u.v};
}

double ModelSpace::connection_rotation_rate(ChartPoint p, const TangentVector& dir) const {
  check(p);
  Complex g = log_conformal_gradient(p);
  return dir.v.real() * g.imag() - dir.v.imag() * g.real();
}

double ModelSpace::chart_radius(double r) const { return is_hyperbolic() ? std::tanh(0.5 * r) : r; }

}  // namespace fls
