#include "fls/bundle.hpp"

#include <array>
#include <numbers>

namespace fls {

void DiffusionConfig::validate() const {
  if (!(step > 0.0)) throw ContractError("diffusion step must be positive");
  if (max_steps <= 0) throw ContractError("max_steps must be positive");
}

BallChart BallChart::of(const ModelSpace& m, const Ball& b) {
  if (m.is_hyperbolic()) {
    MobiusMap to_global = MobiusMap::disk_transvection(b.center.z);
    return {to_global.inverse(), to_global, m.chart_radius(b.radius)};
  }
  return {MobiusMap::translation(-b.center.z), MobiusMap::translation(b.center.z), b.radius};
}

Frame advance_frame(const ModelSpace& m, const Frame& f, Complex v, double s) {
  TangentVector tv{f.base, v};
  return {m.exp_map(f.base, tv, s), f.angle + m.geodesic_transport_rotation(f.base, tv, s)};
}

Frame push_frame(const ModelSpace& m, const MobiusMap& map, const Frame& f) {
  ChartPoint q = m.mobius_apply(map, f.base);
  return {q, wrap_angle(f.angle + std::arg(map.derivative(f.base.z)))};
}

Frame transport_polyline(const ModelSpace& m, const Frame& start, std::span<const ChartPoint> waypoints) {
  if (waypoints.empty()) return start;
  if (std::abs(waypoints.front().z - start.base.z) > 1e-12) {
    throw ContractError("transport_polyline: first waypoint must be the frame's base");
  }
  // 3-point Gauss-Legendre on [0, 1].
  static constexpr std::array<double, 3> nodes{0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
  static constexpr std::array<double, 3> weights{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  double angle = start.angle;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    ChartPoint a = waypoints[i];
    ChartPoint b = waypoints[i + 1];
    m.check(a);
    m.check(b);
    Complex delta = b.z - a.z;
    double turn = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      ChartPoint p = a.z + nodes[k] * delta;
      turn += weights[k] * m.connection_rotation_rate(p, {p, delta});
    }
    angle += turn;
  }
  return {waypoints.back(), wrap_angle(angle)};
}

HorizontalState horizontal_step(const ModelSpace& m, const HorizontalState& s, double g1, double g2,
                                const DiffusionConfig& cfg) {
  HorizontalState out = s;
  out.time += cfg.step;
  if (g1 == 0.0 && g2 == 0.0) return out;
  out.frame = advance_frame(m, s.frame, s.frame.apply(m, g1, g2), 1.0);
  out.frame.angle = wrap_angle(out.frame.angle);
  if (!m.contains(out.frame.base)) out.escaped = true;
  return out;
}

ChartPoint project_to_sphere(const ModelSpace& m, const Ball& ball, ChartPoint p) {
  double d = m.dist(ball.center, p);
  if (d == 0.0) return p;
  return m.geodesic_point(ball.center, p, ball.radius / d);
}

HorizontalState simulate_to_exit(const ModelSpace& m, const HorizontalState& s, const Ball& region,
                                 const DiffusionConfig& cfg, PathRng& rng) {
  cfg.validate();
  if (region.radius <= 0.0) return s;
  if (m.dist(s.frame.base, region.center) > region.radius) {
    throw ContractError("simulate_to_exit: start outside the region");
  }
  auto outside = [&](ChartPoint p) { return m.dist(p, region.center) - region.radius; };
  auto project = [&](ChartPoint p) { return project_to_sphere(m, region, p); };
  auto never = [](ChartPoint) { return false; };
  return detail::walk_until(m, s, cfg, rng, outside, project, never).state;
}

ChartPoint sample_exit_exact(const ModelSpace& m, ChartPoint y, const Ball& region, PathRng& rng) {
  BallChart chart = BallChart::of(m, region);
  if (chart.chart_radius <= 0.0) return y;
  Complex w = chart.to_local(y.z) / chart.chart_radius;
  if (std::abs(w) >= 1.0 - 1e-12) return y;
  Complex zeta0 = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
  // Disk automorphism taking 0 to w carries uniform measure to harmonic measure at w.
  Complex zeta = (zeta0 + w) / (1.0 + std::conj(w) * zeta0);
  return chart.to_global(chart.chart_radius * zeta);
}

}  // namespace fls
