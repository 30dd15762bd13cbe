#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "fls/errors.hpp"
#include "fls/geometry.hpp"
#include "fls/rng.hpp"

namespace fls {

/// Orthonormal frame at `base`, encoded by its rotation against the canonical
/// chart frame (e1 = d/dx / lambda, e2 = d/dy / lambda). Both built-in
/// bundles are circle (or point) bundles over oriented surfaces, so one
/// angle is the whole fiber coordinate.
struct Frame {
  ChartPoint base;
  double angle = 0.0;

  /// Chart components of sigma(e_1) and sigma(e_2).
  Complex e1(const ModelSpace& m) const { return std::polar(1.0 / m.conformal_factor(base), angle); }
  Complex e2(const ModelSpace& m) const { return Complex{0.0, 1.0} * e1(m); }
  /// Chart vector sigma(c) for frame coordinates c = (c1, c2).
  Complex apply(const ModelSpace& m, double c1, double c2) const { return Complex{c1, c2} * e1(m); }
};

/// A state of the horizontal diffusion on the holonomy bundle.
struct HorizontalState {
  Frame frame;
  double time = 0.0;
  /// Set once the base enters the chart guard band.
  bool escaped = false;
};

struct DiffusionConfig {
  double step = 1e-3;
  std::uint64_t rng_seed = 0;
  std::int64_t max_steps = 10'000'000;

  void validate() const;
};

/// Closed metric ball B(center, radius) in the cover.
struct Ball {
  ChartPoint center;
  double radius = 0.0;
};

/// Conformal chart of a ball: `to_local` sends the centre to 0 and the ball
/// onto the Euclidean disk of radius `chart_radius`.
struct BallChart {
  MobiusMap to_local;
  MobiusMap to_global;
  double chart_radius = 0.0;

  static BallChart of(const ModelSpace& m, const Ball& b);
};

/// Moves a frame by the flow of its own geodesic: base to exp_map(base, v, s),
/// frame parallel along the segment.
Frame advance_frame(const ModelSpace& m, const Frame& f, Complex v, double s);

/// Parallel transport along the chart polyline through `waypoints` (the first
/// must be start.base). Each segment is integrated by 3-point Gauss-Legendre.
Frame transport_polyline(const ModelSpace& m, const Frame& start, std::span<const ChartPoint> waypoints);

/// One step of the geodesic Markov chain for 1/2 Delta_P: the base moves by
/// exp_map along sigma(gaussian), the frame is carried parallel. `gaussian`
/// must already be scaled by sqrt(step).
HorizontalState horizontal_step(const ModelSpace& m, const HorizontalState& s, double g1, double g2,
                                const DiffusionConfig& cfg);

/// Pushes a frame forward by a chart isometry.
Frame push_frame(const ModelSpace& m, const MobiusMap& map, const Frame& f);

/// Point where the geodesic from the centre through p meets the sphere
/// (p itself when it is the centre).
ChartPoint project_to_sphere(const ModelSpace& m, const Ball& ball, ChartPoint p);

namespace detail {

/// Runs horizontal steps until `crossing(base) > 0`, then bisects the last
/// step until |crossing| <= tol (returning the outer side). `abort(base)`
/// ends the walk early with `aborted = true`.
///
/// `crossing` is a signed metric distance to the boundary (negative before
/// the crossing). A step whose endpoints both lie before the boundary still
/// crosses with the Brownian bridge probability exp(-2 d0 d1 / h) of a
/// half-plane; the walk then stops at `project(p)`, the boundary point
/// nearest the interpolated position p.
struct WalkOutcome {
  HorizontalState state;
  bool aborted = false;
  std::int64_t steps = 0;
};

template <class Crossing, class Project, class Abort>
WalkOutcome walk_until(const ModelSpace& m, HorizontalState s, const DiffusionConfig& cfg, PathRng& rng,
                       Crossing&& crossing, Project&& project, Abort&& abort, double tol = 1e-6) {
  const double scale = std::sqrt(cfg.step);
  double gap = -crossing(s.frame.base);
  for (std::int64_t n = 0; n < cfg.max_steps; ++n) {
    auto [g1, g2] = rng.normal_pair();
    Complex v = s.frame.apply(m, scale * g1, scale * g2);
    Frame next = advance_frame(m, s.frame, v, 1.0);
    if (!m.contains(next.base)) {
      s.frame = next;
      s.escaped = true;
      s.time += cfg.step;
      return {s, true, n + 1};
    }
    double level = crossing(next.base);
    if (level > 0.0) {
      double lo = 0.0;
      double hi = 1.0;
      Frame hit = next;
      for (int it = 0; it < 200 && level > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        Frame trial = advance_frame(m, s.frame, v, mid);
        double lv = crossing(trial.base);
        if (lv > 0.0) {
          hi = mid;
          hit = trial;
          level = lv;
        } else {
          lo = mid;
        }
      }
      s.frame = hit;
      s.frame.angle = wrap_angle(s.frame.angle);
      s.time += hi * cfg.step;
      return {s, false, n + 1};
    }
    const double next_gap = -level;
    const double exponent = 2.0 * gap * next_gap / cfg.step;
    // Below exp(-40) the draw is skipped; the omitted mass is negligible.
    if (exponent < 40.0 && rng.uniform() < std::exp(-exponent)) {
      const double t = gap / (gap + next_gap);
      Frame mid = advance_frame(m, s.frame, v, t);
      ChartPoint target = project(mid.base);
      s.frame = advance_frame(m, mid, m.log_map(mid.base, target).v, 1.0);
      s.frame.base = target;
      s.frame.angle = wrap_angle(s.frame.angle);
      s.time += t * cfg.step;
      return {s, false, n + 1};
    }
    gap = next_gap;
    s.frame = next;
    s.time += cfg.step;
    if ((n & 255) == 255) s.frame.angle = wrap_angle(s.frame.angle);
    if (abort(s.frame.base)) return {s, true, n + 1};
  }
  throw NonconvergenceError("walk exceeded max_steps without reaching its stopping set");
}

}  // namespace detail

/// First exit from the closed ball, with the overshoot bisected back to
/// within 1e-6 of the boundary (outer side).
HorizontalState simulate_to_exit(const ModelSpace& m, const HorizontalState& s, const Ball& region,
                                 const DiffusionConfig& cfg, PathRng& rng);

/// Exact sample of the Brownian exit position from the ball started at y
/// (Poisson kernel of the conformal image disk).
ChartPoint sample_exit_exact(const ModelSpace& m, ChartPoint y, const Ball& region, PathRng& rng);

/// Poisson kernel of the unit disk, normalised so P(0, .) = 1.
inline double poisson_kernel(Complex w, Complex zeta) {
  return (1.0 - std::norm(w)) / std::norm(zeta - w);
}

}  // namespace fls
