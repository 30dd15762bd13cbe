#include "fls/lyons_sullivan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fls/parallel.hpp"
#include "fls/stats.hpp"

namespace fls {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBoundaryTolerance = 1e-5;
constexpr double kHitShell = 1e-6;
constexpr double kRatioFloor = 1e-6;
constexpr double kRatioCeil = 1e6;

/// Chart map sending x to the basepoint, as the inverse deck transformation.
MobiusMap to_local(const FiberPoint& x) { return x.deck.inverse().map(); }

}  // namespace

// ---------------------------------------------------------------------------
// Family and closed-form bound

void StarRecurrentFamily::validate(const DeckGroup& group) const {
  const double half_systole = 0.5 * group.systole_lower_bound();
  if (!(r_E > 0.0)) throw ContractError("star-recurrent family: r_E must be positive");
  if (!(r_V > r_E)) throw ContractError("star-recurrent family: need r_E < r_V (E_x inside V_x)");
  if (!(r_E < half_systole)) {
    throw ContractError("star-recurrent family: r_E must stay below half the systole bound so the E_x are disjoint");
  }
  if (level == Level::Base && !(r_V < half_systole)) {
    throw ContractError("star-recurrent family: base-level r_V must stay below half the systole bound");
  }
  if (!(C >= 1.0)) throw ContractError("star-recurrent family: C must be at least 1");
}

double base_harnack_bound(const ModelSpace& m, double r_E, double r_V) {
  if (!(r_E >= 0.0 && r_V > r_E)) throw ContractError("base_harnack_bound: need 0 <= r_E < r_V");
  double e = m.chart_radius(r_E);
  double v = m.chart_radius(r_V);
  return (v + e) / (v - e);
}

double base_density_ratio(const ModelSpace& m, const Ball& v, ChartPoint y, ChartPoint z) {
  if (std::abs(m.dist(v.center, z) - v.radius) > kBoundaryTolerance) {
    throw ContractError("density ratio: exit point is not on the boundary of V");
  }
  BallChart chart = BallChart::of(m, v);
  Complex w = chart.to_local(y.z) / chart.chart_radius;
  Complex zeta = chart.to_local(z.z);
  zeta /= std::abs(zeta);
  return std::norm(zeta - w) / (1.0 - std::norm(w));
}

double harnack_bound(const ModelSpace& m, const StarRecurrentFamily& family, const ExitDensityTable* table) {
  if (family.level == Level::Base) return base_harnack_bound(m, family.r_E, family.r_V);
  if (table == nullptr) throw ContractError("harnack_bound: bundle level needs a fitted exit density table");
  return kHarnackSafety * table->raw_bound();
}

// ---------------------------------------------------------------------------
// ExitDensityTable

double ExitDensityTable::eval(const Series& s, double phi, double psi) const {
  const int K = harmonics_;
  const int width = 2 * K + 1;
  double acc = 0.0;
  for (int k = -K; k <= K; ++k) {
    for (int l = -K; l <= K; ++l) {
      std::size_t idx = static_cast<std::size_t>((k + K) * width + (l + K));
      if (s.re[idx] == 0.0 && s.im[idx] == 0.0) continue;
      double arg = k * phi + l * psi;
      acc += s.re[idx] * std::cos(arg) - s.im[idx] * std::sin(arg);
    }
  }
  return acc;
}

ExitDensityTable ExitDensityTable::fit(const ModelSpace& m, double r_E, double r_V, const Options& opt) {
  if (!(r_E > 0.0 && r_V > r_E)) throw ContractError("ExitDensityTable: need 0 < r_E < r_V");
  if (opt.harmonics < 1 || opt.radial_points < 2 || opt.samples < 1) {
    throw ContractError("ExitDensityTable: harmonics, radial points and samples must be positive");
  }
  opt.diffusion.validate();

  ExitDensityTable t;
  t.frame_resolved_ = m.is_hyperbolic();
  t.r_E_ = r_E;
  t.r_V_ = r_V;
  for (int j = 0; j < opt.radial_points; ++j) t.grid_s_.push_back(r_E * j / (opt.radial_points - 1));

  const Ball ball{ChartPoint{}, r_V};
  const std::size_t points = t.grid_s_.size();
  // samples[j] holds (phi, psi) pairs.
  std::vector<std::vector<std::pair<double, double>>> samples(points);

  auto draw = [&](std::size_t count) {
    for (std::size_t j = 0; j < points; ++j) {
      std::size_t have = samples[j].size();
      samples[j].resize(have + count);
      ChartPoint start{m.chart_radius(t.grid_s_[j]), 0.0};
      parallel_for(count, opt.threads, [&](std::size_t i) {
        std::uint64_t stream = (static_cast<std::uint64_t>(j) << 40) | (have + i);
        PathRng rng(opt.seed, stream, kAuxiliary);
        HorizontalState out = simulate_to_exit(m, {{start, opt.start_angle}}, ball, opt.diffusion, rng);
        samples[j][have + i] = {std::arg(out.frame.base.z), wrap_angle(out.frame.angle - opt.start_angle)};
      });
    }
  };

  auto build = [&](int K) {
    t.harmonics_ = K;
    t.samples_ = samples.front().size();
    const int width = 2 * K + 1;
    const double norm = t.frame_resolved_ ? 1.0 / (4.0 * kPi * kPi) : 1.0 / (2.0 * kPi);
    t.series_.assign(points, Series{std::vector<double>(width * width, 0.0), std::vector<double>(width * width, 0.0)});
    for (std::size_t j = 0; j < points; ++j) {
      const double n = static_cast<double>(samples[j].size());
      for (int k = -K; k <= K; ++k) {
        // The centre start is rotation invariant: drop the phi dependence.
        if (j == 0 && k != 0) continue;
        for (int l = -K; l <= K; ++l) {
          if (!t.frame_resolved_ && l != 0) continue;
          double cr = 0.0;
          double ci = 0.0;
          for (const auto& [phi, psi] : samples[j]) {
            double arg = k * phi + l * psi;
            cr += std::cos(arg);
            ci -= std::sin(arg);
          }
          std::size_t idx = static_cast<std::size_t>((k + K) * width + (l + K));
          t.series_[j].re[idx] = norm * cr / n;
          t.series_[j].im[idx] = norm * ci / n;
        }
      }
    }
    // Scan the evaluation grid.
    double max_centre = 0.0;
    double min_all = std::numeric_limits<double>::infinity();
    std::size_t negative = 0;
    std::size_t total = 0;
    const int psi_points = t.frame_resolved_ ? kGrid : 1;
    for (std::size_t j = 0; j < points; ++j) {
      for (int a = 0; a < kGrid; ++a) {
        double phi = -kPi + 2.0 * kPi * a / kGrid;
        for (int b = 0; b < psi_points; ++b) {
          double psi = -kPi + 2.0 * kPi * b / kGrid;
          double q = t.eval(t.series_[j], phi, psi);
          ++total;
          if (q <= 0.0) ++negative;
          min_all = std::min(min_all, std::max(q, kDensityFloor));
          if (j == 0) max_centre = std::max(max_centre, q);
        }
      }
    }
    t.negative_fraction_ = static_cast<double>(negative) / static_cast<double>(total);
    t.raw_bound_ = max_centre / min_all;
  };

  draw(opt.samples);
  build(opt.harmonics);
  if (t.negative_fraction_ > 0.0) {
    draw(3 * opt.samples);
    build(opt.harmonics);
  }
  if (t.negative_fraction_ > 0.0) build(2 * opt.harmonics);
  if (t.negative_fraction_ > opt.negative_tolerance) {
    throw EstimationError("exit density fit stays non-positive on " + std::to_string(t.negative_fraction_) +
                          " of the torus grid after refitting");
  }
  return t;
}

double ExitDensityTable::density(double s, double phi, double psi) const {
  if (!frame_resolved_) psi = 0.0;
  s = std::clamp(s, 0.0, grid_s_.back());
  double pos = s / grid_s_.back() * static_cast<double>(grid_s_.size() - 1);
  std::size_t j = std::min(static_cast<std::size_t>(pos), grid_s_.size() - 2);
  double frac = pos - static_cast<double>(j);
  double q0 = std::max(eval(series_[j], phi, psi), kDensityFloor);
  double q1 = std::max(eval(series_[j + 1], phi, psi), kDensityFloor);
  return (1.0 - frac) * q0 + frac * q1;
}

double ExitDensityTable::ratio(Complex y, double theta, double phi, double psi) const {
  // Distance of the local start from the centre, in the metric the grid uses.
  double r = std::abs(y);
  double s = frame_resolved_ ? 2.0 * std::atanh(r) : r;
  double from_centre = density(0.0, 0.0, psi);
  double from_y = density(s, phi - std::arg(y), psi - theta);
  return std::clamp(from_centre / from_y, kRatioFloor, kRatioCeil);
}

// ---------------------------------------------------------------------------
// Chain

LyonsSullivanChain::LyonsSullivanChain(const DeckGroup& group, StarRecurrentFamily family,
                                       const ExitDensityTable* table)
    : group_(&group), family_(family), table_(table) {
  family_.validate(group);
  if (family_.level == Level::Bundle && table_ == nullptr) {
    throw ContractError("bundle-level chain needs a fitted exit density table");
  }
}

HorizontalState LyonsSullivanChain::representative(const FiberPoint& x) const {
  return {{x.coords, wrap_angle(x.representative_angle())}};
}

double LyonsSullivanChain::density_ratio(const FiberPoint& x, const HorizontalState& y,
                                         const HorizontalState& z) const {
  const ModelSpace& m = group_->model();
  if (family_.level == Level::Base) return base_density_ratio(m, {x.coords, family_.r_V}, y.frame.base, z.frame.base);
  if (std::abs(m.dist(x.coords, z.frame.base) - family_.r_V) > kBoundaryTolerance) {
    throw ContractError("density_ratio: exit point is not on the boundary of V_x");
  }
  MobiusMap local = to_local(x);
  Frame yl = push_frame(m, local, y.frame);
  Frame zl = push_frame(m, local, z.frame);
  return table_->ratio(yl.base.z, yl.angle, std::arg(zl.base.z), zl.angle);
}

ChainRecord LyonsSullivanChain::run(const HorizontalState& start, const ChainConfig& cfg, std::uint64_t seed,
                                    std::uint64_t chain_index) const {
  const ModelSpace& m = group_->model();
  if (cfg.acceptances < 1) throw ContractError("run_chain: need at least one acceptance");
  if (cfg.sampler == Sampler::Exact && family_.level == Level::Bundle) {
    throw ContractError("run_chain: the exact sampler only exists at the base level");
  }
  cfg.diffusion.validate();
  m.check(start.frame.base);

  PathRng path(seed, chain_index, kPathNoise);
  PathRng uniforms(seed, chain_index, kAcceptance);
  FiberLocator locator(*group_);

  // Truncation: compare chart radii after moving the start to the origin.
  const MobiusMap recentre = m.is_hyperbolic() ? MobiusMap::disk_transvection(start.frame.base.z).inverse()
                                               : MobiusMap::translation(-start.frame.base.z);
  const double trunc_chart = m.chart_radius(cfg.truncation_radius);
  auto truncated = [&](ChartPoint p) { return std::abs(recentre(p.z)) > trunc_chart; };

  ChainRecord rec;
  rec.timed = cfg.sampler == Sampler::Stepped;
  HorizontalState s = start;

  auto exit_from = [&](const FiberPoint& x, const HorizontalState& from) -> std::optional<HorizontalState> {
    const Ball v{x.coords, family_.r_V};
    if (cfg.sampler == Sampler::Exact) {
      HorizontalState out = from;
      out.frame.base = sample_exit_exact(m, from.frame.base, v, path);
      if (truncated(out.frame.base)) return std::nullopt;
      return out;
    }
    auto outside = [&](ChartPoint p) { return m.dist(p, v.center) - v.radius; };
    auto project = [&](ChartPoint p) { return project_to_sphere(m, v, p); };
    auto res = detail::walk_until(m, from, cfg.diffusion, path, outside, project, truncated);
    if (res.aborted) return std::nullopt;
    return res.state;
  };

  // Moves s until it enters E; false when the run is truncated.
  auto hit_e = [&]() -> bool {
    if (locator.distance_to_fiber(s.frame.base) <= family_.r_E) return true;
    if (cfg.sampler == Sampler::Exact) {
      for (std::int64_t n = 0; n < cfg.diffusion.max_steps; ++n) {
        double d = locator.distance_to_fiber(s.frame.base);
        double gap = d - family_.r_E;
        if (gap <= kHitShell) {
          // Snap the shell point onto the sphere of radius r_E.
          if (gap > 0.0) s.frame.base = project_to_sphere(m, {locator.current_fiber().coords, family_.r_E}, s.frame.base);
          return true;
        }
        s.frame.base = sample_exit_exact(m, s.frame.base, {s.frame.base, gap}, path);
        if (truncated(s.frame.base)) return false;
      }
      throw NonconvergenceError("walk on spheres did not reach E within max_steps");
    }
    auto inside = [&](ChartPoint p) { return family_.r_E - locator.distance_to_fiber(p); };
    auto project = [&](ChartPoint p) {
      locator.distance_to_fiber(p);
      return project_to_sphere(m, {locator.current_fiber().coords, family_.r_E}, p);
    };
    auto res = detail::walk_until(m, s, cfg.diffusion, path, inside, project, truncated);
    s = res.state;
    return !res.aborted;
  };

  // tau_0: exit from V_x if the chain starts on X.
  if (locator.distance_to_fiber(s.frame.base) <= 1e-9) {
    auto out = exit_from(locator.current_fiber(), s);
    if (!out) {
      rec.escaped = true;
      return rec;
    }
    s = *out;
    rec.tau0 = s.time;
  }

  for (int n = 1; static_cast<int>(rec.accepted.size()) < cfg.acceptances; ++n) {
    if (!hit_e()) {
      rec.escaped = true;
      return rec;
    }
    Stage st;
    st.n = n;
    st.T = s.time;
    st.Y = s;
    locator.distance_to_fiber(s.frame.base);
    st.X = locator.current_fiber();
    auto out = exit_from(st.X, s);
    if (!out) {
      rec.escaped = true;
      return rec;
    }
    s = *out;
    st.tau = s.time;
    st.Z = s;
    st.U = uniforms.uniform();
    st.threshold = density_ratio(st.X, st.Y, st.Z) / family_.C;
    st.accepted = st.U <= st.threshold;
    if (st.accepted) rec.accepted.push_back(rec.stages.size());
    rec.stages.push_back(std::move(st));
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Estimation

const TransitionEntry* TransitionEstimate::find(int label) const {
  for (const auto& e : entries) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

TransitionEstimate estimate_transitions(const LyonsSullivanChain& chain, const FiberPoint& x, std::int64_t n_runs,
                                        const ChainConfig& cfg, std::uint64_t seed, int threads,
                                        OrbitDictionary& dict) {
  if (n_runs < 1) throw ContractError("estimate_transitions: n_runs must be at least 1");
  struct Outcome {
    bool escaped = true;
    DeckElement deck;
    std::int64_t stages = 0;
    std::int64_t violations = 0;
    double min_thr = std::numeric_limits<double>::infinity();
    double max_thr = 0.0;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(n_runs));
  const HorizontalState start = chain.representative(x);
  ChainConfig one = cfg;
  one.acceptances = 1;
  parallel_for(outcomes.size(), threads, [&](std::size_t i) {
    ChainRecord rec = chain.run(start, one, seed, i);
    Outcome& o = outcomes[i];
    for (const auto& st : rec.stages) {
      ++o.stages;
      if (st.threshold > 1.0) ++o.violations;
      o.min_thr = std::min(o.min_thr, st.threshold);
      o.max_thr = std::max(o.max_thr, st.threshold);
    }
    o.escaped = rec.escaped;
    if (!rec.escaped) o.deck = rec.accepted_point(0).deck;
  });

  TransitionEstimate est;
  est.source = x;
  est.source_label = dict.label_of(x);
  est.total_runs = n_runs;
  est.min_threshold = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> counts;
  std::vector<FiberPoint> points;
  for (const auto& o : outcomes) {
    est.stages += o.stages;
    est.threshold_violations += o.violations;
    est.min_threshold = std::min(est.min_threshold, o.min_thr);
    est.max_threshold = std::max(est.max_threshold, o.max_thr);
    if (o.escaped) {
      ++est.escaped_runs;
      continue;
    }
    FiberPoint fp = chain.group().fiber_point(o.deck);
    int label = dict.label_of(fp);
    if (static_cast<std::size_t>(label) >= counts.size()) {
      counts.resize(static_cast<std::size_t>(label) + 1, 0);
      points.resize(static_cast<std::size_t>(label) + 1);
    }
    if (counts[static_cast<std::size_t>(label)]++ == 0) points[static_cast<std::size_t>(label)] = fp;
  }
  const double n = static_cast<double>(n_runs);
  for (std::size_t label = 0; label < counts.size(); ++label) {
    if (counts[label] == 0) continue;
    TransitionEntry e;
    e.label = static_cast<int>(label);
    e.point = points[label];
    e.count = counts[label];
    e.frequency = static_cast<double>(e.count) / n;
    e.se = std::sqrt(e.frequency * (1.0 - e.frequency) / n);
    std::tie(e.wilson_lo, e.wilson_hi) = stats::wilson_interval(static_cast<double>(e.count), n);
    est.entries.push_back(std::move(e));
  }
  est.escaped_mass = static_cast<double>(est.escaped_runs) / n;
  if (est.stages == 0) est.min_threshold = 0.0;
  return est;
}

ResidualResult discretization_residual(const std::function<double(ChartPoint)>& h, double sup_abs_h,
                                       const TransitionEstimate& est) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (const auto& e : est.entries) {
    double v = h(e.point.coords);
    s1 += e.frequency * v;
    s2 += e.frequency * v * v;
  }
  ResidualResult r;
  r.mean = s1;
  r.residual = std::abs(h(est.source.coords) - s1);
  const double n = static_cast<double>(std::max<std::int64_t>(est.total_runs, 1));
  r.standard_error = std::sqrt(std::max(0.0, s2 - s1 * s1) / n);
  r.error_budget = 3.0 * r.standard_error + est.escaped_mass * sup_abs_h;
  return r;
}

}  // namespace fls
