#include "fls/harness.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fls/groupoid.hpp"
#include "fls/holonomy.hpp"
#include "fls/parallel.hpp"
#include "fls/stats.hpp"
#include "fls/tensor.hpp"

#ifndef FLS_VERSION
#define FLS_VERSION "unknown"
#endif

namespace fls {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kRandomFrames = 20;
constexpr std::size_t kTensorFitSamples = 20000;

// Stream offset separating the off-centre exit samples from the centred ones.
constexpr std::uint64_t kOffCentreStream = std::uint64_t{1} << 40;

const char* model_key(ModelKind k) { return k == ModelKind::Flat ? "flat" : "hyperbolic"; }
const char* sampler_key(Sampler s) { return s == Sampler::Exact ? "exact" : "stepped"; }
const char* format_key(ReportFormat f) { return f == ReportFormat::Csv ? "csv" : "json"; }

std::string fmt17(double x) { return fmt::format("{:.17g}", x); }

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError(fmt::format("{}: cannot parse '{}' as a number", key, value));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Random frames for the pointwise checks, keyed by (seed, index).
Frame random_frame(const ModelSpace& m, std::uint64_t seed, int i) {
  PathRng rng(seed, static_cast<std::uint64_t>(i), kAuxiliary);
  double r = m.is_hyperbolic() ? 0.6 * std::sqrt(rng.uniform()) : 2.0 * rng.uniform();
  double arg = 2.0 * kPi * rng.uniform();
  double angle = 2.0 * kPi * rng.uniform() - kPi;
  return {std::polar(r, arg), angle};
}

// ---------------------------------------------------------------------------
// function-discretization

void dihedral_symmetry(const TransitionEstimate& est, std::vector<Quantity>& q) {
  // Lattice law grouped into orbits of the dihedral group of the square.
  std::map<std::pair<long, long>, std::int64_t> counts;
  for (const auto& e : est.entries) counts[e.point.deck.lattice()] = e.count;
  std::set<std::pair<long, long>> seen;
  const double n = static_cast<double>(est.total_runs);
  double max_z = 0.0;
  int tested = 0;
  for (const auto& [key, c] : counts) {
    if (seen.count(key)) continue;
    auto [a, b] = key;
    std::set<std::pair<long, long>> orbit;
    for (auto [u, v] : {std::pair{a, b}, {b, a}}) {
      for (long su : {-1L, 1L}) {
        for (long sv : {-1L, 1L}) orbit.insert({su * u, sv * v});
      }
    }
    std::int64_t total = 0;
    for (const auto& p : orbit) {
      seen.insert(p);
      auto it = counts.find(p);
      if (it != counts.end()) total += it->second;
    }
    const double k = static_cast<double>(orbit.size());
    const double pbar = static_cast<double>(total) / (k * n);
    // Normal approximation only where every label expects 100 hits.
    if (orbit.size() == 1 || pbar * n < 100.0) continue;
    ++tested;
    const double se = std::sqrt(pbar * (1.0 - pbar) * (1.0 - 1.0 / k) / n);
    for (const auto& p : orbit) {
      auto it = counts.find(p);
      double freq = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
      max_z = std::max(max_z, std::abs(freq - pbar) / se);
    }
  }
  q.push_back(Quantity::le("dihedral_max_z", max_z, 3.0));
  q.push_back(Quantity::info("dihedral_orbits_tested", tested));
}

void run_function_discretization(const ExperimentConfig& cfg, std::vector<Quantity>& q) {
  const ModelSpace m = cfg.model == ModelKind::Flat ? ModelSpace::flat() : ModelSpace::hyperbolic();
  const DeckGroup group = DeckGroup::for_model(m);
  StarRecurrentFamily fam{cfg.re(), cfg.rv(), base_harnack_bound(m, cfg.re(), cfg.rv()), Level::Base};
  LyonsSullivanChain chain(group, fam);
  ChainConfig cc;
  cc.diffusion.step = cfg.dt();
  cc.truncation_radius = cfg.trunc();
  cc.sampler = cfg.sampler;
  OrbitDictionary dict(group);
  TransitionEstimate est = estimate_transitions(chain, group.basepoint(), cfg.n_runs(), cc, cfg.seed, cfg.threads, dict);

  // Hyperbolic: the Poisson integral of cos(theta) over the disk boundary, Re z.
  // Flat: the coordinate x, bounded by the truncation radius on the runs kept.
  auto h = [](ChartPoint p) { return p.x(); };
  const double sup = m.is_hyperbolic() ? 1.0 : cfg.trunc();
  const double osc = 2.0 * sup;
  ResidualResult r = discretization_residual(h, sup, est);

  double total = est.escaped_mass;
  for (const auto& e : est.entries) total += e.frequency;
  const double rate = est.acceptance_rate();

  q.push_back(Quantity::le("residual", r.residual, r.error_budget));
  q.push_back(Quantity::le("residual_vs_oscillation", r.residual, 0.05 * osc));
  q.push_back(Quantity::le("mass_defect", std::abs(total - 1.0), 1e-12));
  q.push_back(Quantity::le("threshold_violations", static_cast<double>(est.threshold_violations), 0.0));
  q.push_back(Quantity::ge("acceptance_rate", rate, 1.0 / (fam.C * fam.C)));
  q.push_back(Quantity::le("acceptance_rate_upper", rate, 1.0));
  if (m.is_hyperbolic()) {
    q.push_back(Quantity::info("escaped_mass", est.escaped_mass));
  } else {
    q.push_back(Quantity::le("escaped_mass", est.escaped_mass, 1e-3));
    dihedral_symmetry(est, q);
  }
  q.push_back(Quantity::info("standard_error", r.standard_error));
  q.push_back(Quantity::info("h_source", h(est.source.coords)));
  q.push_back(Quantity::info("h_mean", r.mean));
  q.push_back(Quantity::info("harnack_constant", fam.C));
  q.push_back(Quantity::info("stages_per_run", static_cast<double>(est.stages) / static_cast<double>(est.total_runs)));
  q.push_back(Quantity::info("labels", static_cast<double>(est.entries.size())));
}

// ---------------------------------------------------------------------------
// tensor-discretization

// d(Re z^3) in chart components: harmonic on both models.
TensorValue d_re_cube(ChartPoint p) {
  double x = p.x(), y = p.y();
  return TensorValue(Valence{0, 1}, {3.0 * (x * x - y * y), -6.0 * x * y});
}

ExitDensityTable fit_bundle_table(const ModelSpace& m, const ExperimentConfig& cfg, std::size_t samples) {
  ExitDensityTable::Options opt;
  opt.harmonics = m.is_hyperbolic() ? 4 : 8;
  opt.samples = samples;
  // About 200 steps per mean exit time from V.
  opt.diffusion.step = std::min(cfg.dt(), cfg.rv() * cfg.rv() / 400.0);
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  return ExitDensityTable::fit(m, cfg.re(), cfg.rv(), opt);
}

void laplacian_commutation(const ModelSpace& m, std::uint64_t seed, std::vector<Quantity>& q) {
  ChartTensorField lap = covariant_laplacian(m, d_re_cube);
  auto F = [&](const Frame& f) { return scalarize(m, d_re_cube, f); };
  const double steps[3] = {0.1, 0.05, 0.025};
  double worst[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < kRandomFrames; ++i) {
    Frame f = random_frame(m, seed, i);
    if (!m.is_hyperbolic()) f.base = f.base.z * 0.5;
    TensorValue target = scalarize(m, lap, f);
    double scale = std::max(target.max_abs(), F(f).max_abs());
    for (int k = 0; k < 3; ++k) {
      double err = (horizontal_laplacian_fd(m, F, f, steps[k]) - target).max_abs() / scale;
      worst[k] = std::max(worst[k], err);
    }
  }
  double order = std::min(std::log2(worst[0] / worst[1]), std::log2(worst[1] / worst[2]));
  q.push_back(Quantity::le("laplacian_commutation_error", worst[2], 1e-2));
  q.push_back(Quantity::info("laplacian_commutation_error_coarse", worst[0]));
  // On the flat model the second differences are exact up to rounding.
  if (m.is_hyperbolic()) {
    q.push_back(Quantity::ge("laplacian_commutation_order", order, 1.8));
  } else {
    q.push_back(Quantity::info("laplacian_commutation_order", order));
  }
}

void run_tensor_discretization(const ExperimentConfig& cfg, std::vector<Quantity>& q) {
  const ModelSpace m = cfg.model == ModelKind::Flat ? ModelSpace::flat() : ModelSpace::hyperbolic();
  const DeckGroup group = DeckGroup::for_model(m);
  ExitDensityTable table = fit_bundle_table(m, cfg, kTensorFitSamples);
  StarRecurrentFamily fam{cfg.re(), cfg.rv(), 1.0, Level::Bundle};
  fam.C = harnack_bound(m, fam, &table);
  LyonsSullivanChain chain(group, fam, &table);
  ChainConfig cc;
  cc.diffusion.step = cfg.dt();
  cc.truncation_radius = cfg.trunc();
  OrbitDictionary dict(group);
  TransitionEstimate est = estimate_transitions(chain, group.basepoint(), cfg.n_runs(), cc, cfg.seed, cfg.threads, dict);
  RandomWalkFamily mu = build_groupoid_walk({est});

  const WalkFromSource& from = mu.sources.at(est.source_label);
  double total = from.escaped_mass;
  for (const auto& st : from.steps) total += st.probability;

  std::map<int, FiberPoint> points{{est.source_label, est.source}};
  for (const auto& e : est.entries) points[e.label] = e.point;
  ChartTensorField metric = [m](ChartPoint p) {
    double l = m.conformal_factor(p);
    return (l * l) * TensorValue::euclidean_metric();
  };
  ChartTensorField volume = [m](ChartPoint p) {
    double l = m.conformal_factor(p);
    return (l * l) * TensorValue::area_form();
  };
  HarmonicResidual rg = mu_harmonic_residual(TensorFieldOnX::restrict(m, metric, points), mu, est.source_label);
  HarmonicResidual rv = mu_harmonic_residual(TensorFieldOnX::restrict(m, volume, points), mu, est.source_label);

  q.push_back(Quantity::le("residual_metric", rg.residual, 1e-12));
  q.push_back(Quantity::le("residual_volume", rv.residual, 1e-12));
  q.push_back(Quantity::le("walk_mass_defect", std::abs(total - 1.0), 1e-12));
  q.push_back(Quantity::le("threshold_violations", static_cast<double>(est.threshold_violations), 0.0));
  q.push_back(Quantity::info("escaped_mass", est.escaped_mass));
  q.push_back(Quantity::info("escaped_slack_metric", rg.escaped_slack));
  q.push_back(Quantity::info("harnack_constant", fam.C));
  q.push_back(Quantity::info("acceptance_rate", est.acceptance_rate()));
  q.push_back(Quantity::info("walk_steps", static_cast<double>(from.steps.size())));
  q.push_back(Quantity::info("fit_negative_fraction", table.negative_fraction()));
  laplacian_commutation(m, cfg.seed, q);
}

// ---------------------------------------------------------------------------
// holonomy

void run_holonomy(const ExperimentConfig& cfg, std::vector<Quantity>& q) {
  const ModelSpace m = cfg.model == ModelKind::Flat ? ModelSpace::flat() : ModelSpace::hyperbolic();
  const bool hyp = m.is_hyperbolic();
  int span_min[3] = {99, 99, 99};
  int span_max[3] = {0, 0, 0};
  int hol_min = 99;
  int hol_max = 0;
  double vi0 = 0.0, vi1 = 0.0, curv_bracket = 0.0, curv_circ = 0.0;
  for (int i = 0; i < kRandomFrames; ++i) {
    Frame f = random_frame(m, cfg.seed, i);
    for (int d = 0; d < 3; ++d) {
      int s = bracket_span_dim(m, f, d);
      span_min[d] = std::min(span_min[d], s);
      span_max[d] = std::max(span_max[d], s);
    }
    int h = infinitesimal_holonomy_dim(m, f);
    hol_min = std::min(hol_min, h);
    hol_max = std::max(hol_max, h);
    vi0 = std::max(vi0, verify_vertical_identity(m, f, 0));
    vi1 = std::max(vi1, verify_vertical_identity(m, f, 1));
    const double K = m.curvature();
    curv_bracket = std::max(curv_bracket, std::abs(curvature_form(m, f, 1, 2) - K));
    BundleVector h1 = standard_horizontal(m, 1)(f);
    BundleVector h2 = standard_horizontal(m, 2)(f);
    curv_circ = std::max(curv_circ, std::abs(curvature_from_circulation(m, f, h1, h2) - K));
  }
  const double full = hyp ? 3.0 : 2.0;
  q.push_back(Quantity::eq("span_dim_depth0_min", span_min[0], 2.0));
  q.push_back(Quantity::eq("span_dim_depth0_max", span_max[0], 2.0));
  q.push_back(Quantity::eq("span_dim_depth1_min", span_min[1], full));
  q.push_back(Quantity::eq("span_dim_depth1_max", span_max[1], full));
  q.push_back(Quantity::eq("span_dim_depth2_min", span_min[2], full));
  q.push_back(Quantity::eq("span_dim_depth2_max", span_max[2], full));
  q.push_back(Quantity::eq("infinitesimal_holonomy_dim_min", hol_min, hyp ? 1.0 : 0.0));
  q.push_back(Quantity::eq("infinitesimal_holonomy_dim_max", hol_max, hyp ? 1.0 : 0.0));
  q.push_back(Quantity::le("vertical_identity_k0", vi0, 1e-3));
  q.push_back(Quantity::le("vertical_identity_k1", vi1, 1e-2));
  q.push_back(Quantity::le("curvature_bracket_error", curv_bracket, 1e-3));
  q.push_back(Quantity::le("curvature_circulation_error", curv_circ, 1e-6));
}

// ---------------------------------------------------------------------------
// transport

// Closed polygon through `vertices` with `per_side` geodesic segments per side.
std::vector<ChartPoint> polygon_path(const ModelSpace& m, const std::vector<ChartPoint>& vertices, int per_side) {
  std::vector<ChartPoint> path;
  const std::size_t n = vertices.size();
  for (std::size_t k = 0; k < n; ++k) {
    for (int i = 0; i < per_side; ++i) {
      path.push_back(m.geodesic_point(vertices[k], vertices[(k + 1) % n], static_cast<double>(i) / per_side));
    }
  }
  path.push_back(vertices.front());
  return path;
}

void run_transport(const ExperimentConfig& cfg, std::vector<Quantity>& q) {
  const ModelSpace m = cfg.model == ModelKind::Flat ? ModelSpace::flat() : ModelSpace::hyperbolic();
  // Equilateral triangle: vertex angles pi/4 on the disk (area pi/4), unit side in the plane.
  double circum = m.is_hyperbolic() ? std::acosh(1.0 / std::tan(kPi / 3.0) / std::tan(kPi / 8.0)) : 1.0 / std::sqrt(3.0);
  std::vector<ChartPoint> v;
  for (int k = 0; k < 3; ++k) v.push_back(std::polar(m.chart_radius(circum), 2.0 * kPi * k / 3.0));
  const double expected = m.is_hyperbolic() ? kPi / 4.0 : 0.0;
  const int refinements[4] = {4, 8, 16, 32};
  double err[4] = {};
  double rotation = 0.0;
  for (int k = 0; k < 4; ++k) {
    auto path = polygon_path(m, v, refinements[k]);
    Frame end = transport_polyline(m, {v[0], 0.0}, path);
    rotation = std::abs(wrap_angle(end.angle));
    err[k] = std::abs(rotation - expected);
  }
  q.push_back(Quantity::info("rotation_magnitude", rotation));
  if (m.is_hyperbolic()) {
    q.push_back(Quantity::le("rotation_error", err[3], 1e-3));
    double order = std::min(std::log2(err[1] / err[2]), std::log2(err[2] / err[3]));
    q.push_back(Quantity::ge("refinement_order", order, 1.8));
  } else {
    q.push_back(Quantity::le("rotation_error", err[3], 1e-12));
  }
  // Right invariance: transport commutes with rotating the start frame.
  auto path = polygon_path(m, v, 8);
  Frame a = transport_polyline(m, {v[0], 0.0}, path);
  Frame b = transport_polyline(m, {v[0], 1.1}, path);
  q.push_back(Quantity::le("right_invariance_error", std::abs(wrap_angle(b.angle - a.angle - 1.1)), 1e-12));
}

// ---------------------------------------------------------------------------
// exit-sampling

void run_exit_sampling(const ExperimentConfig& cfg, std::vector<Quantity>& q) {
  const ModelSpace m = cfg.model == ModelKind::Flat ? ModelSpace::flat() : ModelSpace::hyperbolic();
  const Ball ball{ChartPoint{}, cfg.rv()};
  const double w = m.chart_radius(cfg.re()) / m.chart_radius(cfg.rv());
  const ChartPoint off{m.chart_radius(cfg.re()), 0.0};
  const auto n = static_cast<std::size_t>(cfg.n_runs());
  DiffusionConfig dc;
  dc.step = cfg.dt();
  dc.rng_seed = cfg.seed;

  std::vector<double> centre(n), shifted(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    PathRng rng(cfg.seed, i, kPathNoise);
    centre[i] = std::arg(simulate_to_exit(m, {{ChartPoint{}, 0.0}}, ball, dc, rng).frame.base.z);
    PathRng rng2(cfg.seed, kOffCentreStream | i, kPathNoise);
    shifted[i] = std::arg(simulate_to_exit(m, {{off, 0.0}}, ball, dc, rng2).frame.base.z);
  });

  constexpr int kBins = 32;
  std::vector<double> observed(kBins, 0.0), expected(kBins, static_cast<double>(n) / kBins);
  for (double a : centre) {
    int b = static_cast<int>((a + kPi) / (2.0 * kPi) * kBins);
    observed[static_cast<std::size_t>(std::clamp(b, 0, kBins - 1))] += 1.0;
  }
  stats::ChiSquare chi = stats::chi_square(observed, expected);

  // Harmonic measure from the off-centre point: the Poisson kernel of the image disk.
  auto cdf = [w](double phi) { return std::atan((1.0 + w) / (1.0 - w) * std::tan(0.5 * phi)) / kPi + 0.5; };
  double d = stats::ks_statistic(shifted, cdf);
  double ks_p = stats::ks_pvalue(d, n);

  // Density ratio at the nearest and farthest boundary points, from arcs of width 0.2.
  constexpr double kHalfArc = 0.1;
  double near = 0.0, far = 0.0;
  for (double a : shifted) {
    if (std::abs(a) < kHalfArc) near += 1.0;
    if (std::abs(a) > kPi - kHalfArc) far += 1.0;
  }
  const double oracle = std::pow((1.0 + w) / (1.0 - w), 2);
  const double ratio = far > 0.0 ? near / far : std::numeric_limits<double>::infinity();

  q.push_back(Quantity::ge("centre_chi_square_pvalue", chi.pvalue, 1e-3));
  q.push_back(Quantity::info("centre_chi_square_statistic", chi.statistic));
  q.push_back(Quantity::ge("off_centre_ks_pvalue", ks_p, 1e-3));
  q.push_back(Quantity::info("off_centre_ks_statistic", d));
  q.push_back(Quantity::le("antipodal_ratio_relative_error", std::abs(ratio / oracle - 1.0), 0.1));
  q.push_back(Quantity::info("antipodal_ratio", ratio));
  q.push_back(Quantity::info("antipodal_ratio_oracle", oracle));
  q.push_back(Quantity::le("unit_ball_harnack_error", std::abs(base_harnack_bound(ModelSpace::flat(), 0.5, 1.0) - 3.0),
                           1e-9));
}

// ---------------------------------------------------------------------------
// harnack

void run_harnack(const ExperimentConfig& cfg, std::vector<Quantity>& q) {
  const ModelSpace m = cfg.model == ModelKind::Flat ? ModelSpace::flat() : ModelSpace::hyperbolic();
  const double closed = base_harnack_bound(m, cfg.re(), cfg.rv());
  ExitDensityTable table = fit_bundle_table(m, cfg, static_cast<std::size_t>(cfg.n_runs()));
  StarRecurrentFamily fam{cfg.re(), cfg.rv(), 1.0, Level::Bundle};
  q.push_back(Quantity::le("fit_negative_fraction", table.negative_fraction(), 1e-3));
  q.push_back(Quantity::info("raw_bound", table.raw_bound()));
  q.push_back(Quantity::info("harnack_constant", harnack_bound(m, fam, &table)));
  q.push_back(Quantity::info("base_closed_form", closed));
  q.push_back(Quantity::info("harmonics", table.harmonics()));
  if (!m.is_hyperbolic()) {
    // The frame never turns: the fitted bound must reproduce the Poisson one.
    q.push_back(Quantity::le("raw_bound_relative_error", std::abs(table.raw_bound() / closed - 1.0), 0.1));
  } else {
    // Frame-resolved densities dominate the base exit densities.
    q.push_back(Quantity::ge("raw_bound_vs_base", table.raw_bound(), closed));
  }
}

template <class E>
[[noreturn]] void rethrow_as(const E& e, const char* name) {
  throw E(fmt::format("{}: {}", name, e.what()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Names and defaults

const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::FunctionDiscretization: return "function-discretization";
    case Experiment::TensorDiscretization: return "tensor-discretization";
    case Experiment::Holonomy: return "holonomy";
    case Experiment::Transport: return "transport";
    case Experiment::ExitSampling: return "exit-sampling";
    case Experiment::Harnack: return "harnack";
  }
  return "?";
}

std::optional<Experiment> parse_experiment(std::string_view name) {
  for (Experiment e : kAllExperiments) {
    if (name == experiment_name(e)) return e;
  }
  return std::nullopt;
}

Level level_for(Experiment e) {
  return e == Experiment::TensorDiscretization || e == Experiment::Harnack ? Level::Bundle : Level::Base;
}

ExperimentDefaults defaults_for(Experiment e, ModelKind model) {
  const bool flat = model == ModelKind::Flat;
  ExperimentDefaults d;
  if (flat) {
    d = {0.1, 0.2, 1e-3, 10.0, 10000};
  } else if (level_for(e) == Level::Bundle) {
    d = {0.2, 4.5, 1e-2, 20.0, 2000};
  } else {
    d = {0.2, 0.5, 1e-3, 8.0, 10000};
  }
  switch (e) {
    case Experiment::ExitSampling:
      d.runs = 100000;
      if (flat) d.step = 1e-4;
      break;
    case Experiment::Harnack:
      d.runs = 20000;
      break;
    case Experiment::TensorDiscretization:
      if (flat) d.runs = 2000;
      break;
    default:
      break;
  }
  return d;
}

const char* library_version() { return FLS_VERSION; }

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (n_runs() < 1) throw UsageError("runs must be at least 1");
  if (!(dt() > 0.0) || !std::isfinite(dt())) throw UsageError("step must be a positive number");
  if (threads < 1) throw UsageError("threads must be at least 1");
  const ModelSpace m = model == ModelKind::Flat ? ModelSpace::flat() : ModelSpace::hyperbolic();
  const DeckGroup group = DeckGroup::for_model(m);
  try {
    StarRecurrentFamily{re(), rv(), 1.0, level_for(experiment)}.validate(group);
  } catch (const ContractError& e) {
    throw UsageError(fmt::format("invalid radii r_E = {}, r_V = {} on the {} cover: {}", re(), rv(), m.name(), e.what()));
  }
  if (!(trunc() > rv())) throw UsageError("truncation radius must exceed r_V");
  if (sampler == Sampler::Exact && level_for(experiment) == Level::Bundle) {
    throw UsageError(fmt::format("the exact sampler is not available for {}", experiment_name(experiment)));
  }
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "experiment") {
    auto e = parse_experiment(value);
    if (!e) throw UsageError(fmt::format("unknown experiment '{}'", value));
    cfg.experiment = *e;
  } else if (key == "model") {
    if (value == "flat") {
      cfg.model = ModelKind::Flat;
    } else if (value == "hyperbolic") {
      cfg.model = ModelKind::Hyperbolic;
    } else {
      throw UsageError(fmt::format("unknown model '{}' (flat or hyperbolic)", value));
    }
  } else if (key == "re") {
    cfg.r_E = parse_number<double>(key, value);
  } else if (key == "rv") {
    cfg.r_V = parse_number<double>(key, value);
  } else if (key == "step") {
    cfg.step = parse_number<double>(key, value);
  } else if (key == "runs") {
    cfg.runs = parse_number<std::int64_t>(key, value);
  } else if (key == "truncation") {
    cfg.truncation = parse_number<double>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "sampler") {
    if (value == "stepped") {
      cfg.sampler = Sampler::Stepped;
    } else if (value == "exact") {
      cfg.sampler = Sampler::Exact;
    } else {
      throw UsageError(fmt::format("unknown sampler '{}' (stepped or exact)", value));
    }
  } else if (key == "threads") {
    cfg.threads = parse_number<int>(key, value);
  } else if (key == "out") {
    cfg.out = std::string(value);
  } else if (key == "format") {
    if (value == "json") {
      cfg.format = ReportFormat::Json;
    } else if (value == "csv") {
      cfg.format = ReportFormat::Csv;
    } else {
      throw UsageError(fmt::format("unknown format '{}' (json or csv)", value));
    }
  } else if (key == "timing") {
    if (value == "true" || value == "1") {
      cfg.timing = true;
    } else if (value == "false" || value == "0") {
      cfg.timing = false;
    } else {
      throw UsageError(fmt::format("timing: expected true or false, got '{}'", value));
    }
  } else {
    throw UsageError(fmt::format("unknown configuration key '{}'", key));
  }
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  int line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError(fmt::format("config line {}: expected key = value", line_no));
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot read config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  auto line = [&](const char* k, const std::string& v) { out += fmt::format("{} = {}\n", k, v); };
  line("experiment", experiment_name(cfg.experiment));
  line("model", model_key(cfg.model));
  if (cfg.r_E) line("re", fmt17(*cfg.r_E));
  if (cfg.r_V) line("rv", fmt17(*cfg.r_V));
  if (cfg.step) line("step", fmt17(*cfg.step));
  if (cfg.runs) line("runs", std::to_string(*cfg.runs));
  if (cfg.truncation) line("truncation", fmt17(*cfg.truncation));
  line("seed", std::to_string(cfg.seed));
  line("sampler", sampler_key(cfg.sampler));
  line("threads", std::to_string(cfg.threads));
  if (!cfg.out.empty()) line("out", cfg.out);
  line("format", format_key(cfg.format));
  line("timing", cfg.timing ? "true" : "false");
  return out;
}

// ---------------------------------------------------------------------------
// Quantities and reports

bool relation_holds(Relation r, double value, double budget) {
  switch (r) {
    case Relation::Le: return value <= budget;
    case Relation::Ge: return value >= budget;
    case Relation::Eq: return value == budget;
    case Relation::Info: return true;
  }
  return false;
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::Le: return "le";
    case Relation::Ge: return "ge";
    case Relation::Eq: return "eq";
    case Relation::Info: return "info";
  }
  return "?";
}

Quantity Quantity::le(std::string name, double value, double budget) {
  return {std::move(name), value, budget, Relation::Le, relation_holds(Relation::Le, value, budget)};
}
Quantity Quantity::ge(std::string name, double value, double budget) {
  return {std::move(name), value, budget, Relation::Ge, relation_holds(Relation::Ge, value, budget)};
}
Quantity Quantity::eq(std::string name, double value, double expected) {
  return {std::move(name), value, expected, Relation::Eq, relation_holds(Relation::Eq, value, expected)};
}
Quantity Quantity::info(std::string name, double value) {
  return {std::move(name), value, std::numeric_limits<double>::quiet_NaN(), Relation::Info, true};
}

bool Report::all_pass() const {
  return std::all_of(quantities.begin(), quantities.end(), [](const Quantity& q) { return q.pass; });
}

const Quantity* Report::find(std::string_view name) const {
  for (const auto& q : quantities) {
    if (q.name == name) return &q;
  }
  return nullptr;
}

Report run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Report r;
  r.config = cfg;
  const char* name = experiment_name(cfg.experiment);
  try {
    switch (cfg.experiment) {
      case Experiment::FunctionDiscretization: run_function_discretization(cfg, r.quantities); break;
      case Experiment::TensorDiscretization: run_tensor_discretization(cfg, r.quantities); break;
      case Experiment::Holonomy: run_holonomy(cfg, r.quantities); break;
      case Experiment::Transport: run_transport(cfg, r.quantities); break;
      case Experiment::ExitSampling: run_exit_sampling(cfg, r.quantities); break;
      case Experiment::Harnack: run_harnack(cfg, r.quantities); break;
    }
  } catch (const DomainError& e) {
    rethrow_as(e, name);
  } catch (const ContractError& e) {
    rethrow_as(e, name);
  } catch (const NonconvergenceError& e) {
    rethrow_as(e, name);
  } catch (const ReductionFailure& e) {
    rethrow_as(e, name);
  } catch (const EstimationError& e) {
    rethrow_as(e, name);
  }
  if (cfg.timing) r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

void dump_json(const nlohmann::ordered_json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::number_float: {
      double x = j.get<double>();
      out += std::isfinite(x) ? fmt17(x) : "null";
      break;
    }
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + nlohmann::json(k).dump() + ": ";
        dump_json(v, out, indent + 1);
      }
      out += "\n" + pad + "}";
      break;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += inner;
        dump_json(v, out, indent + 1);
      }
      out += "\n" + pad + "]";
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string report_json(const Report& r) {
  using oj = nlohmann::ordered_json;
  const ExperimentConfig& c = r.config;
  oj config = {{"experiment", experiment_name(c.experiment)},
               {"model", model_key(c.model)},
               {"re", c.re()},
               {"rv", c.rv()},
               {"step", c.dt()},
               {"runs", c.n_runs()},
               {"truncation", c.trunc()},
               {"seed", c.seed},
               {"sampler", sampler_key(c.sampler)}};
  oj quantities = oj::array();
  for (const auto& q : r.quantities) {
    quantities.push_back({{"name", q.name},
                          {"value", q.value},
                          {"budget", q.budget},
                          {"relation", relation_name(q.relation)},
                          {"pass", q.pass}});
  }
  oj provenance = {{"seed", c.seed},
                   {"versions",
                    {{"fls", library_version()},
                     {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                     {"boost", BOOST_LIB_VERSION},
                     {"fmt", std::to_string(FMT_VERSION)}}}};
  if (r.wall_seconds) provenance["wall_seconds"] = *r.wall_seconds;
  oj j = {{"experiment", experiment_name(c.experiment)},
          {"config", config},
          {"quantities", quantities},
          {"all_pass", r.all_pass()},
          {"provenance", provenance}};
  std::string out;
  dump_json(j, out, 0);
  out += "\n";
  return out;
}

std::string report_csv(const Report& r) {
  std::string out = "experiment,quantity,value,budget,pass,seed\n";
  for (const auto& q : r.quantities) {
    out += fmt::format("{},{},{},{},{},{}\n", experiment_name(r.config.experiment), q.name, fmt17(q.value),
                       fmt17(q.budget), q.pass ? "true" : "false", r.config.seed);
  }
  return out;
}

void emit_report(const Report& r, ReportFormat format, const std::string& path) {
  const std::string text = format == ReportFormat::Json ? report_json(r) : report_csv(r);
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw std::runtime_error("failed to write report to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path));
  out << text;
  out.close();
  if (!out) throw std::runtime_error(fmt::format("failed to write report to '{}'", path));
}

}  // namespace fls
