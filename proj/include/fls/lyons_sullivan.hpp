#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fls/bundle.hpp"
#include "fls/covering.hpp"

namespace fls {

enum class Level { Base, Bundle };

/// Radii and rejection constant of the lifted star-recurrent family: E_x and
/// V_x are the metric balls of radius r_E < r_V about each fiber point.
struct StarRecurrentFamily {
  double r_E = 0.0;
  double r_V = 0.0;
  double C = 1.0;
  Level level = Level::Base;

  /// E_x must be pairwise disjoint with a unique nearest fiber point
  /// (r_E < systole/2). At the base level V_x is also kept below systole/2;
  /// the bundle level may use overlapping V_x.
  void validate(const DeckGroup& group) const;
};

/// Harnack bound for exits from a ball of radius r_V started in the
/// concentric ball of radius r_E: sup of P(0, z) / P(y, z) over the Poisson
/// kernel of the conformal image disk, (rho_V + rho_E) / (rho_V - rho_E).
double base_harnack_bound(const ModelSpace& m, double r_E, double r_V);

/// d eps_c / d eps_y at z for exits from the ball V centred at c: the Poisson
/// kernel ratio 1 / P(w, zeta) in the conformal image disk. Throws
/// ContractError when z is not on the boundary within 1e-5.
double base_density_ratio(const ModelSpace& m, const Ball& v, ChartPoint y, ChartPoint z);

/// Fitted exit densities from the ball B(0, r_V) for the horizontal diffusion,
/// as functions on the boundary torus (exit angle phi, frame angle psi).
///
/// Started from (s, 0) with frame angle 0, the density is q_s(phi, psi); the
/// law from any other start (y, theta) is q_|y|(phi - arg y, psi - theta) by
/// rotation symmetry and right invariance. q_s is tabulated on a uniform grid
/// of s in [0, r_E] as a truncated Fourier series. On the flat model the frame
/// never turns and only phi is fitted.
class ExitDensityTable {
 public:
  struct Options {
    int harmonics = 4;
    std::size_t samples = 100000;
    int radial_points = 5;
    DiffusionConfig diffusion{.step = 1e-3};
    std::uint64_t seed = 0;
    int threads = 1;
    /// Fraction of negative grid values tolerated (then clamped).
    double negative_tolerance = 1e-3;
    /// Frame angle of the start states; samples are recorded relative to it.
    double start_angle = 0.0;
  };

  static ExitDensityTable fit(const ModelSpace& m, double r_E, double r_V, const Options& opt);

  bool frame_resolved() const { return frame_resolved_; }
  int harmonics() const { return harmonics_; }
  std::size_t samples_per_point() const { return samples_; }
  double r_E() const { return r_E_; }
  double r_V() const { return r_V_; }

  /// q_s(phi, psi), linear in s between grid points, floored at kDensityFloor.
  double density(double s, double phi, double psi) const;
  /// Ratio of exit densities from the centre (frame angle 0) and from the
  /// local state (y, theta) at the local exit (phi, psi), clamped to [1e-6, 1e6].
  double ratio(Complex y, double theta, double phi, double psi) const;
  /// max q_0 / min_s min q_s over the evaluation grid.
  double raw_bound() const { return raw_bound_; }
  /// Fraction of evaluation-grid values that came out non-positive.
  double negative_fraction() const { return negative_fraction_; }

  static constexpr double kDensityFloor = 1e-6;
  static constexpr int kGrid = 64;

 private:
  struct Series {
    // coefficient (k, l) at index (k + K) * (2K + 1) + (l + K); complex stored as re/im.
    std::vector<double> re;
    std::vector<double> im;
  };
  double eval(const Series& s, double phi, double psi) const;

  bool frame_resolved_ = true;
  int harmonics_ = 4;
  std::size_t samples_ = 0;
  double r_E_ = 0.0;
  double r_V_ = 0.0;
  std::vector<double> grid_s_;
  std::vector<Series> series_;
  double raw_bound_ = 1.0;
  double negative_fraction_ = 0.0;
};

/// Safety factor applied to empirical (bundle-level) Harnack bounds.
inline constexpr double kHarnackSafety = 2.0;

/// Base level: closed form. Bundle level: kHarnackSafety * table.raw_bound().
double harnack_bound(const ModelSpace& m, const StarRecurrentFamily& family, const ExitDensityTable* table);

enum class Sampler {
  /// Geodesic Markov chain with bisection at every stopping time.
  Stepped,
  /// Base level only: hits of E by walk on spheres, exits by the Poisson
  /// kernel. Exact in law up to the 1e-6 hitting shell; times are not tracked.
  Exact,
};

struct ChainConfig {
  DiffusionConfig diffusion{.step = 1e-3};
  /// Runs whose path leaves B(start, truncation_radius) are counted as escaped.
  double truncation_radius = 8.0;
  /// Number of acceptances N_1 < ... < N_k to record.
  int acceptances = 1;
  Sampler sampler = Sampler::Stepped;
};

struct Stage {
  int n = 0;
  double T = 0.0;      // hitting time of E
  double tau = 0.0;    // exit time from V_{X_n}
  FiberPoint X;
  HorizontalState Y;   // state at T_n
  HorizontalState Z;   // state at tau_n
  double U = 0.0;
  double threshold = 0.0;  // (1/C) * density ratio
  bool accepted = false;
};

struct ChainRecord {
  /// Exit time from V_x when the chain starts at a fiber point, else 0.
  double tau0 = 0.0;
  std::vector<Stage> stages;
  /// Indices into `stages` of the accepted stages, in order.
  std::vector<std::size_t> accepted;
  bool escaped = false;
  bool timed = true;

  const FiberPoint& accepted_point(std::size_t k) const { return stages.at(accepted.at(k)).X; }
};

/// The acceptance-rejection chain on the cover (Base) or on the holonomy
/// bundle (Bundle).
class LyonsSullivanChain {
 public:
  /// `table` is required at the bundle level and ignored at the base level.
  LyonsSullivanChain(const DeckGroup& group, StarRecurrentFamily family, const ExitDensityTable* table = nullptr);

  const DeckGroup& group() const { return *group_; }
  const StarRecurrentFamily& family() const { return family_; }

  /// Representative frame of a fiber point: the deck image of the reference
  /// frame (angle 0) at the basepoint.
  HorizontalState representative(const FiberPoint& x) const;

  /// d eps_x / d eps_y at the exit z from V_x. Base: exact Poisson ratio.
  /// Bundle: ratio of fitted densities, clamped to [1e-6, 1e6].
  double density_ratio(const FiberPoint& x, const HorizontalState& y, const HorizontalState& z) const;

  ChainRecord run(const HorizontalState& start, const ChainConfig& cfg, std::uint64_t seed,
                  std::uint64_t chain_index) const;

 private:
  const DeckGroup* group_;
  StarRecurrentFamily family_;
  const ExitDensityTable* table_;
};

struct TransitionEntry {
  int label = 0;
  FiberPoint point;
  std::int64_t count = 0;
  double frequency = 0.0;
  double se = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct TransitionEstimate {
  FiberPoint source;
  int source_label = 0;
  std::vector<TransitionEntry> entries;  // sorted by label
  std::int64_t total_runs = 0;
  std::int64_t escaped_runs = 0;
  double escaped_mass = 0.0;
  // Acceptance diagnostics.
  std::int64_t stages = 0;
  std::int64_t threshold_violations = 0;
  double min_threshold = 0.0;
  double max_threshold = 0.0;

  double acceptance_rate() const {
    return stages > 0 ? static_cast<double>(total_runs - escaped_runs) / static_cast<double>(stages) : 0.0;
  }
  const TransitionEntry* find(int label) const;
};

/// Empirical law of X_{N_1} over n_runs independent chains from the
/// representative state at x. Labels come from `dict` and are assigned in
/// chain-index order, so the estimate is independent of `threads`.
TransitionEstimate estimate_transitions(const LyonsSullivanChain& chain, const FiberPoint& x, std::int64_t n_runs,
                                        const ChainConfig& cfg, std::uint64_t seed, int threads,
                                        OrbitDictionary& dict);

struct ResidualResult {
  double residual = 0.0;
  double error_budget = 0.0;
  double standard_error = 0.0;
  double mean = 0.0;
};

/// |h(x) - sum_y p(x, y) h(y)| against 3 SE + escaped_mass * sup|h|.
ResidualResult discretization_residual(const std::function<double(ChartPoint)>& h, double sup_abs_h,
                                       const TransitionEstimate& est);

}  // namespace fls
