#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "json.hpp"

#include "fls/covering.hpp"
#include "fls/lyons_sullivan.hpp"
#include "fls/tensor.hpp"

namespace fls {

/// A linear isometry T_{source}M -> T_{target}M between fiber points,
/// written in the canonical chart orthonormal frames at both ends.
struct Isometry {
  int source_label = 0;
  int target_label = 0;
  FiberPoint source;
  FiberPoint target;
  Eigen::Matrix2d matrix = Eigen::Matrix2d::Identity();

  static Isometry identity(int label, const FiberPoint& p) { return {label, label, p, p, Eigen::Matrix2d::Identity()}; }
  /// Throws ContractError unless the matrix is orthogonal within 1e-10.
  void check() const;
};

/// eta o sigma; requires target(sigma) = source(eta).
Isometry compose(const Isometry& sigma, const Isometry& eta);
Isometry invert(const Isometry& sigma);

/// Transports a tensor given in the representative frame at source(sigma) to
/// the representative frame at target(sigma).
TensorValue apply_to_tensor(const Isometry& sigma, const TensorValue& value);

/// Representative frame at a fiber point: deck image of the reference frame.
Frame representative_frame(const FiberPoint& p);

struct WalkStep {
  Isometry isometry;
  double probability = 0.0;
};

struct WalkFromSource {
  FiberPoint source;
  std::vector<WalkStep> steps;
  double escaped_mass = 0.0;
};

/// mu_x as a list of (isometry, probability) per source label.
struct RandomWalkFamily {
  std::map<int, WalkFromSource> sources;

  /// Probabilities nonnegative, summing with the escaped mass to 1 within 1e-12.
  void check() const;
};

/// Tensor components in the representative frame at each stored fiber point.
struct TensorFieldOnX {
  Valence valence;
  std::map<int, TensorValue> components;
  std::map<int, FiberPoint> points;

  /// Restricts a chart tensor field to the given labelled fiber points.
  static TensorFieldOnX restrict(const ModelSpace& m, const ChartTensorField& tau,
                                 const std::map<int, FiberPoint>& points);
};

struct HarmonicResidual {
  double residual = 0.0;
  /// escaped_mass * (|tau_x| + max |tau_t|), reported alongside.
  double escaped_slack = 0.0;
};

/// max-norm of (sum mu) tau_x - sum mu(sigma) sigma^{-1} tau_{t(sigma)}.
HarmonicResidual mu_harmonic_residual(const TensorFieldOnX& tau, const RandomWalkFamily& mu, int x);

/// One isometry per (source, target): v o u^{-1} for the representative
/// frames u, v, weighted by the estimated transition frequency.
RandomWalkFamily build_groupoid_walk(const std::vector<TransitionEstimate>& estimates);

void to_json(nlohmann::json& j, const RandomWalkFamily& f);
void to_json(nlohmann::json& j, const TensorFieldOnX& t);
/// Fiber points are rebuilt from their deck words with `group`.
RandomWalkFamily walk_from_json(const nlohmann::json& j, const DeckGroup& group);
TensorFieldOnX tensor_field_from_json(const nlohmann::json& j, const DeckGroup& group);

}  // namespace fls
