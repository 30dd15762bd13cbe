#include "fls/groupoid.hpp"

#include <cmath>

namespace fls {

void Isometry::check() const {
  if ((matrix.transpose() * matrix - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ContractError("isometry matrix is not orthogonal");
  }
}

Isometry compose(const Isometry& sigma, const Isometry& eta) {
  if (sigma.target_label != eta.source_label) throw ContractError("compose: isometries are not composable");
  return {sigma.source_label, eta.target_label, sigma.source, eta.target, eta.matrix * sigma.matrix};
}

Isometry invert(const Isometry& sigma) {
  return {sigma.target_label, sigma.source_label, sigma.target, sigma.source, sigma.matrix.transpose()};
}

Frame representative_frame(const FiberPoint& p) { return {p.coords, wrap_angle(p.representative_angle())}; }

TensorValue apply_to_tensor(const Isometry& sigma, const TensorValue& value) {
  // Representative frame -> chart frame at the source, across, chart frame ->
  // representative frame at the target.
  Eigen::Matrix2d q = rotation_matrix(-sigma.target.representative_angle()) * sigma.matrix *
                      rotation_matrix(sigma.source.representative_angle());
  return apply_linear(q, value);
}

void RandomWalkFamily::check() const {
  for (const auto& [label, from] : sources) {
    double total = from.escaped_mass;
    for (const auto& st : from.steps) {
      if (st.probability < 0.0) throw ContractError("random walk family: negative probability");
      if (st.isometry.source_label != label) throw ContractError("random walk family: step leaves the wrong source");
      st.isometry.check();
      total += st.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ContractError("random walk family: probabilities do not sum to 1");
  }
}

TensorFieldOnX TensorFieldOnX::restrict(const ModelSpace& m, const ChartTensorField& tau,
                                        const std::map<int, FiberPoint>& points) {
  TensorFieldOnX out;
  out.points = points;
  for (const auto& [label, p] : points) {
    TensorValue v = scalarize(m, tau, representative_frame(p));
    out.valence = v.valence;
    out.components.emplace(label, std::move(v));
  }
  return out;
}

HarmonicResidual mu_harmonic_residual(const TensorFieldOnX& tau, const RandomWalkFamily& mu, int x) {
  auto src = mu.sources.find(x);
  if (src == mu.sources.end()) throw ContractError("mu_harmonic_residual: no walk from this source");
  auto here = tau.components.find(x);
  if (here == tau.components.end()) throw ContractError("mu_harmonic_residual: tensor missing at the source");
  TensorValue acc(tau.valence);
  double mass = 0.0;
  double sup = here->second.max_abs();
  for (const auto& st : src->second.steps) {
    auto there = tau.components.find(st.isometry.target_label);
    if (there == tau.components.end()) throw ContractError("mu_harmonic_residual: tensor missing at a target");
    acc += st.probability * apply_to_tensor(invert(st.isometry), there->second);
    mass += st.probability;
    sup = std::max(sup, there->second.max_abs());
  }
  HarmonicResidual r;
  r.residual = (mass * here->second - acc).max_abs();
  r.escaped_slack = src->second.escaped_mass * (here->second.max_abs() + sup);
  return r;
}

RandomWalkFamily build_groupoid_walk(const std::vector<TransitionEstimate>& estimates) {
  RandomWalkFamily f;
  for (const auto& est : estimates) {
    WalkFromSource& from = f.sources[est.source_label];
    from.source = est.source;
    from.escaped_mass = est.escaped_mass;
    from.steps.clear();
    const double theta_u = est.source.representative_angle();
    for (const auto& e : est.entries) {
      Isometry iso;
      iso.source_label = est.source_label;
      iso.target_label = e.label;
      iso.source = est.source;
      iso.target = e.point;
      iso.matrix = e.label == est.source_label ? Eigen::Matrix2d::Identity()
                                               : rotation_matrix(e.point.representative_angle() - theta_u);
      from.steps.push_back({iso, e.frequency});
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json point_json(int label, const FiberPoint& p) {
  return {{"label", label}, {"word", p.deck.word()}, {"coords", {p.coords.x(), p.coords.y()}}};
}

FiberPoint point_from(const nlohmann::json& j, const DeckGroup& group) {
  return group.fiber_point(group.element(j.at("word").get<std::vector<int>>()));
}

}  // namespace

void to_json(nlohmann::json& j, const RandomWalkFamily& f) {
  j = nlohmann::json::array();
  for (const auto& [label, from] : f.sources) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& st : from.steps) {
      const auto& m = st.isometry.matrix;
      steps.push_back({{"target", point_json(st.isometry.target_label, st.isometry.target)},
                       {"matrix", {m(0, 0), m(0, 1), m(1, 0), m(1, 1)}},
                       {"probability", st.probability}});
    }
    j.push_back({{"source", point_json(label, from.source)}, {"escaped_mass", from.escaped_mass}, {"steps", steps}});
  }
}

void to_json(nlohmann::json& j, const TensorFieldOnX& t) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& [label, v] : t.components) {
    comps.push_back({{"point", point_json(label, t.points.at(label))}, {"components", v.c}});
  }
  j = {{"valence", {t.valence.r, t.valence.s}}, {"values", comps}};
}

RandomWalkFamily walk_from_json(const nlohmann::json& j, const DeckGroup& group) {
  RandomWalkFamily f;
  for (const auto& src : j) {
    int label = src.at("source").at("label").get<int>();
    WalkFromSource& from = f.sources[label];
    from.source = point_from(src.at("source"), group);
    from.escaped_mass = src.at("escaped_mass").get<double>();
    for (const auto& st : src.at("steps")) {
      Isometry iso;
      iso.source_label = label;
      iso.source = from.source;
      iso.target_label = st.at("target").at("label").get<int>();
      iso.target = point_from(st.at("target"), group);
      auto m = st.at("matrix").get<std::vector<double>>();
      if (m.size() != 4) throw ContractError("walk json: matrix needs four entries");
      iso.matrix << m[0], m[1], m[2], m[3];
      from.steps.push_back({iso, st.at("probability").get<double>()});
    }
  }
  return f;
}

TensorFieldOnX tensor_field_from_json(const nlohmann::json& j, const DeckGroup& group) {
  TensorFieldOnX t;
  auto val = j.at("valence").get<std::vector<int>>();
  if (val.size() != 2) throw ContractError("tensor json: valence needs two entries");
  t.valence = {val[0], val[1]};
  for (const auto& v : j.at("values")) {
    int label = v.at("point").at("label").get<int>();
    t.points.emplace(label, point_from(v.at("point"), group));
    t.components.emplace(label, TensorValue(t.valence, v.at("components").get<std::vector<double>>()));
  }
  return t;
}

}  // namespace fls
