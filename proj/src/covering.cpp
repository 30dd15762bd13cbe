#include "fls/covering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace fls {

namespace {

constexpr int kReductionCap = 10000;
constexpr double kDescentMargin = 1e-12;

void append_reduced(std::vector<int>& word, const std::vector<int>& tail) {
  for (int l : tail) {
    if (!word.empty() && word.back() == -l) {
      word.pop_back();
    } else {
      word.push_back(l);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DeckElement

DeckElement DeckElement::compose(const DeckElement& other) const {
  std::vector<int> w = word_;
  append_reduced(w, other.word_);
  return {map_ * other.map_, std::move(w)};
}

DeckElement DeckElement::inverse() const {
  std::vector<int> w(word_.rbegin(), word_.rend());
  for (int& l : w) l = -l;
  return {map_.inverse(), std::move(w)};
}

std::pair<long, long> DeckElement::lattice() const {
  MobiusMap n = map_.normalized();
  Complex t = n.b() / n.d();
  return {std::lround(t.real()), std::lround(t.imag())};
}

// ---------------------------------------------------------------------------
// DeckGroup

DeckGroup DeckGroup::for_model(ModelSpace model) { return DeckGroup(model); }

DeckGroup::DeckGroup(ModelSpace model) : model_(model) {
  std::vector<MobiusMap> gens;
  if (model.is_hyperbolic()) {
    // Octagon inradius for interior angle pi/4: cosh r = cot(pi/8) = 1 + sqrt 2.
    const double inradius = std::acosh(1.0 + std::numbers::sqrt2);
    auto pairing = [&](int k) {
      return MobiusMap::hyperbolic_translation((k + 2) * std::numbers::pi / 4.0, 2.0 * inradius) *
             MobiusMap::rotation(-std::numbers::pi / 2.0);
    };
    // Side k is glued to side k+2; this assignment satisfies [a1,b1][a2,b2] = 1.
    gens = {pairing(0).inverse(), pairing(1), pairing(4).inverse(), pairing(5)};
  } else {
    gens = {MobiusMap::translation({1.0, 0.0}), MobiusMap::translation({0.0, 1.0})};
  }
  n_generators_ = static_cast<int>(gens.size());
  for (int i = 0; i < n_generators_; ++i) alphabet_.emplace_back(gens[i], std::vector<int>{i + 1});
  for (int i = 0; i < n_generators_; ++i) alphabet_.emplace_back(gens[i].inverse(), std::vector<int>{-(i + 1)});

  const ChartPoint origin{};
  double shortest = std::numeric_limits<double>::infinity();
  double nearest_neighbour = std::numeric_limits<double>::infinity();
  for (const auto& g : alphabet_) {
    double d = model_.dist(origin, g.map()(0.0));
    shortest = std::min(shortest, d);
    nearest_neighbour = std::min(nearest_neighbour, d);
    for (const auto& h : alphabet_) {
      double dd = model_.dist(origin, (g.map() * h.map())(0.0));
      if (dd > 1e-9) shortest = std::min(shortest, dd);
    }
  }
  systole_ = 0.5 * shortest;
  inradius_ = 0.5 * nearest_neighbour;
}

std::vector<DeckElement> DeckGroup::generators() const {
  return {alphabet_.begin(), alphabet_.begin() + n_generators_};
}

DeckElement DeckGroup::letter(int l) const {
  if (l == 0 || std::abs(l) > n_generators_) throw ContractError("letter outside the generator alphabet");
  return alphabet_[static_cast<std::size_t>(l > 0 ? l - 1 : n_generators_ - l - 1)];
}

DeckElement DeckGroup::element(const std::vector<int>& word) const {
  DeckElement out;
  for (int l : word) out = out.compose(letter(l));
  return out;
}

FiberPoint DeckGroup::fiber_point(const DeckElement& d) const { return {d, d.map()(0.0)}; }

Reduction DeckGroup::reduce_to_domain(ChartPoint p) const {
  model_.check(p);
  const ChartPoint origin{};
  Reduction r{p, identity()};
  double current = model_.dist(origin, p);
  for (int iter = 0; iter < kReductionCap; ++iter) {
    std::size_t best = alphabet_.size();
    double best_dist = current - kDescentMargin;
    ChartPoint best_point;
    for (std::size_t i = 0; i < alphabet_.size(); ++i) {
      ChartPoint q = alphabet_[i].map()(r.point.z);
      double d = model_.dist(origin, q);
      if (d < best_dist) {
        best = i;
        best_dist = d;
        best_point = q;
      }
    }
    if (best == alphabet_.size()) return r;
    r.point = best_point;
    r.deck = r.deck.compose(alphabet_[best].inverse());
    current = best_dist;
  }
  throw ReductionFailure("reduce_to_domain: descent did not terminate within 10^4 steps");
}

NearestFiber DeckGroup::nearest_fiber_point(ChartPoint p) const {
  Reduction r = reduce_to_domain(p);
  double d = model_.dist(ChartPoint{}, r.point);
  return {fiber_point(r.deck), d, d < 0.5 * systole_};
}

// ---------------------------------------------------------------------------
// OrbitDictionary

namespace {
constexpr double kCellQuantum = 1e-7;
}

OrbitDictionary::OrbitDictionary(const DeckGroup& group)
    : group_(&group), match_radius_(0.25 * group.systole_lower_bound()) {
  label_of(group.basepoint());
}

OrbitDictionary::Cell OrbitDictionary::cell_of(ChartPoint p) const {
  if (!group_->model().is_hyperbolic()) return {std::llround(p.x()), std::llround(p.y())};
  return {static_cast<std::int64_t>(std::floor(p.x() / kCellQuantum)),
          static_cast<std::int64_t>(std::floor(p.y() / kCellQuantum))};
}

std::optional<int> OrbitDictionary::find(const FiberPoint& q) const {
  Cell c = cell_of(q.coords);
  if (!group_->model().is_hyperbolic()) {
    auto it = cells_.find(c);
    if (it == cells_.end()) return std::nullopt;
    return it->second.front();
  }
  for (std::int64_t dx = -1; dx <= 1; ++dx) {
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      auto it = cells_.find({c.first + dx, c.second + dy});
      if (it == cells_.end()) continue;
      for (int label : it->second) {
        if (group_->model().dist(points_[static_cast<std::size_t>(label)].coords, q.coords) < match_radius_) {
          return label;
        }
      }
    }
  }
  return std::nullopt;
}

int OrbitDictionary::label_of(const FiberPoint& q) {
  if (auto hit = find(q)) return *hit;
  int label = static_cast<int>(points_.size());
  points_.push_back(q);
  cells_[cell_of(q.coords)].push_back(label);
  return label;
}

// ---------------------------------------------------------------------------
// FiberLocator

double FiberLocator::distance_to_fiber(ChartPoint p) {
  const ModelSpace& model = group_->model();
  ChartPoint w = cell_inverse_(p.z);
  if (std::abs(w.z) <= model.chart_radius(group_->inscribed_radius())) {
    return model.dist(ChartPoint{}, w);
  }
  Reduction r = group_->reduce_to_domain(w);
  if (!r.deck.is_identity_word()) {
    cell_ = cell_.compose(r.deck);
    cell_inverse_ = cell_.map().inverse();
  }
  return model.dist(ChartPoint{}, r.point);
}

}  // namespace fls
