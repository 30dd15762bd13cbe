#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "fls/geometry.hpp"

namespace fls {

/// A deck transformation of the cover: its chart map plus the generator word
/// that produced it. Letters are +-(1..n) for generator i or its inverse.
class DeckElement {
 public:
  DeckElement() = default;
  DeckElement(MobiusMap map, std::vector<int> word) : map_(map), word_(std::move(word)) {}

  const MobiusMap& map() const { return map_; }
  const std::vector<int>& word() const { return word_; }
  bool is_identity_word() const { return word_.empty(); }

  /// this * other (apply other first). Words are freely reduced.
  DeckElement compose(const DeckElement& other) const;
  DeckElement inverse() const;

  /// Lattice translation (flat cover only).
  std::pair<long, long> lattice() const;

 private:
  MobiusMap map_;
  std::vector<int> word_;
};

/// An element of X = pi^{-1}(basepoint): the deck image of the basepoint 0.
struct FiberPoint {
  DeckElement deck;
  ChartPoint coords;

  /// Angle of d(deck) at the basepoint: the representative frame's rotation
  /// against the canonical chart frame at `coords`.
  double representative_angle() const { return std::arg(deck.map().derivative(0.0)); }
};

struct Reduction {
  ChartPoint point;   // in the Dirichlet domain of 0
  DeckElement deck;   // deck(point) = original
};

struct NearestFiber {
  FiberPoint fiber;
  double distance = 0.0;
  /// distance < systole_lower_bound / 2, so `fiber` is certainly the nearest.
  bool unique = true;
};

/// Deck group of one of the built-in covers: Z^2 acting on the plane, or the
/// genus-2 surface group generated by side pairings of the regular octagon
/// with vertex angles pi/4.
class DeckGroup {
 public:
  static DeckGroup for_model(ModelSpace model);

  const ModelSpace& model() const { return model_; }
  /// Generators (not their inverses), in relation order a1, b1, a2, b2 for
  /// the surface group; (1,0), (0,1) for the lattice.
  std::vector<DeckElement> generators() const;
  /// Generators followed by inverses; index i <-> letter +-(i+1).
  const std::vector<DeckElement>& alphabet() const { return alphabet_; }

  DeckElement identity() const { return {}; }
  DeckElement element(const std::vector<int>& word) const;
  DeckElement letter(int l) const;

  /// Half the shortest orbit displacement over generators and length-2 words.
  double systole_lower_bound() const { return systole_; }
  /// Radius of the largest ball about 0 inside the Dirichlet domain.
  double inscribed_radius() const { return inradius_; }

  FiberPoint fiber_point(const DeckElement& d) const;
  FiberPoint basepoint() const { return fiber_point(identity()); }

  /// Greedy Dirichlet descent toward the basepoint.
  Reduction reduce_to_domain(ChartPoint p) const;
  NearestFiber nearest_fiber_point(ChartPoint p) const;

  /// Hyperbolic displacement of a generator (all equal for the octagon group).
  double translation_length(const DeckElement& d) const { return model_.dist(ChartPoint{}, fiber_point(d).coords); }

 private:
  explicit DeckGroup(ModelSpace model);

  ModelSpace model_;
  int n_generators_ = 0;
  std::vector<DeckElement> alphabet_;
  double systole_ = 0.0;
  double inradius_ = 0.0;
};

/// Stable integer labels for orbit points, assigned in insertion order.
/// Label 0 is reserved for the basepoint. Lookups match coordinates within a
/// quarter of the systole bound (hyperbolic) or by lattice pair (flat).
class OrbitDictionary {
 public:
  explicit OrbitDictionary(const DeckGroup& group);

  int label_of(const FiberPoint& q);
  std::optional<int> find(const FiberPoint& q) const;
  const FiberPoint& point(int label) const { return points_.at(static_cast<std::size_t>(label)); }
  std::size_t size() const { return points_.size(); }

 private:
  using Cell = std::pair<std::int64_t, std::int64_t>;
  Cell cell_of(ChartPoint p) const;

  const DeckGroup* group_;
  double match_radius_;
  std::vector<FiberPoint> points_;
  std::map<Cell, std::vector<int>> cells_;
};

/// Per-path cache for nearest-fiber queries along a continuous path: keeps the
/// current Dirichlet cell so most queries cost one Mobius evaluation.
class FiberLocator {
 public:
  explicit FiberLocator(const DeckGroup& group) : group_(&group) {}

  /// Nearest fiber point distance; updates the cached cell.
  double distance_to_fiber(ChartPoint p);
  /// Fiber point of the current cell (valid after distance_to_fiber).
  FiberPoint current_fiber() const { return group_->fiber_point(cell_); }
  const DeckElement& cell() const { return cell_; }

 private:
  const DeckGroup* group_;
  DeckElement cell_;
  MobiusMap cell_inverse_;
};

}  // namespace fls
