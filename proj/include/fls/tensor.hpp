#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fls/bundle.hpp"
#include "fls/geometry.hpp"

namespace fls {

/// r upper and s lower indices.
struct Valence {
  int r = 0;
  int s = 0;
  int order() const { return r + s; }
  friend bool operator==(const Valence&, const Valence&) = default;
};

/// Components of an (r, s) tensor on a 2-dimensional space, upper indices
/// first, row-major: component (i_1, ..., i_n) sits at sum i_k 2^(n-k).
struct TensorValue {
  Valence valence;
  std::vector<double> c;

  TensorValue() : c(1, 0.0) {}
  explicit TensorValue(Valence v) : valence(v), c(std::size_t{1} << v.order(), 0.0) {}
  TensorValue(Valence v, std::vector<double> comps);

  static TensorValue scalar(double x) { return TensorValue(Valence{0, 0}, {x}); }
  /// Euclidean metric components delta_ij (valence (0,2)).
  static TensorValue euclidean_metric() { return TensorValue(Valence{0, 2}, {1.0, 0.0, 0.0, 1.0}); }
  /// Unit area form eps_12 = 1 (valence (0,2)).
  static TensorValue area_form() { return TensorValue(Valence{0, 2}, {0.0, 1.0, -1.0, 0.0}); }

  std::size_t size() const { return c.size(); }
  double max_abs() const;

  TensorValue& operator+=(const TensorValue& o);
  TensorValue& operator*=(double a);
  friend TensorValue operator-(TensorValue a, const TensorValue& b);
  friend TensorValue operator*(double a, TensorValue t) { return t *= a; }
};

/// Pushes a tensor through the invertible linear map Q: upper indices by Q,
/// lower indices by Q^{-T}.
TensorValue apply_linear(const Eigen::Matrix2d& q, const TensorValue& t);

using ChartTensorField = std::function<TensorValue(ChartPoint)>;

/// Chart matrix S whose columns are the frame vectors sigma(e_1), sigma(e_2).
Eigen::Matrix2d frame_matrix(const ModelSpace& m, const Frame& f);
/// Rotation by `angle`.
Eigen::Matrix2d rotation_matrix(double angle);

/// F_tau(sigma) = sigma^{-1} tau(pi(sigma)): chart components read in the frame.
TensorValue scalarize(const ModelSpace& m, const ChartTensorField& tau, const Frame& f);

/// Levi-Civita covariant derivative in the chart; the new lower index is
/// appended last. Derivatives by 4th-order central differences with step h.
ChartTensorField covariant_derivative(const ModelSpace& m, ChartTensorField tau, double h = 1e-3);
/// Rough Laplacian trace(nabla^2 tau), chart components.
ChartTensorField covariant_laplacian(const ModelSpace& m, const ChartTensorField& tau, double h = 1e-3);

/// Sum over i of the second difference of F along the horizontal geodesic
/// flow of H_i with time step t: (F(phi_t) - 2F + F(phi_{-t})) / t^2.
TensorValue horizontal_laplacian_fd(const ModelSpace& m, const std::function<TensorValue(const Frame&)>& F,
                                    const Frame& f, double t);

}  // namespace fls
