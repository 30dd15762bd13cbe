#pragma once

#include <Eigen/Dense>
#include <functional>

#include "fls/bundle.hpp"

namespace fls {

/// Tangent vector to the frame bundle in coordinates (x, y, theta).
using BundleVector = Eigen::Vector3d;
using BundleVectorField = std::function<BundleVector(const Frame&)>;

/// Standard horizontal field H_i (i = 1, 2): base part sigma(e_i), angle part
/// the connection rotation along it.
BundleVectorField standard_horizontal(const ModelSpace& m, int i);

/// Connection form with values in so(2), as the coefficient of the rotation
/// generator: omega(X) = rate(X_base) - X_theta. Horizontal vectors give 0.
double connection_form(const ModelSpace& m, const Frame& f, const BundleVector& x);

/// Vertical projection v(X) = (0, 0, -omega(X)).
BundleVector vertical_part(const ModelSpace& m, const Frame& f, const BundleVector& x);

/// Lie bracket [X, Y] = DY X - DX Y, Jacobians by Richardson-extrapolated
/// central differences with step h.
BundleVector bracket(const BundleVectorField& X, const BundleVectorField& Y, const Frame& f, double h);
BundleVectorField bracket_field(BundleVectorField X, BundleVectorField Y, double h);

/// Omega(H_v, H_w) = -omega([H_v, H_w]) with bracket step 1e-4.
double curvature_form(const ModelSpace& m, const Frame& f, int v, int w);

/// Omega(X, Y) from the curl of the connection 1-form on the base, computed
/// as circulation around a chart square of side h. Independent of brackets.
double curvature_from_circulation(const ModelSpace& m, const Frame& f, const BundleVector& x, const BundleVector& y,
                                  double h = 1e-3);

/// Numerical rank (relative 1e-6) of {H_1, H_2} and their brackets up to `depth` (<= 2).
int bracket_span_dim(const ModelSpace& m, const Frame& f, int depth);

/// Residual of U_k...U_1 Omega(X, Y) = -omega(v[U_k, ... v[X, Y]...]) for
/// k in {0, 1}, with X, Y combinations of H_1, H_2 with smooth multipliers
/// and U_1 = H_1.
double verify_vertical_identity(const ModelSpace& m, const Frame& f, int k);

/// Dimension of the span of omega over bracket expressions up to depth 2.
int infinitesimal_holonomy_dim(const ModelSpace& m, const Frame& f);

}  // namespace fls
