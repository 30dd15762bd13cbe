#include "fls/tensor.hpp"

#include <cmath>

namespace fls {

TensorValue::TensorValue(Valence v, std::vector<double> comps) : valence(v), c(std::move(comps)) {
  if (v.r < 0 || v.s < 0 || c.size() != (std::size_t{1} << v.order())) {
    throw ContractError("tensor components do not match the valence");
  }
}

double TensorValue::max_abs() const {
  double m = 0.0;
  for (double x : c) m = std::max(m, std::abs(x));
  return m;
}

TensorValue& TensorValue::operator+=(const TensorValue& o) {
  if (!(o.valence == valence)) throw ContractError("adding tensors of different valence");
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += o.c[i];
  return *this;
}

TensorValue& TensorValue::operator*=(double a) {
  for (double& x : c) x *= a;
  return *this;
}

TensorValue operator-(TensorValue a, const TensorValue& b) {
  a += -1.0 * b;
  return a;
}

namespace {

// Contracts index `pos` (0 = leftmost) of t with matrix a: out_i = a(i, j) t_j.
void mode_product(const Eigen::Matrix2d& a, std::vector<double>& c, int order, int pos) {
  const std::size_t stride = std::size_t{1} << (order - 1 - pos);
  std::vector<double> out(c.size());
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    std::size_t i = (idx / stride) & 1;
    std::size_t base = idx - i * stride;
    out[idx] = a(static_cast<int>(i), 0) * c[base] + a(static_cast<int>(i), 1) * c[base + stride];
  }
  c = std::move(out);
}

// 4th-order central difference of a tensor field along chart direction dir.
TensorValue directional_derivative(const ChartTensorField& f, ChartPoint p, Complex dir, double h) {
  TensorValue a = f(p.z + 2.0 * h * dir);
  TensorValue b = f(p.z + h * dir);
  TensorValue c = f(p.z - h * dir);
  TensorValue d = f(p.z - 2.0 * h * dir);
  TensorValue out(a.valence);
  for (std::size_t i = 0; i < out.size(); ++i) out.c[i] = (-a.c[i] + 8.0 * b.c[i] - 8.0 * c.c[i] + d.c[i]) / (12.0 * h);
  return out;
}

}  // namespace

TensorValue apply_linear(const Eigen::Matrix2d& q, const TensorValue& t) {
  TensorValue out = t;
  const int n = t.valence.order();
  if (n == 0) return out;
  const Eigen::Matrix2d lower = q.inverse().transpose();
  for (int pos = 0; pos < n; ++pos) mode_product(pos < t.valence.r ? q : lower, out.c, n, pos);
  return out;
}

Eigen::Matrix2d rotation_matrix(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

Eigen::Matrix2d frame_matrix(const ModelSpace& m, const Frame& f) {
  return rotation_matrix(f.angle) / m.conformal_factor(f.base);
}

TensorValue scalarize(const ModelSpace& m, const ChartTensorField& tau, const Frame& f) {
  m.check(f.base);
  return apply_linear(frame_matrix(m, f).inverse(), tau(f.base));
}

ChartTensorField covariant_derivative(const ModelSpace& m, ChartTensorField tau, double h) {
  return [m, tau = std::move(tau), h](ChartPoint p) {
    TensorValue t = tau(p);
    const Valence v = t.valence;
    const int n = v.order();
    Valence dv{v.r, v.s + 1};
    TensorValue out(dv);
    Complex grad = m.log_conformal_gradient(p);
    const double dphi[2] = {grad.real(), grad.imag()};
    // Gamma^k_{ij} of the conformal metric lambda^2 delta.
    auto gamma = [&](int k, int i, int j) {
      return (k == i ? dphi[j] : 0.0) + (k == j ? dphi[i] : 0.0) - (i == j ? dphi[k] : 0.0);
    };
    for (int j = 0; j < 2; ++j) {
      TensorValue d = directional_derivative(tau, p, j == 0 ? Complex{1.0, 0.0} : Complex{0.0, 1.0}, h);
      for (std::size_t idx = 0; idx < t.size(); ++idx) {
        double val = d.c[idx];
        for (int pos = 0; pos < n; ++pos) {
          const std::size_t stride = std::size_t{1} << (n - 1 - pos);
          const int a = static_cast<int>((idx / stride) & 1);
          const std::size_t base = idx - static_cast<std::size_t>(a) * stride;
          for (int k = 0; k < 2; ++k) {
            double tk = t.c[base + static_cast<std::size_t>(k) * stride];
            // Upper index a: + Gamma^a_{jk} t^k. Lower index a: - Gamma^k_{ja} t_k.
            val += pos < v.r ? gamma(a, j, k) * tk : -gamma(k, j, a) * tk;
          }
        }
        out.c[idx * 2 + static_cast<std::size_t>(j)] = val;
      }
    }
    return out;
  };
}

ChartTensorField covariant_laplacian(const ModelSpace& m, const ChartTensorField& tau, double h) {
  ChartTensorField second = covariant_derivative(m, covariant_derivative(m, tau, h), h);
  return [m, second](ChartPoint p) {
    TensorValue dd = second(p);
    Valence v{dd.valence.r, dd.valence.s - 2};
    TensorValue out(v);
    double lam = m.conformal_factor(p);
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
      // Trailing indices (j, l) contracted with g^{jl} = delta / lambda^2.
      out.c[idx] = (dd.c[idx * 4 + 0] + dd.c[idx * 4 + 3]) / (lam * lam);
    }
    return out;
  };
}

TensorValue horizontal_laplacian_fd(const ModelSpace& m, const std::function<TensorValue(const Frame&)>& F,
                                    const Frame& f, double t) {
  TensorValue centre = F(f);
  TensorValue out(centre.valence);
  for (int i = 0; i < 2; ++i) {
    Complex dir = i == 0 ? f.e1(m) : f.e2(m);
    TensorValue plus = F(advance_frame(m, f, dir, t));
    TensorValue minus = F(advance_frame(m, f, -dir, t));
    for (std::size_t k = 0; k < out.size(); ++k) out.c[k] += (plus.c[k] - 2.0 * centre.c[k] + minus.c[k]) / (t * t);
  }
  return out;
}

}  // namespace fls
