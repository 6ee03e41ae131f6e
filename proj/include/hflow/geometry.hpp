#pragma once

#include <array>
#include <cmath>
#include <string>

#include "hflow/error.hpp"

namespace hflow {

template <int N>
using Vector = std::array<double, N>;

/// Dense N x N matrix, row-major. Used for symmetric quantities only.
template <int N>
using Matrix = std::array<std::array<double, N>, N>;

template <int N>
Matrix<N> identity_matrix() {
  Matrix<N> m{};
  for (int i = 0; i < N; ++i) m[i][i] = 1.0;
  return m;
}

template <int N>
double squared_norm(const Vector<N>& p) {
  double s = 0.0;
  for (double v : p) s += v * v;
  return s;
}

template <int N>
double trace(const Matrix<N>& m) {
  double s = 0.0;
  for (int i = 0; i < N; ++i) s += m[i][i];
  return s;
}

template <int N>
Matrix<N> multiply(const Matrix<N>& a, const Matrix<N>& b) {
  Matrix<N> c{};
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

template <int N>
Matrix<N> scaled(const Matrix<N>& m, double s) {
  Matrix<N> out = m;
  for (auto& row : out)
    for (double& v : row) v *= s;
  return out;
}

/// Eigenvalues (ascending) of a symmetric matrix with N <= 2.
template <int N>
std::array<double, 2> symmetric_eigenvalues(const Matrix<N>& m) {
  static_assert(N == 1 || N == 2);
  if constexpr (N == 1) {
    return {m[0][0], m[0][0]};
  } else {
    const double mean = 0.5 * (m[0][0] + m[1][1]);
    const double half_diff = 0.5 * (m[0][0] - m[1][1]);
    const double radius = std::hypot(half_diff, m[0][1]);
    return {mean - radius, mean + radius};
  }
}

/// H^alpha with exact shortcuts for the exponents the corpus uses most.
inline double curvature_power(double H, double alpha) {
  if (alpha == 1.0) return H;
  if (alpha == 2.0) return H * H;
  if (alpha == 0.5) return std::sqrt(H);
  return std::pow(H, alpha);
}

/// w = <nu, e_{n+1}> = 1 / sqrt(1 + |p|^2).
template <int N>
double gradient_function(const Vector<N>& p) {
  return 1.0 / std::sqrt(1.0 + squared_norm<N>(p));
}

/// Inverse induced metric g^{ij} = delta_ij - p_i p_j / (1 + |p|^2).
template <int N>
Matrix<N> inverse_metric(const Vector<N>& p) {
  const double denom = 1.0 + squared_norm<N>(p);
  Matrix<N> g = identity_matrix<N>();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) g[i][j] -= p[i] * p[j] / denom;
  return g;
}

/// Mean curvature of graph u at a point with Du = p, D^2u = r:
/// H = w * g^{ij} r_ij, the pointwise form of div(Du / sqrt(1 + |Du|^2)).
template <int N>
double mean_curvature(const Matrix<N>& r, const Vector<N>& p) {
  const double p2 = squared_norm<N>(p);
  const double w = 1.0 / std::sqrt(1.0 + p2);
  double contraction = 0.0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      contraction += ((i == j ? 1.0 : 0.0) - p[i] * p[j] / (1.0 + p2)) * r[i][j];
  return w * contraction;
}

template <int N>
struct SecondFundamentalForm {
  Matrix<N> h;      ///< h_ij = w r_ij
  Matrix<N> g_inv;  ///< g^{ij}
  double H = 0.0;   ///< g^{ij} h_ij
  double A2 = 0.0;  ///< g^{ik} g^{jl} h_ij h_kl
};

template <int N>
SecondFundamentalForm<N> second_fundamental(const Matrix<N>& r, const Vector<N>& p) {
  SecondFundamentalForm<N> s;
  const double w = gradient_function<N>(p);
  s.h = scaled<N>(r, w);
  s.g_inv = inverse_metric<N>(p);
  const Matrix<N> shape = multiply<N>(s.g_inv, s.h);  // h^i_j
  s.H = trace<N>(shape);
  s.A2 = trace<N>(multiply<N>(shape, shape));
  return s;
}

/// Pointwise geometry of the graph: slope, curvature of u, and the derived
/// surface quantities.
template <int N>
struct GeometricPoint {
  Vector<N> p{};
  Matrix<N> r{};
  double w = 1.0;
  double H = 0.0;
  double A2 = 0.0;
  Vector<N + 1> nu{};  ///< upward unit normal (-p, 1) w
};

template <int N>
GeometricPoint<N> evaluate_point(const Matrix<N>& r, const Vector<N>& p) {
  GeometricPoint<N> g;
  g.p = p;
  g.r = r;
  g.w = gradient_function<N>(p);
  const auto sff = second_fundamental<N>(r, p);
  g.H = sff.H;
  g.A2 = sff.A2;
  for (int i = 0; i < N; ++i) g.nu[i] = -p[i] * g.w;
  g.nu[N] = g.w;
  return g;
}

/// G(r, p, alpha) = sqrt(1 + |p|^2) H^alpha, the graphical normal speed.
/// Loss of mean convexity is reported, never clamped.
template <int N>
double speed_G(const Matrix<N>& r, const Vector<N>& p, double alpha) {
  const double H = mean_curvature<N>(r, p);
  if (!(H > 0.0)) fail(ErrorCode::NonpositiveH, "mean curvature " + std::to_string(H) + " <= 0");
  return std::sqrt(1.0 + squared_norm<N>(p)) * curvature_power(H, alpha);
}

template <int N>
struct ParabolicityBounds {
  Matrix<N> M{};
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// The ellipticity matrix alpha H^{alpha-1} / w (delta - p p^T / (1 + |p|^2)).
/// Because dH/dr = w g^{ij}, this bounds the true derivative dG/dr (see
/// speed_jacobian) from above by the factor 1/w.
template <int N>
ParabolicityBounds<N> parabolicity(const Matrix<N>& r, const Vector<N>& p, double alpha) {
  const double H = mean_curvature<N>(r, p);
  if (!(H > 0.0)) fail(ErrorCode::NonpositiveH, "mean curvature " + std::to_string(H) + " <= 0");
  const double w = gradient_function<N>(p);
  const double factor = alpha * curvature_power(H, alpha - 1.0) / w;
  ParabolicityBounds<N> out;
  out.M = scaled<N>(inverse_metric<N>(p), factor);
  const auto ev = symmetric_eigenvalues<N>(out.M);
  out.lambda_min = ev[0];
  out.lambda_max = ev[1];
  return out;
}

/// Exact derivative dG/dr_ij = alpha H^{alpha-1} g^{ij}. Its largest
/// eigenvalue is the diffusion coefficient that limits explicit time steps.
template <int N>
ParabolicityBounds<N> speed_jacobian(const Matrix<N>& r, const Vector<N>& p, double alpha) {
  const double H = mean_curvature<N>(r, p);
  if (!(H > 0.0)) fail(ErrorCode::NonpositiveH, "mean curvature " + std::to_string(H) + " <= 0");
  const double factor = alpha * curvature_power(H, alpha - 1.0);
  ParabolicityBounds<N> out;
  out.M = scaled<N>(inverse_metric<N>(p), factor);
  const auto ev = symmetric_eigenvalues<N>(out.M);
  out.lambda_min = ev[0];
  out.lambda_max = ev[1];
  return out;
}

}  // namespace hflow
