#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hflow/curve_lab.hpp"
#include "hflow/error.hpp"
#include "hflow/field_io.hpp"
#include "hflow/grid.hpp"

namespace hflow {

/// Symmetric lattice {-m h, ..., m h}^n; always contains the origin.
inline Grid symmetric_grid(int dim, double h, int m) {
  if (m < 1) fail(ErrorCode::DegenerateBox, "symmetric grid needs at least one cell per side");
  return Grid(dim, {-m * h, dim == 2 ? -m * h : 0.0}, h, {2 * m + 1, 2 * m + 1});
}

/// -log cos x on the nodes k h with |k h| < pi/2.
inline ScalarField grim_reaper_initial(double h) {
  if (!(h > 0.0)) fail(ErrorCode::NonpositiveSpacing, "h must be positive");
  const double half = 0.5 * std::numbers::pi;
  int m = static_cast<int>(std::floor(half / h));
  while (m * h >= half * (1.0 - 1e-12)) --m;
  return sample(symmetric_grid(1, h, m), [](double x, double) { return grim_reaper(x, 0.0); });
}

/// |x|^2 / 2 on [-L, L]^2 (L rounded up to a multiple of h).
inline ScalarField paraboloid_initial(double h, double half_width) {
  if (!(h > 0.0)) fail(ErrorCode::NonpositiveSpacing, "h must be positive");
  const int m = static_cast<int>(std::ceil(half_width / h * (1.0 - 1e-12)));
  return sample(symmetric_grid(2, h, m), [](double x, double y) { return 0.5 * (x * x + y * y); });
}

/// Closed-form mean curvature of the paraboloid |x|^2/2 at radius r.
inline double paraboloid_mean_curvature(double r) {
  return (2.0 + r * r) / std::pow(1.0 + r * r, 1.5);
}

/// Translator profile on nodes |k h| <= x_max + pad, which must stay before the
/// blow-up of the profile.
inline ScalarField translator_initial(double alpha, double h, double x_max, double tol,
                                      double pad = 0.0025) {
  if (!(h > 0.0)) fail(ErrorCode::NonpositiveSpacing, "h must be positive");
  const int m = static_cast<int>(std::floor((x_max + pad) / h * (1.0 + 1e-12)));
  const Grid grid = symmetric_grid(1, h, m);
  std::vector<double> xs(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) xs[n] = grid.position(n)[0];
  const auto v = translator_values(alpha, xs, tol);
  ScalarField u(grid);
  for (std::size_t n = 0; n < grid.size(); ++n) u[n] = v[n][0];
  return u;
}

/// Profile height at x_max.
inline double translator_height(double alpha, double x_max, double tol) {
  return translator_values(alpha, {x_max}, tol)[0][0];
}

}  // namespace hflow
