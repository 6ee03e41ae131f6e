#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hflow/error.hpp"

namespace hflow {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Axis-aligned box in R^n, n in {1, 2}. Unused upper components are ignored.
struct Box {
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{0.0, 0.0};
};

/// Uniform Cartesian lattice. Nodes sit at origin + i*spacing along each axis;
/// linear node index is row-major with axis 0 slowest.
class Grid {
 public:
  Grid() = default;

  Grid(int dim, std::array<double, 2> origin, double spacing, std::array<int, 2> extents)
      : dim_(dim), origin_(origin), spacing_(spacing), extents_(extents) {
    if (dim != 1 && dim != 2) fail(ErrorCode::InvalidArgument, "grid dimension must be 1 or 2");
    if (!(spacing > 0.0) || !std::isfinite(spacing))
      fail(ErrorCode::NonpositiveSpacing, "grid spacing must be positive");
    if (dim == 1) {
      extents_[1] = 1;
      origin_[1] = 0.0;
    }
    for (int d = 0; d < dim; ++d)
      if (extents_[d] < 3) fail(ErrorCode::DegenerateBox, "need at least 3 nodes per axis");
  }

  int dim() const noexcept { return dim_; }
  double spacing() const noexcept { return spacing_; }
  const std::array<double, 2>& origin() const noexcept { return origin_; }
  const std::array<int, 2>& extents() const noexcept { return extents_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(extents_[0]) * static_cast<std::size_t>(extents_[1]);
  }

  /// Offset between linear indices of neighbours along `axis`.
  std::ptrdiff_t stride(int axis) const noexcept { return axis == 0 ? extents_[1] : 1; }

  std::size_t index(int i, int j = 0) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(extents_[1]) +
           static_cast<std::size_t>(j);
  }

  std::array<int, 2> unravel(std::size_t node) const noexcept {
    const auto ny = static_cast<std::size_t>(extents_[1]);
    return {static_cast<int>(node / ny), static_cast<int>(node % ny)};
  }

  double coordinate(int axis, int i) const noexcept { return origin_[axis] + spacing_ * i; }

  std::array<double, 2> position(std::size_t node) const noexcept {
    const auto ij = unravel(node);
    return {coordinate(0, ij[0]), dim_ == 2 ? coordinate(1, ij[1]) : 0.0};
  }

  bool on_frame(std::size_t node) const noexcept {
    const auto ij = unravel(node);
    for (int d = 0; d < dim_; ++d)
      if (ij[d] == 0 || ij[d] == extents_[d] - 1) return true;
    return false;
  }

  /// True if moving `offset` steps along `axis` from `node` stays on the lattice.
  bool has_neighbor(std::size_t node, int axis, int offset) const noexcept {
    const int k = unravel(node)[axis] + offset;
    return k >= 0 && k < extents_[axis];
  }

  bool operator==(const Grid& other) const noexcept {
    return dim_ == other.dim_ && origin_ == other.origin_ && spacing_ == other.spacing_ &&
           extents_ == other.extents_;
  }

 private:
  int dim_ = 1;
  std::array<double, 2> origin_{0.0, 0.0};
  double spacing_ = 1.0;
  std::array<int, 2> extents_{3, 1};
};

/// Lattice covering `bounds` with the given spacing. Per axis the node count is
/// ceil(side / spacing) + 1, so the last node may sit slightly past the box.
inline Grid build_grid(const Box& bounds, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    fail(ErrorCode::NonpositiveSpacing, "spacing must be > 0, got " + std::to_string(spacing));
  if (bounds.dim != 1 && bounds.dim != 2)
    fail(ErrorCode::InvalidArgument, "box dimension must be 1 or 2");
  std::array<int, 2> extents{1, 1};
  for (int d = 0; d < bounds.dim; ++d) {
    const double side = bounds.hi[d] - bounds.lo[d];
    if (!(side > 0.0) || !std::isfinite(side))
      fail(ErrorCode::DegenerateBox, "box side along axis " + std::to_string(d) + " is not positive");
    // Absorb round-off so that side/spacing landing a hair above an integer
    // does not add a node.
    const double cells = std::ceil(side / spacing * (1.0 - 1e-12));
    extents[d] = static_cast<int>(cells) + 1;
  }
  return Grid(bounds.dim, {bounds.lo[0], bounds.dim == 2 ? bounds.lo[1] : 0.0}, spacing, extents);
}

/// One scalar per lattice node.
struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(Grid g, double fill = 0.0) : grid(std::move(g)), values(grid.size(), fill) {}
  ScalarField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size())
      fail(ErrorCode::InvalidArgument, "field size does not match grid");
  }

  double operator[](std::size_t i) const noexcept { return values[i]; }
  double& operator[](std::size_t i) noexcept { return values[i]; }
  std::size_t size() const noexcept { return values.size(); }
};

/// Samples f(x, y) at every node (y = 0 in 1D).
template <class F>
ScalarField sample(const Grid& grid, F&& f) {
  ScalarField out(grid);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const auto x = grid.position(n);
    out[n] = f(x[0], x[1]);
  }
  return out;
}

enum class NodeClass : unsigned char { Interior, Boundary, Exterior };

/// Classification of lattice nodes into the discrete domain {u0 < level}, its
/// Dirichlet band, and the rest.
struct DomainMask {
  Grid grid;
  double level = 0.0;
  std::vector<NodeClass> classes;
  std::vector<std::size_t> interior;
  std::vector<std::size_t> boundary;

  NodeClass at(std::size_t node) const noexcept { return classes[node]; }
  bool is_interior(std::size_t node) const noexcept { return classes[node] == NodeClass::Interior; }
  bool is_boundary(std::size_t node) const noexcept { return classes[node] == NodeClass::Boundary; }
  bool is_active(std::size_t node) const noexcept { return classes[node] != NodeClass::Exterior; }

  /// INTERIOR followed by BOUNDARY nodes.
  std::vector<std::size_t> active_nodes() const {
    std::vector<std::size_t> out = interior;
    out.insert(out.end(), boundary.begin(), boundary.end());
    return out;
  }
};

namespace detail {

template <class Visit>
void for_each_stencil_neighbor(const Grid& grid, std::size_t node, Visit&& visit) {
  const auto ij = grid.unravel(node);
  const int jlo = grid.dim() == 2 ? -1 : 0;
  const int jhi = grid.dim() == 2 ? 1 : 0;
  for (int di = -1; di <= 1; ++di)
    for (int dj = jlo; dj <= jhi; ++dj) {
      if (di == 0 && dj == 0) continue;
      const int i = ij[0] + di;
      const int j = ij[1] + dj;
      if (i < 0 || i >= grid.extents()[0] || j < 0 || j >= grid.extents()[1]) continue;
      visit(grid.index(i, j));
    }
}

}  // namespace detail

/// INTERIOR = {u0 < a}; BOUNDARY = non-interior nodes in the 3x3 (or 3-point)
/// stencil of an interior node; everything else EXTERIOR.
inline DomainMask sublevel_mask(const ScalarField& u0, double a) {
  const Grid& grid = u0.grid;
  DomainMask mask;
  mask.grid = grid;
  mask.level = a;
  mask.classes.assign(grid.size(), NodeClass::Exterior);
  for (std::size_t n = 0; n < grid.size(); ++n)
    if (u0[n] < a) {
      if (grid.on_frame(n))
        fail(ErrorCode::NotCompact, "sublevel set {u0 < " + std::to_string(a) +
                                        "} reaches the grid frame");
      mask.classes[n] = NodeClass::Interior;
      mask.interior.push_back(n);
    }
  if (mask.interior.empty())
    fail(ErrorCode::EmptyDomain, "no node satisfies u0 < " + std::to_string(a));
  for (std::size_t n : mask.interior)
    detail::for_each_stencil_neighbor(grid, n, [&](std::size_t m) {
      if (mask.classes[m] == NodeClass::Exterior) mask.classes[m] = NodeClass::Boundary;
    });
  for (std::size_t n = 0; n < grid.size(); ++n)
    if (mask.classes[n] == NodeClass::Boundary) mask.boundary.push_back(n);
  return mask;
}

/// Gradient and Hessian fields. Hessian components are stored as (xx, xy, yy);
/// in 1D only xx is used. Entries that cannot be formed are NaN.
struct Derivatives {
  int dim = 1;
  std::array<std::vector<double>, 2> grad;
  std::array<std::vector<double>, 3> hess;
};

namespace detail {

inline bool usable(const ScalarField& u, const DomainMask& mask, std::size_t node, int axis,
                   int offset) {
  if (!u.grid.has_neighbor(node, axis, offset)) return false;
  const auto m = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) +
                                          offset * u.grid.stride(axis));
  return mask.is_active(m) && std::isfinite(u[m]);
}

inline double at_offset(const ScalarField& u, std::size_t node, int axis, int offset) {
  return u[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) +
                                    offset * u.grid.stride(axis))];
}

}  // namespace detail

/// Central second-order differences on INTERIOR nodes. On BOUNDARY nodes the
/// gradient uses one-sided differences into the active region (second order
/// when two active nodes are available, first order otherwise); the Hessian
/// there is left NaN.
inline Derivatives differentiate(const ScalarField& u, const DomainMask& mask) {
  const Grid& grid = u.grid;
  const int dim = grid.dim();
  const double h = grid.spacing();
  const std::size_t size = grid.size();
  Derivatives d;
  d.dim = dim;
  for (int a = 0; a < dim; ++a) d.grad[a].assign(size, kNaN);
  for (int k = 0; k < (dim == 2 ? 3 : 1); ++k) d.hess[k].assign(size, kNaN);

  for (std::size_t n : mask.interior) {
    const double c = u[n];
    for (int a = 0; a < dim; ++a) {
      const double up = detail::at_offset(u, n, a, 1);
      const double dn = detail::at_offset(u, n, a, -1);
      d.grad[a][n] = (up - dn) / (2.0 * h);
      d.hess[a == 0 ? 0 : 2][n] = (up - 2.0 * c + dn) / (h * h);
    }
    if (dim == 2) {
      const auto sx = grid.stride(0);
      const auto s = static_cast<std::ptrdiff_t>(n);
      auto v = [&](std::ptrdiff_t off) { return u[static_cast<std::size_t>(s + off)]; };
      d.hess[1][n] = (v(sx + 1) - v(sx - 1) - v(-sx + 1) + v(-sx - 1)) / (4.0 * h * h);
    }
  }

  for (std::size_t n : mask.boundary) {
    for (int a = 0; a < dim; ++a) {
      const bool fwd = detail::usable(u, mask, n, a, 1);
      const bool bwd = detail::usable(u, mask, n, a, -1);
      if (fwd && bwd) {
        d.grad[a][n] = (detail::at_offset(u, n, a, 1) - detail::at_offset(u, n, a, -1)) / (2.0 * h);
        continue;
      }
      const int s = fwd ? 1 : (bwd ? -1 : 0);
      if (s == 0) continue;
      const double u0 = u[n];
      const double u1 = detail::at_offset(u, n, a, s);
      if (detail::usable(u, mask, n, a, 2 * s)) {
        const double u2 = detail::at_offset(u, n, a, 2 * s);
        d.grad[a][n] = s * (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h);
      } else {
        d.grad[a][n] = s * (u1 - u0) / h;
      }
    }
  }
  return d;
}

}  // namespace hflow
