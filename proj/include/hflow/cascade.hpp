#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "hflow/error.hpp"
#include "hflow/estimates.hpp"
#include "hflow/field_io.hpp"
#include "hflow/grid.hpp"
#include "hflow/solver.hpp"

namespace hflow {

/// |Du| at every node: central differences inside the lattice, one-sided
/// second order on the frame.
inline ScalarField gradient_norm(const ScalarField& u) {
  const Grid& grid = u.grid;
  const double h = grid.spacing();
  ScalarField out(grid);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    double g2 = 0.0;
    for (int a = 0; a < grid.dim(); ++a) {
      const auto st = grid.stride(a);
      auto at = [&](int k) { return u[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + k * st)]; };
      double d;
      if (grid.has_neighbor(n, a, 1) && grid.has_neighbor(n, a, -1))
        d = (at(1) - at(-1)) / (2.0 * h);
      else if (grid.has_neighbor(n, a, 1))
        d = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      else
        d = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
      g2 += d * d;
    }
    out[n] = std::sqrt(g2);
  }
  return out;
}

/// min |Du0| over nodes next to a crossing of the level set {u0 = a}; +inf if
/// the level is not crossed.
inline double level_band_min_gradient(const ScalarField& u0, const ScalarField& grad_norm, double a) {
  const Grid& grid = u0.grid;
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const double s = u0[n] - a;
    bool crossing = s == 0.0;
    for (int ax = 0; ax < grid.dim() && !crossing; ++ax)
      for (int off : {-1, 1})
        if (grid.has_neighbor(n, ax, off)) {
          const auto m_idx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + off * grid.stride(ax));
          if (s * (u0[m_idx] - a) <= 0.0) crossing = true;
        }
    if (crossing) m = std::min(m, grad_norm[n]);
  }
  return m;
}

/// Heights start + j step, j < count. A height is moved within +-step/4 only if
/// its level band has min |Du0| below half the best available in that range.
inline std::vector<double> select_heights(const ScalarField& u0, int count, double start, double step) {
  if (count < 2) fail(ErrorCode::NeedTwoHeights, "a cascade needs at least two heights");
  if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "height step must be positive");
  const Grid& grid = u0.grid;
  const double top = start + (count - 1) * step + 0.25 * step;
  for (std::size_t n = 0; n < grid.size(); ++n)
    if (grid.on_frame(n) && u0[n] <= top)
      fail(ErrorCode::NotCompact, "{u0 <= " + std::to_string(top) + "} touches the grid frame");

  const ScalarField gn = gradient_norm(u0);
  constexpr int kScan = 20;  // candidates per side
  std::vector<double> heights;
  for (int j = 0; j < count; ++j) {
    const double a = start + j * step;
    const double own = level_band_min_gradient(u0, gn, a);
    double best = own, best_a = a;
    for (int k = 1; k <= kScan; ++k)
      for (int sign : {-1, 1}) {
        const double cand = a + sign * 0.25 * step * k / kScan;
        const double score = level_band_min_gradient(u0, gn, cand);
        // Strict improvement only: ties keep the candidate closest to a.
        if (std::isfinite(score) && (!std::isfinite(best) || score > best)) {
          best = score;
          best_a = cand;
        }
      }
    heights.push_back(std::isfinite(own) && own >= 0.5 * best ? a : best_a);
  }
  return heights;
}

struct ExtendedSnapshot {
  double t = 0.0;
  ScalarField v;                ///< v + a_k on INTERIOR and BOUNDARY, a_k + c t elsewhere
  double boundary_jump = 0.0;   ///< max deviation of BOUNDARY values from the Dirichlet data
  double boundary_offset = 0.0; ///< max |u0_raw - a_k| on BOUNDARY: the lattice's O(h) gap to the level set
  bool discontinuous = false;   ///< boundary_jump > tolerance
};

/// Extension of each snapshot to the whole grid by a_k + c t outside Q_k.
inline std::vector<ExtendedSnapshot> extend_solution(const Trajectory& traj, double c_tol = 10.0) {
  const auto& P = traj.problem;
  const double tol = discretization_slack(P.spacing(), c_tol);
  double offset = 0.0;
  for (std::size_t n : P.mask.boundary) offset = std::max(offset, std::abs(P.u0[n]));
  std::vector<ExtendedSnapshot> out;
  out.reserve(traj.snapshots.size());
  for (const auto& s : traj.snapshots) {
    ExtendedSnapshot e;
    e.t = s.t;
    e.v = ScalarField(P.grid(), P.a_k + P.c * s.t);
    for (std::size_t n : P.mask.interior) e.v[n] = s.u[n] + P.a_k;
    for (std::size_t n : P.mask.boundary) {
      e.v[n] = s.u[n] + P.a_k;
      e.boundary_jump = std::max(e.boundary_jump, std::abs(s.u[n] - P.boundary_value(n, s.t)));
    }
    e.boundary_offset = offset;
    e.discontinuous = e.boundary_jump > tol;
    out.push_back(std::move(e));
  }
  return out;
}

struct CascadeOptions {
  double safety = 0.9;
  /// Shared snapshot times in (0, t_end); t_end is always included.
  std::vector<double> schedule{};
  int workers = 1;
  AssemblyOptions assembly;
  double c_tol = 10.0;
};

struct CascadeResult {
  std::vector<double> heights;
  std::vector<double> c;           ///< per problem
  std::vector<double> times;       ///< shared snapshot times
  std::vector<Trajectory> trajectories;
  std::vector<std::vector<ExtendedSnapshot>> extended;
  double t_end = 0.0;
};

/// Solves one auxiliary problem per height with a shared snapshot schedule and
/// extends each solution to the full grid.
inline CascadeResult run_cascade(const ScalarField& u0, const std::vector<double>& heights,
                                 double alpha, double t_end, const CascadeOptions& opts = {}) {
  if (heights.size() < 2) fail(ErrorCode::NeedTwoHeights, "a cascade needs at least two heights");
  for (std::size_t k = 1; k < heights.size(); ++k)
    if (!(heights[k] > heights[k - 1]))
      fail(ErrorCode::InvalidArgument, "heights must be strictly increasing");

  CascadeResult result;
  result.heights = heights;
  result.t_end = t_end;
  const std::size_t K = heights.size();
  result.trajectories.resize(K);
  result.extended.resize(K);
  result.c.resize(K);

  EvolveOptions eo;
  eo.t_end = t_end;
  eo.safety = opts.safety;
  eo.schedule = opts.schedule;

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::size_t first_error_k = K;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < K; k = next++) {
      try {
        auto P = assemble_aux_problem(u0, heights[k], alpha, opts.assembly);
        auto traj = evolve(P, eo);
        traj.label = "k=" + std::to_string(k) + " a_k=" + format_double(heights[k]);
        result.extended[k] = extend_solution(traj, opts.c_tol);
        result.c[k] = P.c;
        result.trajectories[k] = std::move(traj);
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        // Report the lowest failing k so the message does not depend on scheduling.
        if (k < first_error_k) {
          first_error_k = k;
          first_error = std::make_exception_ptr(
              Error(e.code(), "cascade k=" + std::to_string(k) + " (a_k=" +
                                  format_double(heights[k]) + "): " + e.what()));
        }
      }
    }
  };
  const int nworkers = std::max(1, std::min<int>(opts.workers, static_cast<int>(K)));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nworkers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const auto& s : result.trajectories.front().snapshots) result.times.push_back(s.t);
  return result;
}

/// d_k = sup |v_{k+1} - v_k| over nodes with v_{k+1} < a at snapshot times t <= t_star.
inline std::vector<double> pair_differences(const CascadeResult& result, double a, double t_star) {
  std::vector<double> d;
  for (std::size_t k = 0; k + 1 < result.extended.size(); ++k) {
    const auto& lo = result.extended[k];
    const auto& hi = result.extended[k + 1];
    double m = 0.0;
    for (std::size_t j = 0; j < hi.size() && j < lo.size(); ++j) {
      if (hi[j].t > t_star) continue;
      for (std::size_t n = 0; n < hi[j].v.size(); ++n)
        if (hi[j].v[n] < a) m = std::max(m, std::abs(hi[j].v[n] - lo[j].v[n]));
    }
    d.push_back(m);
  }
  return d;
}

/// max |v_k - exact| over {v_k < a}, t <= t_star, for every k.
template <class Exact>
std::vector<double> oracle_errors(const CascadeResult& result, double a, double t_star, Exact&& exact) {
  std::vector<double> out;
  for (const auto& ext : result.extended) {
    double m = 0.0;
    for (const auto& e : ext) {
      if (e.t > t_star) continue;
      for (std::size_t n = 0; n < e.v.size(); ++n)
        if (e.v[n] < a) {
          const auto x = e.v.grid.position(n);
          m = std::max(m, std::abs(e.v[n] - exact(x[0], x[1], e.t)));
        }
    }
    out.push_back(m);
  }
  return out;
}

struct ConvergenceReport {
  double a = 0.0;
  double t_star = 0.0;
  double tolerance = 0.0;
  std::vector<double> d;           ///< consecutive-pair sup differences
  bool passed = false;             ///< every d_{k+1} <= 0.9 d_k or d_{k+1} < tol
  bool continuous = true;          ///< no DISCONTINUOUS_EXTENSION in any snapshot
  /// Finest extension restricted to {v < a} (NaN elsewhere), one per time <= t_star.
  std::vector<ExtendedSnapshot> limit_candidate;
  /// Node count of {v_finest < a} per time <= t_star.
  std::vector<std::size_t> omega_nodes;
};

inline ConvergenceReport convergence_report(const CascadeResult& result, double a, double t_star,
                                            double c_tol = 10.0) {
  if (result.heights.size() < 2) fail(ErrorCode::NeedTwoHeights, "need two heights");
  const double lowest = *std::min_element(result.heights.begin(), result.heights.end());
  if (!(a < lowest - 2.0))
    fail(ErrorCode::WindowTooHigh, "a = " + std::to_string(a) + " must lie below min height - 2 = " +
                                       std::to_string(lowest - 2.0));
  if (t_star > result.t_end) fail(ErrorCode::InvalidArgument, "t_star exceeds t_end");

  ConvergenceReport rep;
  rep.a = a;
  rep.t_star = t_star;
  const double h = result.trajectories.front().problem.spacing();
  rep.tolerance = discretization_slack(h, c_tol);
  rep.d = pair_differences(result, a, t_star);
  rep.passed = true;
  for (std::size_t k = 1; k < rep.d.size(); ++k)
    if (!(rep.d[k] <= 0.9 * rep.d[k - 1] || rep.d[k] < rep.tolerance)) rep.passed = false;
  if (rep.d.size() == 1) rep.passed = rep.d[0] < rep.tolerance;
  for (const auto& ext : result.extended)
    for (const auto& e : ext)
      if (e.discontinuous) rep.continuous = false;
  for (const auto& e : result.extended.back()) {
    if (e.t > t_star) continue;
    ExtendedSnapshot lim = e;
    std::size_t count = 0;
    for (std::size_t n = 0; n < lim.v.size(); ++n) {
      if (lim.v[n] < a) ++count;
      else lim.v[n] = kNaN;
    }
    rep.limit_candidate.push_back(std::move(lim));
    rep.omega_nodes.push_back(count);
  }
  return rep;
}

/// Aligned columns: k, d_k, a, t_star.
inline void write_convergence_table(std::ostream& out, const ConvergenceReport& rep) {
  out << "# k d_k a t_star\n";
  for (std::size_t k = 0; k < rep.d.size(); ++k)
    out << k << " " << format_double(rep.d[k]) << " " << format_double(rep.a) << " "
        << format_double(rep.t_star) << "\n";
}

inline KeyValues cascade_manifest(const CascadeResult& result) {
  KeyValues kv;
  auto join = [](const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + format_double(xs[i]);
    return s;
  };
  kv.set("heights", join(result.heights));
  kv.set("c", join(result.c));
  kv.set("schedule", join(result.times));
  kv.set("t_end", result.t_end);
  return kv;
}

}  // namespace hflow
