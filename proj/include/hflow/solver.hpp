#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hflow/error.hpp"
#include "hflow/geometry.hpp"
#include "hflow/grid.hpp"

namespace hflow {

/// C-infinity monotone step: 0 for s <= 0, 1 for s >= 1, f(s)/(f(s)+f(1-s))
/// with f(s) = exp(-1/s) in between.
inline double smooth_transition(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double f0 = std::exp(-1.0 / s);
  const double f1 = std::exp(-1.0 / (1.0 - s));
  return f0 / (f0 + f1);
}

struct AssemblyOptions {
  /// Width, in shifted u0-value, of both transitions. With width w the exponent
  /// moves from alpha to 1 on u0 in [-1, -1 + w] and the cut-off from 0 to 1 on
  /// u0 in [-2w, -w].
  double transition_width = 0.25;
  /// false forces xi = 0 everywhere (compatibility diagnostic).
  bool cutoff = true;
  /// false gives the unmodified flow: alpha_field = alpha and xi = 0 everywhere.
  bool modified_band = true;
  std::optional<double> c_override;
};

/// Data of the auxiliary initial-boundary-value problem on Q = {u0_raw < a_k}.
/// Fields are shifted by -a_k, so u0 < 0 on INTERIOR. BOUNDARY nodes keep the
/// sampled value u0_raw - a_k in [0, h |Du0|), which is their Dirichlet offset.
struct AuxiliaryProblem {
  DomainMask mask;
  ScalarField u0;
  ScalarField alpha_field;
  ScalarField xi_field;
  ScalarField G0;  ///< speed at t = 0 on INTERIOR, c on BOUNDARY, NaN elsewhere
  double c = 1.0;
  double alpha_target = 1.0;
  double a_k = 0.0;
  AssemblyOptions options;

  const Grid& grid() const noexcept { return u0.grid; }
  int dim() const noexcept { return u0.grid.dim(); }
  double spacing() const noexcept { return u0.grid.spacing(); }
  /// Dirichlet value at a BOUNDARY node.
  double boundary_value(std::size_t node, double t) const noexcept { return u0[node] + c * t; }
};

namespace detail {

struct LocalSpeed {
  double G;       ///< sqrt(1 + |p|^2) H^alpha
  double lambda;  ///< largest eigenvalue of dG/dr
  double H;
};

/// H^alpha together with alpha H^(alpha-1).
inline void power_and_rate(double H, double alpha, double& pw, double& rate) {
  if (alpha == 1.0) {
    pw = H;
    rate = 1.0;
  } else if (alpha == 2.0) {
    pw = H * H;
    rate = 2.0 * H;
  } else if (alpha == 0.5) {
    const double s = std::sqrt(H);
    pw = s;
    rate = 0.5 / s;
  } else {
    pw = std::pow(H, alpha);
    rate = alpha * pw / H;
  }
}

/// Central-difference speed at an interior node. `u` points at the node; sx is
/// the axis-0 stride. Returns H <= 0 unchanged so the caller can report it.
template <int N>
inline LocalSpeed local_speed(const double* u, std::ptrdiff_t sx, double inv2h, double invh2,
                              double alpha) {
  LocalSpeed out;
  double pw = 0.0, rate = 0.0;
  if constexpr (N == 1) {
    const double p = (u[sx] - u[-sx]) * inv2h;
    const double r = (u[sx] - 2.0 * u[0] + u[-sx]) * invh2;
    const double q = 1.0 + p * p;
    const double sq = std::sqrt(q);
    out.H = r / (q * sq);
    if (!(out.H > 0.0)) return {0.0, 0.0, out.H};
    power_and_rate(out.H, alpha, pw, rate);
    out.G = sq * pw;
    out.lambda = rate / q;
  } else {
    const double px = (u[sx] - u[-sx]) * inv2h;
    const double py = (u[1] - u[-1]) * inv2h;
    const double rxx = (u[sx] - 2.0 * u[0] + u[-sx]) * invh2;
    const double ryy = (u[1] - 2.0 * u[0] + u[-1]) * invh2;
    const double rxy = (u[sx + 1] - u[sx - 1] - u[-sx + 1] + u[-sx - 1]) * (0.25 * invh2);
    const double q = 1.0 + px * px + py * py;
    const double sq = std::sqrt(q);
    const double contraction = rxx + ryy - (px * px * rxx + 2.0 * px * py * rxy + py * py * ryy) / q;
    out.H = contraction / sq;
    if (!(out.H > 0.0)) return {0.0, 0.0, out.H};
    power_and_rate(out.H, alpha, pw, rate);
    out.G = sq * pw;
    out.lambda = rate;
  }
  return out;
}

template <class Fn>
decltype(auto) dispatch_dim(int dim, Fn&& fn) {
  if (dim == 1) return fn(std::integral_constant<int, 1>{});
  return fn(std::integral_constant<int, 2>{});
}

inline std::string describe_node(const Grid& grid, std::size_t node) {
  const auto x = grid.position(node);
  std::string s = "node " + std::to_string(node) + " at x=" + std::to_string(x[0]);
  if (grid.dim() == 2) s += ", y=" + std::to_string(x[1]);
  return s;
}

}  // namespace detail

/// Builds the auxiliary problem for the cut height a_k. `u0_raw.grid` is the
/// computational grid.
inline AuxiliaryProblem assemble_aux_problem(const ScalarField& u0_raw, double a_k, double alpha,
                                             const AssemblyOptions& options = {}) {
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be positive");
  if (!(options.transition_width > 0.0) || options.transition_width > 1.0 / 3.0)
    fail(ErrorCode::InvalidArgument, "transition_width must lie in (0, 1/3]");
  const Grid& grid = u0_raw.grid;
  for (std::size_t n = 0; n < grid.size(); ++n)
    if (grid.on_frame(n) && u0_raw[n] <= a_k)
      fail(ErrorCode::NotCompact,
           "{u0 <= " + std::to_string(a_k) + "} touches the grid frame at " +
               detail::describe_node(grid, n));

  AuxiliaryProblem P;
  P.mask = sublevel_mask(u0_raw, a_k);
  P.alpha_target = alpha;
  P.a_k = a_k;
  P.options = options;
  P.u0 = ScalarField(grid);
  for (std::size_t n = 0; n < grid.size(); ++n) P.u0[n] = u0_raw[n] - a_k;

  const double width = options.transition_width;
  P.alpha_field = ScalarField(grid, alpha);
  P.xi_field = ScalarField(grid, 0.0);
  if (options.modified_band) {
    for (std::size_t n = 0; n < grid.size(); ++n) {
      const double v = P.u0[n];
      P.alpha_field[n] = 1.0 + (alpha - 1.0) * smooth_transition((-v - (1.0 - width)) / width);
      if (options.cutoff) P.xi_field[n] = smooth_transition((v + 2.0 * width) / width);
    }
  }

  P.G0 = ScalarField(grid, kNaN);
  const double h = grid.spacing();
  const double inv2h = 0.5 / h, invh2 = 1.0 / (h * h);
  const auto sx = grid.stride(0);
  double min_G0 = std::numeric_limits<double>::infinity();
  detail::dispatch_dim(grid.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    for (std::size_t n : P.mask.interior) {
      const auto s = detail::local_speed<N>(&P.u0.values[n], sx, inv2h, invh2, P.alpha_field[n]);
      if (!(s.H > 0.0))
        fail(ErrorCode::NotMeanConvex, "H[u0] = " + std::to_string(s.H) + " at " +
                                           detail::describe_node(grid, n));
      P.G0[n] = s.G;
      min_G0 = std::min(min_G0, s.G);
    }
  });
  P.c = options.c_override ? *options.c_override : std::min(1.0, min_G0);
  if (!(P.c > 0.0)) fail(ErrorCode::InvalidArgument, "boundary speed c must be positive");
  for (std::size_t n : P.mask.boundary) P.G0[n] = P.c;
  return P;
}

/// Solution snapshot with derived fields. w is set on INTERIOR and BOUNDARY;
/// H, A2 and udot on INTERIOR (udot is c on BOUNDARY). Everything else is NaN.
struct GraphState {
  ScalarField u;
  double t = 0.0;
  Derivatives derivatives;
  std::vector<double> w;
  std::vector<double> H;
  std::vector<double> A2;
  std::vector<double> udot;
};

/// Right-hand side G(D^2u, Du, x) - xi (G0 - c) on INTERIOR, c on BOUNDARY,
/// NaN on EXTERIOR.
inline ScalarField rhs(const ScalarField& u, double t, const AuxiliaryProblem& P) {
  const Grid& grid = P.grid();
  ScalarField out(grid, kNaN);
  const double h = grid.spacing();
  const double inv2h = 0.5 / h, invh2 = 1.0 / (h * h);
  const auto sx = grid.stride(0);
  detail::dispatch_dim(grid.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    for (std::size_t n : P.mask.interior) {
      const auto s = detail::local_speed<N>(&u.values[n], sx, inv2h, invh2, P.alpha_field[n]);
      if (!(s.H > 0.0))
        fail(ErrorCode::NonpositiveH, "H = " + std::to_string(s.H) + " at t=" + std::to_string(t) +
                                          ", " + detail::describe_node(grid, n));
      out[n] = s.G - P.xi_field[n] * (P.G0[n] - P.c);
    }
  });
  for (std::size_t n : P.mask.boundary) out[n] = P.c;
  return out;
}

inline ScalarField rhs(const GraphState& state, const AuxiliaryProblem& P) {
  return rhs(state.u, state.t, P);
}

/// Computes the cached fields of a state. With `with_rhs` the speed is
/// evaluated too, which throws NONPOSITIVE_H; without it udot stays NaN.
inline GraphState make_state(const AuxiliaryProblem& P, ScalarField u, double t,
                             bool with_rhs = true) {
  GraphState s;
  s.t = t;
  s.u = std::move(u);
  s.derivatives = differentiate(s.u, P.mask);
  const std::size_t size = P.grid().size();
  s.w.assign(size, kNaN);
  s.H.assign(size, kNaN);
  s.A2.assign(size, kNaN);
  const auto& d = s.derivatives;
  auto fill = [&](auto dim_tag, std::size_t n, bool with_hessian) {
    constexpr int N = decltype(dim_tag)::value;
    Vector<N> p{};
    for (int i = 0; i < N; ++i) p[i] = d.grad[i][n];
    s.w[n] = gradient_function<N>(p);
    if (!with_hessian) return;
    Matrix<N> r{};
    if constexpr (N == 1) {
      r[0][0] = d.hess[0][n];
    } else {
      r = {{{d.hess[0][n], d.hess[1][n]}, {d.hess[1][n], d.hess[2][n]}}};
    }
    const auto sff = second_fundamental<N>(r, p);
    s.H[n] = sff.H;
    s.A2[n] = sff.A2;
  };
  detail::dispatch_dim(P.dim(), [&](auto dim_tag) {
    for (std::size_t n : P.mask.interior) fill(dim_tag, n, true);
    for (std::size_t n : P.mask.boundary) fill(dim_tag, n, false);
  });
  s.udot = with_rhs ? rhs(s.u, t, P).values : std::vector<double>(size, kNaN);
  return s;
}

/// Which diffusion bound limits the explicit step.
enum class StabilityBound {
  /// Exact dG/dr = alpha H^(alpha-1) g^{ij}.
  Jacobian,
  /// alpha H^(alpha-1) / w g^{ij}, larger by 1/w; gives smaller steps.
  Parabolicity,
};

/// Largest eigenvalue of the chosen bound over INTERIOR.
inline double max_diffusion(const ScalarField& u, const AuxiliaryProblem& P,
                            StabilityBound bound = StabilityBound::Jacobian) {
  const Grid& grid = P.grid();
  const double h = grid.spacing();
  const double inv2h = 0.5 / h, invh2 = 1.0 / (h * h);
  const auto sx = grid.stride(0);
  double lambda_max = 0.0;
  detail::dispatch_dim(grid.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    for (std::size_t n : P.mask.interior) {
      const auto s = detail::local_speed<N>(&u.values[n], sx, inv2h, invh2, P.alpha_field[n]);
      if (!(s.H > 0.0))
        fail(ErrorCode::NonpositiveH, "H = " + std::to_string(s.H) + " at " +
                                          detail::describe_node(grid, n));
      double lam = s.lambda;
      if (bound == StabilityBound::Parabolicity) {
        // Both matrices share the eigenvectors of g^{ij}; the ratio is 1/w.
        double p2 = 0.0;
        for (int a = 0; a < N; ++a) {
          const auto st = grid.stride(a);
          const double pa = (u[n + st] - u[n - st]) * inv2h;
          p2 += pa * pa;
        }
        lam *= std::sqrt(1.0 + p2);
      }
      lambda_max = std::max(lambda_max, lam);
    }
  });
  return lambda_max;
}

/// safety * h^2 / (2 n lambda_max).
inline double stable_dt(const ScalarField& u, const AuxiliaryProblem& P, double safety,
                        StabilityBound bound = StabilityBound::Jacobian) {
  if (!(safety > 0.0) || safety > 1.0)
    fail(ErrorCode::SafetyOutOfRange, "safety must lie in (0, 1], got " + std::to_string(safety));
  const double h = P.spacing();
  return safety * h * h / (2.0 * P.dim() * max_diffusion(u, P, bound));
}

inline double stable_dt(const GraphState& state, const AuxiliaryProblem& P, double safety,
                        StabilityBound bound = StabilityBound::Jacobian) {
  return stable_dt(state.u, P, safety, bound);
}

/// One forward Euler step. dt must not exceed stable_dt at safety 1.
inline GraphState time_step(const GraphState& state, const AuxiliaryProblem& P, double dt) {
  if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "dt must be positive");
  const double limit = stable_dt(state, P, 1.0);
  if (dt > limit * (1.0 + 1e-12))
    fail(ErrorCode::DtTooLarge,
         "dt=" + std::to_string(dt) + " exceeds the stable step " + std::to_string(limit));
  const ScalarField f = rhs(state, P);
  ScalarField u = state.u;
  for (std::size_t n : P.mask.interior) u[n] += dt * f[n];
  const double t = state.t + dt;
  for (std::size_t n : P.mask.boundary) u[n] = P.boundary_value(n, t);
  return make_state(P, std::move(u), t);
}

struct StepRecord {
  double t = 0.0;  ///< time at the start of the step
  double dt = 0.0;
  double udot_min = 0.0;  ///< over INTERIOR
  double udot_max = 0.0;
};

/// Extremes over all accepted steps.
struct StepSummary {
  std::size_t count = 0;
  double dt_min = std::numeric_limits<double>::infinity();
  double dt_max = 0.0;
  double udot_min = std::numeric_limits<double>::infinity();
  double udot_max = -std::numeric_limits<double>::infinity();

  void add(const StepRecord& r) {
    ++count;
    dt_min = std::min(dt_min, r.dt);
    dt_max = std::max(dt_max, r.dt);
    udot_min = std::min(udot_min, r.udot_min);
    udot_max = std::max(udot_max, r.udot_max);
  }
};

struct EvolveOptions {
  double t_end = 0.0;
  double safety = 0.9;
  /// Snapshot every `cadence` steps; 0 disables step-count snapshots.
  int cadence = 0;
  /// Extra snapshot times in (0, t_end]. Steps are shortened to land on them.
  std::vector<double> schedule{};
  /// Keep every StepRecord, not only the summary.
  bool record_steps = false;
};

struct Trajectory {
  std::string label;
  AuxiliaryProblem problem;
  std::vector<GraphState> snapshots;
  StepSummary summary;
  std::vector<StepRecord> steps;
  double safety = 0.9;
  int cadence = 0;
};

/// Raised when the flow loses mean convexity mid-run. Carries the last valid
/// state for a diagnostic snapshot.
class EvolveAbort : public Error {
 public:
  EvolveAbort(const std::string& detail, GraphState last, std::size_t node)
      : Error(ErrorCode::NonpositiveH, detail), last_state(std::move(last)), node(node) {}

  GraphState last_state;
  std::size_t node;
};

/// Forward Euler with adaptive stable steps until t_end. Snapshots at t = 0,
/// t_end, every `cadence` steps and at each scheduled time.
inline Trajectory evolve(const AuxiliaryProblem& P, const EvolveOptions& opts) {
  if (!(opts.t_end >= 0.0)) fail(ErrorCode::InvalidArgument, "t_end must be >= 0");
  if (!(opts.safety > 0.0) || opts.safety > 1.0)
    fail(ErrorCode::SafetyOutOfRange,
         "safety must lie in (0, 1], got " + std::to_string(opts.safety));
  if (opts.cadence < 0) fail(ErrorCode::InvalidArgument, "cadence must be >= 0");

  Trajectory traj;
  traj.problem = P;
  traj.safety = opts.safety;
  traj.cadence = opts.cadence;

  std::vector<double> targets;
  for (double s : opts.schedule)
    if (s > 0.0 && s < opts.t_end) targets.push_back(s);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  targets.push_back(opts.t_end);

  ScalarField u = P.u0;
  double t = 0.0;
  traj.snapshots.push_back(make_state(P, u, t));
  if (opts.t_end == 0.0) return traj;

  const Grid& grid = P.grid();
  const double h = grid.spacing();
  const double inv2h = 0.5 / h, invh2 = 1.0 / (h * h);
  const double dt_scale = opts.safety * h * h / (2.0 * grid.dim());
  const auto sx = grid.stride(0);
  const auto& interior = P.mask.interior;
  std::vector<double> forcing(interior.size());
  std::vector<double> alpha(interior.size());
  for (std::size_t k = 0; k < interior.size(); ++k) {
    const std::size_t n = interior[k];
    forcing[k] = P.xi_field[n] * (P.G0[n] - P.c);
    alpha[k] = P.alpha_field[n];
  }
  std::vector<double> f(interior.size());

  std::size_t target = 0;
  std::size_t step = 0;
  detail::dispatch_dim(grid.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    while (target < targets.size()) {
      StepRecord rec;
      rec.t = t;
      rec.udot_min = std::numeric_limits<double>::infinity();
      rec.udot_max = -std::numeric_limits<double>::infinity();
      double lambda_max = 0.0;
      const double* base = u.values.data();
      for (std::size_t k = 0; k < interior.size(); ++k) {
        const auto s = detail::local_speed<N>(base + interior[k], sx, inv2h, invh2, alpha[k]);
        if (!(s.H > 0.0))
          throw EvolveAbort("H = " + std::to_string(s.H) + " at t=" + std::to_string(t) + ", " +
                                detail::describe_node(grid, interior[k]),
                            make_state(P, u, t, false), interior[k]);
        const double v = s.G - forcing[k];
        f[k] = v;
        rec.udot_min = std::min(rec.udot_min, v);
        rec.udot_max = std::max(rec.udot_max, v);
        lambda_max = std::max(lambda_max, s.lambda);
      }
      double dt = dt_scale / lambda_max;
      const double remaining = targets[target] - t;
      bool hit = false;
      if (dt >= remaining * (1.0 - 1e-12)) {
        dt = remaining;
        hit = true;
      }
      for (std::size_t k = 0; k < interior.size(); ++k) u[interior[k]] += dt * f[k];
      t = hit ? targets[target] : t + dt;
      for (std::size_t n : P.mask.boundary) u[n] = P.boundary_value(n, t);
      rec.dt = dt;
      traj.summary.add(rec);
      if (opts.record_steps) traj.steps.push_back(rec);
      ++step;
      const bool cadence_hit = opts.cadence > 0 && step % static_cast<std::size_t>(opts.cadence) == 0;
      if (hit) ++target;
      if (hit || cadence_hit) traj.snapshots.push_back(make_state(P, u, t));
    }
  });
  return traj;
}

/// Discrete compatibility at the corner t = 0, boundary.
struct CompatibilityReport {
  std::size_t cutoff_nodes = 0;  ///< INTERIOR nodes with xi = 1
  double order01 = 0.0;          ///< max |rhs - c| on {xi = 1} at t = 0
  double band_mismatch = 0.0;    ///< max |rhs - c| on INTERIOR nodes next to BOUNDARY at t = 0
  double drift = 0.0;            ///< max |rhs(t = dt) - rhs(0)| on {xi = 1} after one step
  double dt = 0.0;
  /// band_mismatch at round-off: boundary and interior speeds agree at t = 0.
  bool compatible = false;
};

inline CompatibilityReport compatibility_report(const AuxiliaryProblem& P, double safety = 0.9) {
  CompatibilityReport r;
  const ScalarField f0 = rhs(P.u0, 0.0, P);
  const Grid& grid = P.grid();
  for (std::size_t n : P.mask.interior) {
    if (P.xi_field[n] == 1.0) {
      ++r.cutoff_nodes;
      r.order01 = std::max(r.order01, std::abs(f0[n] - P.c));
    }
    bool near = false;
    detail::for_each_stencil_neighbor(grid, n, [&](std::size_t m) {
      if (P.mask.is_boundary(m)) near = true;
    });
    if (near) r.band_mismatch = std::max(r.band_mismatch, std::abs(f0[n] - P.c));
  }
  r.compatible = r.band_mismatch <= 1e-13 * std::max(1.0, P.c);
  const GraphState s0 = make_state(P, P.u0, 0.0);
  r.dt = stable_dt(s0, P, safety);
  const GraphState s1 = time_step(s0, P, r.dt);
  for (std::size_t n : P.mask.interior)
    if (P.xi_field[n] == 1.0) r.drift = std::max(r.drift, std::abs(s1.udot[n] - f0[n]));
  return r;
}

}  // namespace hflow
