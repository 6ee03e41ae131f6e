#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "hflow/error.hpp"
#include "hflow/field_io.hpp"
#include "hflow/geometry.hpp"

namespace hflow {

/// Translating solution t - log cos x of the graph flow with alpha = 1.
inline double grim_reaper(double x, double t) {
  if (!(std::abs(x) < 0.5 * std::numbers::pi))
    fail(ErrorCode::OutOfDomain, "grim reaper needs |x| < pi/2, got " + std::to_string(x));
  return t - std::log(std::cos(x));
}

/// Radius of a circle moving inward with speed kappa^alpha.
inline double circle_radius(double alpha, double R0, double t) {
  const double base = std::pow(R0, alpha + 1.0) - (alpha + 1.0) * t;
  if (!(base > 0.0))
    fail(ErrorCode::Extinct, "circle extinct at t=" + std::to_string(t));
  return std::pow(base, 1.0 / (alpha + 1.0));
}

inline double extinction_time(double alpha, double R0) {
  return std::pow(R0, alpha + 1.0) / (alpha + 1.0);
}

namespace detail {

using ProfileState = std::array<double, 2>;  // (phi, phi')

struct TranslatorRhs {
  double exponent;
  void operator()(const ProfileState& s, ProfileState& ds, double) const {
    ds[0] = s[1];
    ds[1] = std::pow(1.0 + s[1] * s[1], exponent);
  }
};

/// Slope beyond which the profile is treated as vertical.
inline constexpr double kBlowupSlope = 1e8;

}  // namespace detail

/// Speed-1 translator profile: phi'' = (1 + phi'^2)^((3 alpha - 1)/(2 alpha)),
/// phi(0) = phi'(0) = 0. The profile is even in x.
struct TranslatorProfile {
  double alpha = 1.0;
  std::vector<double> x;
  std::vector<double> phi;
  std::vector<double> dphi;
  bool blew_up = false;
  double x_end = 0.0;  ///< last integrated abscissa; the blow-up point if blew_up
};

/// Integrates the profile with dense-output Dormand-Prince at absolute and
/// relative tolerance `tol`, evaluating at each |query|. Queries beyond a
/// blow-up are OUT_OF_DOMAIN.
inline std::vector<std::array<double, 2>> translator_values(double alpha,
                                                            const std::vector<double>& queries,
                                                            double tol) {
  namespace ode = boost::numeric::odeint;
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be positive");
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < queries.size(); ++i) order.emplace_back(std::abs(queries[i]), i);
  std::sort(order.begin(), order.end());

  std::vector<std::array<double, 2>> out(queries.size());
  const detail::TranslatorRhs rhs{(3.0 * alpha - 1.0) / (2.0 * alpha)};
  auto stepper = ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<detail::ProfileState>());
  stepper.initialize(detail::ProfileState{0.0, 0.0}, 0.0, 1e-3);
  detail::ProfileState s;
  for (const auto& [xq, idx] : order) {
    while (stepper.current_time() < xq) {
      if (std::abs(stepper.current_state()[1]) > detail::kBlowupSlope ||
          stepper.current_time_step() < 1e-15)
        fail(ErrorCode::OutOfDomain, "translator profile blows up near x=" +
                                         std::to_string(stepper.current_time()));
      stepper.do_step(rhs);
    }
    // Dense output is undefined before the first step.
    if (xq == 0.0) s = {0.0, 0.0};
    else stepper.calc_state(xq, s);
    const double sign = queries[idx] < 0.0 ? -1.0 : 1.0;
    out[idx] = {s[0], sign * s[1]};
  }
  return out;
}

/// Samples the profile every `sample_dx` up to x_max, stopping at blow-up.
inline TranslatorProfile translator_profile(double alpha, double x_max, double tol,
                                            double sample_dx = 1e-3) {
  namespace ode = boost::numeric::odeint;
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be positive");
  TranslatorProfile prof;
  prof.alpha = alpha;
  const detail::TranslatorRhs rhs{(3.0 * alpha - 1.0) / (2.0 * alpha)};
  auto stepper = ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<detail::ProfileState>());
  stepper.initialize(detail::ProfileState{0.0, 0.0}, 0.0, 1e-3);
  detail::ProfileState s;
  for (std::size_t i = 0;; ++i) {
    const double xq = std::min(x_max, static_cast<double>(i) * sample_dx);
    while (stepper.current_time() < xq) {
      if (std::abs(stepper.current_state()[1]) > detail::kBlowupSlope ||
          stepper.current_time_step() < 1e-15) {
        prof.blew_up = true;
        prof.x_end = stepper.current_time();
        return prof;
      }
      stepper.do_step(rhs);
    }
    if (xq == 0.0) s = {0.0, 0.0};
    else stepper.calc_state(xq, s);
    prof.x.push_back(xq);
    prof.phi.push_back(s[0]);
    prof.dphi.push_back(s[1]);
    prof.x_end = xq;
    if (xq >= x_max) return prof;
  }
}

using Point2 = std::array<double, 2>;

/// Polygonal curve moving by X_t = kappa^alpha nu. nu is the left normal of the
/// marker order, so closed curves are counter-clockwise and graph arcs run in
/// increasing x.
struct MarkerCurve {
  std::vector<Point2> points;
  bool closed = true;
  double t = 0.0;
};

/// Discrete geometry per marker.
struct MarkerGeometry {
  std::vector<double> kappa;
  std::vector<Point2> nu;
  std::vector<double> ds;  ///< half the sum of the adjacent chord lengths
};

inline MarkerCurve circle_curve(double R, std::size_t markers) {
  MarkerCurve c;
  c.closed = true;
  for (std::size_t i = 0; i < markers; ++i) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(markers);
    c.points.push_back({R * std::cos(th), R * std::sin(th)});
  }
  return c;
}

/// Grim reaper arc with markers uniform in arclength: x = atan(sinh s) for
/// s in [-s_max, s_max].
inline MarkerCurve grim_reaper_curve(double s_max, std::size_t markers, double t = 0.0) {
  MarkerCurve c;
  c.closed = false;
  c.t = t;
  for (std::size_t i = 0; i < markers; ++i) {
    const double s = -s_max + 2.0 * s_max * static_cast<double>(i) / static_cast<double>(markers - 1);
    const double x = std::atan(std::sinh(s));
    c.points.push_back({x, grim_reaper(x, t)});
  }
  return c;
}

namespace detail {

inline Point2 sub(Point2 a, Point2 b) { return {a[0] - b[0], a[1] - b[1]}; }
inline double norm(Point2 a) { return std::hypot(a[0], a[1]); }

/// Chord-based second difference of a per-marker quantity.
template <class Value>
inline Value second_difference(Value qm, Value q0, Value qp, double dm, double dp);

template <>
inline double second_difference<double>(double qm, double q0, double qp, double dm, double dp) {
  return 2.0 / (dm + dp) * ((qp - q0) / dp - (q0 - qm) / dm);
}

template <>
inline Point2 second_difference<Point2>(Point2 qm, Point2 q0, Point2 qp, double dm, double dp) {
  return {second_difference<double>(qm[0], q0[0], qp[0], dm, dp),
          second_difference<double>(qm[1], q0[1], qp[1], dm, dp)};
}

}  // namespace detail

/// kappa = <X_ss, nu> with X_ss from chord lengths; exact on regular polygons
/// inscribed in a circle. Open-curve endpoints use one-sided tangents and
/// linearly extrapolated kappa.
inline MarkerGeometry marker_geometry(const MarkerCurve& c) {
  const std::size_t N = c.points.size();
  if (N < (c.closed ? 3u : 4u)) fail(ErrorCode::InvalidArgument, "too few markers");
  MarkerGeometry g;
  g.kappa.assign(N, 0.0);
  g.nu.assign(N, {0.0, 0.0});
  g.ds.assign(N, 0.0);
  const auto& P = c.points;
  auto chord = [&](std::size_t i, std::size_t j) { return detail::norm(detail::sub(P[j], P[i])); };
  for (std::size_t i = 0; i < N; ++i) {
    const bool end = !c.closed && (i == 0 || i + 1 == N);
    if (end) continue;
    const std::size_t im = (i + N - 1) % N, ip = (i + 1) % N;
    const double dm = chord(im, i), dp = chord(i, ip);
    const Point2 T = detail::sub(P[ip], P[im]);
    const double tn = detail::norm(T);
    g.nu[i] = {-T[1] / tn, T[0] / tn};
    const Point2 xss = detail::second_difference<Point2>(P[im], P[i], P[ip], dm, dp);
    g.kappa[i] = xss[0] * g.nu[i][0] + xss[1] * g.nu[i][1];
    g.ds[i] = 0.5 * (dm + dp);
  }
  if (!c.closed) {
    for (std::size_t e : {std::size_t{0}, N - 1}) {
      const std::size_t a = e == 0 ? 1 : N - 2, b = e == 0 ? 2 : N - 3;
      const Point2 T = e == 0 ? detail::sub(P[1], P[0]) : detail::sub(P[N - 1], P[N - 2]);
      const double tn = detail::norm(T);
      g.nu[e] = {-T[1] / tn, T[0] / tn};
      g.kappa[e] = 2.0 * g.kappa[a] - g.kappa[b];
      g.ds[e] = 0.5 * tn;
    }
  }
  return g;
}

/// Redistributes markers uniformly in polygon arclength (marker 0 fixed; open
/// curves keep both endpoints).
inline void reparametrize_by_arclength(MarkerCurve& c) {
  const std::size_t N = c.points.size();
  const std::size_t segs = c.closed ? N : N - 1;
  std::vector<double> cum(segs + 1, 0.0);
  for (std::size_t i = 0; i < segs; ++i)
    cum[i + 1] = cum[i] + detail::norm(detail::sub(c.points[(i + 1) % N], c.points[i]));
  const double L = cum.back();
  std::vector<Point2> out(N);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < N; ++k) {
    const double s = L * static_cast<double>(k) / static_cast<double>(c.closed ? N : N - 1);
    while (seg + 1 < segs && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    const Point2 a = c.points[seg], b = c.points[(seg + 1) % N];
    out[k] = {a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])};
  }
  c.points = std::move(out);
}

struct MarkerOptions {
  /// Keep every `snapshot_every`-th output step (the first and last are kept).
  int snapshot_every = 1;
  /// Arclength reparametrization every this many output steps; 0 disables.
  int reparametrize_every = 0;
  /// Fraction of the explicit stability limit used for sub-steps.
  double safety = 0.9;
};

struct MarkerTrajectory {
  double alpha = 1.0;
  double dt = 0.0;  ///< output step
  std::vector<MarkerCurve> snapshots;
  std::size_t substeps_total = 0;
  std::size_t substeps_max = 1;  ///< largest sub-step count within one output step
};

/// Largest stable explicit step ds_min^2 / (2 max alpha kappa^(alpha-1)).
inline double marker_stable_dt(const MarkerGeometry& g, double alpha) {
  double ds_min = std::numeric_limits<double>::infinity(), rate = 0.0;
  for (std::size_t i = 0; i < g.kappa.size(); ++i) {
    ds_min = std::min(ds_min, g.ds[i]);
    rate = std::max(rate, alpha * std::pow(g.kappa[i], alpha - 1.0));
  }
  return ds_min * ds_min / (2.0 * rate);
}

/// Advances `steps` output steps of size dt. Each output step is split into
/// equal sub-steps below the stability limit, so dt is a sampling interval.
inline MarkerTrajectory evolve_markers(MarkerCurve curve, double alpha, double dt, int steps,
                                       const MarkerOptions& opts = {}) {
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be positive");
  if (!(dt > 0.0) || steps < 0) fail(ErrorCode::InvalidArgument, "need dt > 0 and steps >= 0");
  if (opts.snapshot_every < 1) fail(ErrorCode::InvalidArgument, "snapshot_every must be >= 1");
  MarkerTrajectory traj;
  traj.alpha = alpha;
  traj.dt = dt;
  const double t0 = curve.t;
  auto check = [&](const MarkerGeometry& g) {
    for (std::size_t i = 0; i < g.kappa.size(); ++i)
      if (!(g.kappa[i] > 0.0))
        fail(ErrorCode::NonpositiveKappa, "kappa = " + std::to_string(g.kappa[i]) + " at marker " +
                                              std::to_string(i) + ", t=" + std::to_string(curve.t));
  };
  check(marker_geometry(curve));
  traj.snapshots.push_back(curve);
  for (int step = 1; step <= steps; ++step) {
    auto g = marker_geometry(curve);
    const double limit = opts.safety * marker_stable_dt(g, alpha);
    const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / limit)));
    const double sub = dt / static_cast<double>(m);
    for (std::size_t k = 0; k < m; ++k) {
      if (k > 0) g = marker_geometry(curve);
      check(g);
      for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const double v = sub * std::pow(g.kappa[i], alpha);
        curve.points[i][0] += v * g.nu[i][0];
        curve.points[i][1] += v * g.nu[i][1];
      }
    }
    traj.substeps_total += m;
    traj.substeps_max = std::max(traj.substeps_max, m);
    curve.t = t0 + dt * step;
    if (opts.reparametrize_every > 0 && step % opts.reparametrize_every == 0)
      reparametrize_by_arclength(curve);
    if (step % opts.snapshot_every == 0 || step == steps) traj.snapshots.push_back(curve);
  }
  check(marker_geometry(curve));
  return traj;
}

/// Mean distance of markers from the origin.
inline double mean_radius(const MarkerCurve& c) {
  double s = 0.0;
  for (const auto& p : c.points) s += detail::norm(p);
  return s / static_cast<double>(c.points.size());
}

/// Identity residuals, each the max |L q - rhs| over interior markers and
/// intermediate snapshots, with L q = q_t / (alpha H^(alpha-1)) - q_ss.
struct IdentityResiduals {
  double w = 0.0;        ///< L w = kappa^2 w
  double speed = 0.0;    ///< L kappa^alpha = kappa^2 kappa^alpha
  double height = 0.0;   ///< L X^2 = (1 - alpha)/alpha kappa w
  double curvature = 0.0;  ///< L kappa^2 = 2(alpha-2) kappa_s^2 + (2/alpha) kappa^4
  std::size_t samples = 0;
};

/// Per-marker residual fields at one snapshot index.
struct IdentityResidualFields {
  std::vector<double> w, speed, height, curvature;
};

namespace detail {

inline bool identity_marker(const MarkerCurve& c, std::size_t i, std::size_t skip) {
  if (c.closed) return true;
  const std::size_t N = c.points.size();
  return i >= skip && i + skip < N;
}

}  // namespace detail

/// Residual fields at snapshot j (needs j-1 and j+1, equally spaced in time).
/// Open curves skip `skip` markers at each end (at least 2).
inline IdentityResidualFields identity_residual_fields(const MarkerTrajectory& traj, std::size_t j,
                                                       std::size_t skip = 2) {
  if (j == 0 || j + 1 >= traj.snapshots.size())
    fail(ErrorCode::InsufficientSnapshots, "identity residuals need snapshots on both sides");
  const double alpha = traj.alpha;
  const auto& cm = traj.snapshots[j - 1];
  const auto& c0 = traj.snapshots[j];
  const auto& cp = traj.snapshots[j + 1];
  const double dtc = cp.t - cm.t;
  const auto gm = marker_geometry(cm), g0 = marker_geometry(c0), gp = marker_geometry(cp);
  const std::size_t N = c0.points.size();
  skip = std::max<std::size_t>(skip, 2);

  // Quantities per marker at the three times.
  auto w_of = [](const MarkerGeometry& g, std::size_t i) { return g.nu[i][1]; };
  auto speed_of = [&](const MarkerGeometry& g, std::size_t i) { return std::pow(g.kappa[i], alpha); };
  auto k2_of = [](const MarkerGeometry& g, std::size_t i) { return g.kappa[i] * g.kappa[i]; };

  IdentityResidualFields f;
  f.w.assign(N, kNaN);
  f.speed.assign(N, kNaN);
  f.height.assign(N, kNaN);
  f.curvature.assign(N, kNaN);
  const auto& P = c0.points;
  auto chord = [&](std::size_t a, std::size_t b) { return detail::norm(detail::sub(P[b], P[a])); };
  for (std::size_t i = 0; i < N; ++i) {
    if (!detail::identity_marker(c0, i, skip)) continue;
    const std::size_t im = (i + N - 1) % N, ip = (i + 1) % N;
    const double dm = chord(im, i), dp = chord(i, ip);
    const double kappa = g0.kappa[i];
    const double inv_rate = 1.0 / (alpha * std::pow(kappa, alpha - 1.0));
    auto L = [&](auto q_of) {
      const double qt = (q_of(gp, i) - q_of(gm, i)) / dtc;
      const double qss =
          detail::second_difference<double>(q_of(g0, im), q_of(g0, i), q_of(g0, ip), dm, dp);
      return qt * inv_rate - qss;
    };
    const double w = w_of(g0, i);
    f.w[i] = L(w_of) - kappa * kappa * w;
    f.speed[i] = L(speed_of) - kappa * kappa * std::pow(kappa, alpha);
    {
      const double yt = (cp.points[i][1] - cm.points[i][1]) / dtc;
      const double yss = detail::second_difference<double>(P[im][1], P[i][1], P[ip][1], dm, dp);
      f.height[i] = yt * inv_rate - yss - (1.0 - alpha) / alpha * kappa * w;
    }
    {
      // kappa_s by the chord-weighted centered difference.
      const double ks = (dm * dm * (g0.kappa[ip] - kappa) + dp * dp * (kappa - g0.kappa[im])) /
                        (dm * dp * (dm + dp));
      f.curvature[i] = L(k2_of) -
                       (2.0 * (alpha - 2.0) * ks * ks + 2.0 / alpha * kappa * kappa * kappa * kappa);
    }
  }
  return f;
}

/// Max residuals over all intermediate snapshots.
inline IdentityResiduals verify_evolution_identities(const MarkerTrajectory& traj,
                                                     std::size_t skip = 2) {
  if (traj.snapshots.size() < 3)
    fail(ErrorCode::InsufficientSnapshots, "need at least three snapshots");
  IdentityResiduals r;
  for (std::size_t j = 1; j + 1 < traj.snapshots.size(); ++j) {
    const auto f = identity_residual_fields(traj, j, skip);
    for (std::size_t i = 0; i < f.w.size(); ++i) {
      if (std::isnan(f.w[i])) continue;
      r.w = std::max(r.w, std::abs(f.w[i]));
      r.speed = std::max(r.speed, std::abs(f.speed[i]));
      r.height = std::max(r.height, std::abs(f.height[i]));
      r.curvature = std::max(r.curvature, std::abs(f.curvature[i]));
      ++r.samples;
    }
  }
  return r;
}

/// Columns: t, marker index, x, y, kappa.
inline void write_marker_trajectory(std::ostream& out, const MarkerTrajectory& traj) {
  out << "# t index x y kappa\n";
  for (const auto& c : traj.snapshots) {
    const auto g = marker_geometry(c);
    for (std::size_t i = 0; i < c.points.size(); ++i)
      out << format_double(c.t) << " " << i << " " << format_double(c.points[i][0]) << " "
          << format_double(c.points[i][1]) << " " << format_double(g.kappa[i]) << "\n";
  }
}

}  // namespace hflow
