#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hflow/error.hpp"
#include "hflow/field_io.hpp"
#include "hflow/solver.hpp"

namespace hflow {

/// psi = (a - b t - X^{n+1})_+.
struct LocalizationWindow {
  double a = 0.0;
  double b = 0.0;
};

enum class CheckStatus { Pass, Fail, Vacuous };

constexpr std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "PASS";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::Vacuous: return "VACUOUS";
  }
  return "FAIL";
}

struct EstimateReport {
  std::string name;
  std::string formula;  ///< bound with its constants filled in
  LocalizationWindow window;
  double h = 0.0;
  double observed = 0.0;
  double bound = 0.0;
  double margin = 0.0;  ///< >= 0 when the inequality holds exactly
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::Pass;
  std::string trajectory;

  bool ok() const noexcept { return status != CheckStatus::Fail; }
  /// How far the inequality is violated; 0 if it holds exactly.
  double deficit() const noexcept { return std::max(0.0, -margin); }
};

/// `check=<name> a=.. b=.. h=.. observed=.. bound=.. margin=.. status=.. tol=..`
inline std::string format_report(const EstimateReport& r) {
  std::ostringstream s;
  s << "check=" << r.name << " a=" << format_double(r.window.a) << " b=" << format_double(r.window.b)
    << " h=" << format_double(r.h) << " observed=" << format_double(r.observed)
    << " bound=" << format_double(r.bound) << " margin=" << format_double(r.margin)
    << " status=" << to_string(r.status) << " tol=" << format_double(r.tolerance);
  return s.str();
}

inline EstimateReport parse_report(const std::string& line) {
  EstimateReport r;
  std::istringstream in(line);
  std::string tok;
  bool have_status = false;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Io, "bad report token '" + tok + "'");
    const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "check") r.name = v;
    else if (k == "a") r.window.a = parse_double(v, k);
    else if (k == "b") r.window.b = parse_double(v, k);
    else if (k == "h") r.h = parse_double(v, k);
    else if (k == "observed") r.observed = parse_double(v, k);
    else if (k == "bound") r.bound = parse_double(v, k);
    else if (k == "margin") r.margin = parse_double(v, k);
    else if (k == "tol") r.tolerance = parse_double(v, k);
    else if (k == "status") {
      have_status = true;
      if (v == "PASS") r.status = CheckStatus::Pass;
      else if (v == "FAIL") r.status = CheckStatus::Fail;
      else if (v == "VACUOUS") r.status = CheckStatus::Vacuous;
      else fail(ErrorCode::Io, "bad status '" + v + "'");
    }
  }
  if (r.name.empty() || !have_status) fail(ErrorCode::Io, "incomplete report line");
  return r;
}

inline void write_reports(std::ostream& out, const std::vector<EstimateReport>& reports) {
  for (const auto& r : reports) out << format_report(r) << "\n";
}

/// Inverse of write_reports; blank lines are skipped.
inline std::vector<EstimateReport> read_reports(std::istream& in) {
  std::vector<EstimateReport> out;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(parse_report(line));
  return out;
}

inline std::vector<EstimateReport> read_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return read_reports(in);
}

/// Slack for auditing continuum inequalities on the grid.
inline double discretization_slack(double h, double c_tol = 10.0) { return c_tol * h * h; }

/// max(a - b t - u, 0) per node; `heights` are raw heights X^{n+1}.
inline ScalarField psi_field(const ScalarField& heights, double t, const LocalizationWindow& win) {
  ScalarField out(heights.grid);
  for (std::size_t n = 0; n < heights.size(); ++n)
    out[n] = std::max(win.a - win.b * t - heights[n], 0.0);
  return out;
}

/// psi of a solver state; the state is shifted by -a_k, so a_k is added back.
/// Non-active nodes sit at raw height >= a_k and get psi from their u0 value.
inline ScalarField psi_field(const GraphState& state, const AuxiliaryProblem& P,
                             const LocalizationWindow& win) {
  ScalarField raw(state.u.grid);
  for (std::size_t n = 0; n < raw.size(); ++n)
    raw[n] = P.mask.is_active(n) ? state.u[n] + P.a_k : P.u0[n] + P.a_k + P.c * state.t;
  return psi_field(raw, state.t, win);
}

/// B for the localized gradient estimate psi^{-1} w >= B.
inline double gradient_bound_constant(double initial_inf, double alpha, int n,
                                      const LocalizationWindow& win) {
  if (alpha <= 1.0) return initial_inf;
  return std::min({initial_inf, alpha / (n * (alpha - 1.0)), win.b / (win.a * (alpha - 1.0))});
}

/// B for the localized speed estimate psi^{-1} H^alpha >= B.
inline double speed_lower_bound_constant(double initial_inf, double alpha,
                                         const LocalizationWindow& win) {
  if (alpha <= 1.0) return initial_inf;
  return std::min(initial_inf, win.b / (win.a * (alpha - 1.0)));
}

namespace detail {

inline double raw_height(const GraphState& s, const AuxiliaryProblem& P, std::size_t n) {
  return s.u[n] + P.a_k;
}

inline double local_psi(const GraphState& s, const AuxiliaryProblem& P,
                        const LocalizationWindow& win, std::size_t n) {
  return std::max(win.a - win.b * s.t - raw_height(s, P, n), 0.0);
}

/// Visits (snapshot, interior node, psi) for every psi > 0.
template <class Visit>
void for_each_localized(const Trajectory& traj, const LocalizationWindow& win, Visit&& visit) {
  const auto& P = traj.problem;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const auto& s = traj.snapshots[k];
    for (std::size_t n : P.mask.interior) {
      const double psi = local_psi(s, P, win, n);
      if (psi > 0.0) visit(k, s, n, psi);
    }
  }
}

/// {psi > 0} must stay where the equation is the unmodified flow.
inline void require_window_below_band(const Trajectory& traj, const LocalizationWindow& win) {
  if (!(win.a > 0.0) || win.b < 0.0)
    fail(ErrorCode::InvalidArgument, "window needs a > 0 and b >= 0");
  const auto& P = traj.problem;
  for (const auto& s : traj.snapshots)
    for (std::size_t n : P.mask.active_nodes()) {
      if (local_psi(s, P, win, n) <= 0.0) continue;
      if (!P.mask.is_interior(n) || P.alpha_field[n] != P.alpha_target || P.xi_field[n] != 0.0)
        fail(ErrorCode::WindowTooHigh,
             "{psi > 0} reaches the modified band at t=" + std::to_string(s.t) + ", " +
                 describe_node(P.grid(), n) + "; lower a below a_k - 1 = " +
                 std::to_string(P.a_k - 1.0));
    }
}

inline EstimateReport base_report(const Trajectory& traj, std::string name,
                                  const LocalizationWindow& win, double c_tol) {
  EstimateReport r;
  r.name = std::move(name);
  r.window = win;
  r.h = traj.problem.spacing();
  r.tolerance = discretization_slack(r.h, c_tol);
  r.trajectory = traj.label;
  return r;
}

inline void finish_lower(EstimateReport& r) {
  r.margin = r.observed - r.bound;
  r.status = r.margin >= -r.tolerance ? CheckStatus::Pass : CheckStatus::Fail;
}

inline void finish_upper(EstimateReport& r) {
  r.margin = r.bound - r.observed;
  r.status = r.margin >= -r.tolerance ? CheckStatus::Pass : CheckStatus::Fail;
}

inline double speed_power(const GraphState& s, std::size_t n, double alpha) {
  return curvature_power(s.H[n], alpha);
}

}  // namespace detail

/// min psi^{-1} w over the run against B from gradient_bound_constant.
inline EstimateReport check_gradient_localized(const Trajectory& traj, const LocalizationWindow& win,
                                               double alpha, double c_tol = 10.0) {
  detail::require_window_below_band(traj, win);
  auto r = detail::base_report(traj, "gradient_localized", win, c_tol);
  const double inf = std::numeric_limits<double>::infinity();
  double initial = inf, overall = inf;
  detail::for_each_localized(traj, win, [&](std::size_t k, const GraphState& s, std::size_t n, double psi) {
    const double q = s.w[n] / psi;
    if (k == 0) initial = std::min(initial, q);
    overall = std::min(overall, q);
  });
  if (overall == inf) {
    r.status = CheckStatus::Vacuous;
    return r;
  }
  const int n = traj.problem.dim();
  // An empty initial window makes the bound vacuous at t = 0; use 0.
  r.bound = gradient_bound_constant(initial == inf ? 0.0 : initial, alpha, n, win);
  r.observed = overall;
  r.formula = "min{inf_{t=0} psi^-1 w" + std::string(alpha > 1.0 ? ", alpha/(n(alpha-1)), b/(a(alpha-1))" : "") + "}";
  detail::finish_lower(r);
  return r;
}

/// min psi^{-1} H^alpha over the run against speed_lower_bound_constant.
inline EstimateReport check_speed_lower_localized(const Trajectory& traj,
                                                  const LocalizationWindow& win, double alpha,
                                                  double c_tol = 10.0) {
  detail::require_window_below_band(traj, win);
  auto r = detail::base_report(traj, "speed_lower_localized", win, c_tol);
  const double inf = std::numeric_limits<double>::infinity();
  double initial = inf, overall = inf;
  detail::for_each_localized(traj, win, [&](std::size_t k, const GraphState& s, std::size_t n, double psi) {
    const double q = detail::speed_power(s, n, alpha) / psi;
    if (k == 0) initial = std::min(initial, q);
    overall = std::min(overall, q);
  });
  if (overall == inf) {
    r.status = CheckStatus::Vacuous;
    return r;
  }
  r.bound = speed_lower_bound_constant(initial == inf ? 0.0 : initial, alpha, win);
  r.observed = overall;
  r.formula = "min{inf_{t=0} psi^-1 H^alpha" + std::string(alpha > 1.0 ? ", b/(a(alpha-1))" : "") + "}";
  detail::finish_lower(r);
  return r;
}

/// Half the smallest w on {psi > 0}: the largest wbar for which w >= 2 wbar.
inline double chained_wbar(const Trajectory& traj, const LocalizationWindow& win) {
  double m = std::numeric_limits<double>::infinity();
  detail::for_each_localized(traj, win, [&](std::size_t, const GraphState& s, std::size_t n, double) {
    m = std::min(m, s.w[n]);
  });
  return std::isfinite(m) ? 0.5 * m : 0.5;
}

/// Largest cbound with cbound <= H^alpha / 2 <= 1 / cbound on {psi > 0}.
inline double chained_cbound(const Trajectory& traj, const LocalizationWindow& win, double alpha) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  detail::for_each_localized(traj, win, [&](std::size_t, const GraphState& s, std::size_t n, double) {
    const double v = detail::speed_power(s, n, alpha);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  });
  if (!std::isfinite(lo)) return 1.0;
  return std::min(0.5 * lo, 2.0 / hi);
}

namespace detail {

inline void require_gradient_hypothesis(const Trajectory& traj, const LocalizationWindow& win,
                                        double wbar) {
  for_each_localized(traj, win, [&](std::size_t, const GraphState& s, std::size_t n, double) {
    if (s.w[n] < 2.0 * wbar)
      fail(ErrorCode::GradientHypothesisFailed,
           "w = " + std::to_string(s.w[n]) + " < 2 wbar = " + std::to_string(2.0 * wbar) +
               " at t=" + std::to_string(s.t));
  });
}

/// sup_t max psi q / max{sup_{t=0} psi q, 1} for a pointwise quantity q.
template <class Quantity>
EstimateReport localized_ratio(const Trajectory& traj, const LocalizationWindow& win,
                               std::string name, double c_tol, Quantity&& q) {
  if (win.b != 0.0) fail(ErrorCode::InvalidArgument, name + " needs b = 0");
  auto r = base_report(traj, std::move(name), win, c_tol);
  double initial = 0.0, overall = 0.0;
  bool any = false;
  for_each_localized(traj, win, [&](std::size_t k, const GraphState& s, std::size_t n, double psi) {
    const double v = psi * q(s, n);
    any = true;
    if (k == 0) initial = std::max(initial, v);
    overall = std::max(overall, v);
  });
  if (!any) {
    r.status = CheckStatus::Vacuous;
    return r;
  }
  r.observed = overall / std::max(initial, 1.0);
  r.bound = std::numeric_limits<double>::infinity();
  r.margin = std::isfinite(r.observed) ? std::numeric_limits<double>::max() : -1.0;
  r.status = std::isfinite(r.observed) ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

}  // namespace detail

/// Ratio sup psi H / max{sup_{t=0} psi H, 1}. Single-run status only asserts
/// finiteness; stability needs compare_refinement.
inline EstimateReport check_H_upper_localized(const Trajectory& traj, const LocalizationWindow& win,
                                              double wbar, double c_tol = 10.0) {
  detail::require_window_below_band(traj, win);
  detail::require_gradient_hypothesis(traj, win, wbar);
  auto r = detail::localized_ratio(traj, win, "H_upper_ratio", c_tol,
                                   [](const GraphState& s, std::size_t n) { return s.H[n]; });
  r.formula = "sup psi H / max{sup_{t=0} psi H, 1}";
  return r;
}

/// Ratio sup psi |A| / max{sup_{t=0} psi |A|, 1} under cbound <= H^alpha/2 <= 1/cbound.
inline EstimateReport check_curvature_localized(const Trajectory& traj,
                                                const LocalizationWindow& win, double cbound,
                                                double wbar, double c_tol = 10.0) {
  detail::require_window_below_band(traj, win);
  const double alpha = traj.problem.alpha_target;
  detail::for_each_localized(traj, win, [&](std::size_t, const GraphState& s, std::size_t n, double) {
    const double half = 0.5 * detail::speed_power(s, n, alpha);
    if (half < cbound || half > 1.0 / cbound)
      fail(ErrorCode::HHypothesisFailed,
           "H^alpha/2 = " + std::to_string(half) + " outside [" + std::to_string(cbound) + ", " +
               std::to_string(1.0 / cbound) + "] at t=" + std::to_string(s.t));
  });
  detail::require_gradient_hypothesis(traj, win, wbar);
  auto r = detail::localized_ratio(traj, win, "curvature_ratio", c_tol,
                                   [](const GraphState& s, std::size_t n) { return std::sqrt(s.A2[n]); });
  r.formula = "sup psi |A| / max{sup_{t=0} psi |A|, 1}";
  return r;
}

/// Stability of a ratio under h -> h/2: observed R(h/2), bound factor R(h).
inline EstimateReport compare_refinement(const EstimateReport& coarse, const EstimateReport& fine,
                                         double factor = 1.1) {
  EstimateReport r = fine;
  r.name = fine.name + "_refinement";
  r.formula = std::to_string(factor) + " * R(h)";
  if (coarse.status == CheckStatus::Vacuous || fine.status == CheckStatus::Vacuous) {
    r.status = CheckStatus::Vacuous;
    return r;
  }
  r.bound = factor * coarse.observed;
  r.observed = fine.observed;
  r.margin = r.bound - r.observed;
  r.tolerance = 0.0;
  r.status = std::isfinite(r.observed) && r.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

/// Program items 1, 2, 3, 4 and 6 on a solver trajectory.
inline std::vector<EstimateReport> check_program_bounds(const Trajectory& traj, double c_tol = 10.0) {
  const auto& P = traj.problem;
  const LocalizationWindow none{};
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<EstimateReport> out;

  double max_G0 = 0.0;
  for (std::size_t n : P.mask.interior) max_G0 = std::max(max_G0, P.G0[n]);

  {  // (1) c <= udot <= sup G0
    auto r = detail::base_report(traj, "program_1_speed", none, c_tol);
    double lo = traj.summary.count ? traj.summary.udot_min : inf;
    double hi = traj.summary.count ? traj.summary.udot_max : -inf;
    for (const auto& s : traj.snapshots)
      for (std::size_t n : P.mask.interior) {
        if (!std::isfinite(s.udot[n])) continue;
        lo = std::min(lo, s.udot[n]);
        hi = std::max(hi, s.udot[n]);
      }
    const double lower_margin = lo - P.c;
    const double upper_margin = max_G0 - hi;
    if (lower_margin <= upper_margin) {
      r.observed = lo;
      r.bound = P.c;
      r.formula = "udot >= c";
      detail::finish_lower(r);
    } else {
      r.observed = hi;
      r.bound = max_G0;
      r.formula = "udot <= sup G0";
      detail::finish_upper(r);
    }
    out.push_back(r);
  }

  {  // (2) u0 <= u - c t <= 0; the upper end is the largest Dirichlet offset
    auto r = detail::base_report(traj, "program_2_height", none, c_tol);
    double offset = 0.0;
    for (std::size_t n : P.mask.boundary) offset = std::max(offset, P.u0[n]);
    double lower_margin = inf, upper_margin = inf, lower_obs = 0.0, upper_obs = 0.0;
    for (const auto& s : traj.snapshots)
      for (std::size_t n : P.mask.active_nodes()) {
        const double v = s.u[n] - P.c * s.t;
        if (v - P.u0[n] < lower_margin) {
          lower_margin = v - P.u0[n];
          lower_obs = v - P.u0[n];
        }
        if (offset - v < upper_margin) {
          upper_margin = offset - v;
          upper_obs = v;
        }
      }
    if (lower_margin <= upper_margin) {
      r.observed = lower_obs;
      r.bound = 0.0;
      r.formula = "u - c t - u0 >= 0";
      detail::finish_lower(r);
    } else {
      r.observed = upper_obs;
      r.bound = offset;
      r.formula = "u - c t <= max boundary offset";
      detail::finish_upper(r);
    }
    out.push_back(r);
  }

  {  // (3) |Du| next to the boundary against max |Du0| over the boundary band.
    // Central differences at interior nodes adjacent to BOUNDARY are
    // second order; one-sided differences on BOUNDARY nodes mix the Dirichlet
    // offsets into the stencil and are only used for the t = 0 bound.
    auto r = detail::base_report(traj, "program_3_boundary_gradient", none, c_tol);
    auto grad_norm = [&](const GraphState& s, std::size_t n) {
      double g2 = 0.0;
      for (int a = 0; a < P.dim(); ++a) g2 += s.derivatives.grad[a][n] * s.derivatives.grad[a][n];
      return std::sqrt(g2);
    };
    std::vector<std::size_t> adjacent;
    for (std::size_t n : P.mask.interior) {
      bool near = false;
      detail::for_each_stencil_neighbor(P.grid(), n, [&](std::size_t m) {
        if (P.mask.is_boundary(m)) near = true;
      });
      if (near) adjacent.push_back(n);
    }
    double initial = 0.0, overall = 0.0;
    for (std::size_t n : P.mask.boundary) {
      const double g = grad_norm(traj.snapshots.front(), n);
      if (std::isfinite(g)) initial = std::max(initial, g);
    }
    for (const auto& s : traj.snapshots)
      for (std::size_t n : adjacent) overall = std::max(overall, grad_norm(s, n));
    r.observed = overall;
    r.bound = initial;
    r.formula = "|Du| next to the boundary <= max_{boundary} |Du0|";
    detail::finish_upper(r);
    out.push_back(r);
  }

  double min_w = inf, min_Ha = inf, max_Ha = 0.0;
  for (const auto& s : traj.snapshots)
    for (std::size_t n : P.mask.interior) {
      min_w = std::min(min_w, s.w[n]);
      const double v = curvature_power(s.H[n], P.alpha_field[n]);
      min_Ha = std::min(min_Ha, v);
      max_Ha = std::max(max_Ha, v);
    }

  {  // (4) H^alpha(x) <= 2 sup G0
    auto r = detail::base_report(traj, "program_4_speed_upper", none, c_tol);
    r.observed = max_Ha;
    r.bound = 2.0 * max_G0;
    r.formula = "H^alpha(x) <= 2 sup G0";
    detail::finish_upper(r);
    out.push_back(r);
  }

  {  // (6) H^alpha(x) >= c inf w
    auto r = detail::base_report(traj, "program_6_speed_lower", none, c_tol);
    r.observed = min_Ha;
    r.bound = P.c * min_w;
    r.formula = "H^alpha(x) >= c inf w";
    detail::finish_lower(r);
    out.push_back(r);
  }
  return out;
}

inline bool all_ok(const std::vector<EstimateReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.ok(); });
}

}  // namespace hflow
