#include "hflow/app.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>

#include "hflow/cascade.hpp"
#include "hflow/curve_lab.hpp"
#include "hflow/estimates.hpp"
#include "hflow/presets.hpp"
#include "hflow/trajectory_io.hpp"

namespace hflow {

namespace app {

namespace fs = std::filesystem;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ScalarField initial_field(const RunConfig& c) {
  if (c.preset == "grim-reaper") return grim_reaper_initial(c.h);
  if (c.preset == "paraboloid") {
    const double top = c.heights.empty() ? 2.0 : c.heights.back();
    return paraboloid_initial(c.h, c.half_width.value_or(std::sqrt(2.0 * top) + 0.5));
  }
  if (c.preset == "translator") return translator_initial(c.alpha, c.h, c.x_max, c.ode_tol);
  if (c.preset == "custom") return read_field(fs::path(c.input));
  fail(ErrorCode::Config, "preset: '" + c.preset + "' has no graph initial data");
}

double first_height(const RunConfig& c) {
  if (c.preset == "translator" && c.heights.empty())
    return translator_height(c.alpha, c.x_max, c.ode_tol);
  return c.heights.front();
}

AssemblyOptions assembly_options(const RunConfig& c) {
  AssemblyOptions o;
  o.transition_width = c.transition_width;
  o.modified_band = c.modified_band;
  o.cutoff = c.cutoff;
  o.c_override = c.c;
  return o;
}

void write_reports(const fs::path& path, const std::vector<EstimateReport>& reports) {
  std::ofstream out(path);
  hflow::write_reports(out, reports);
}

void write_config_copy(const fs::path& dir, const RunConfig& c) {
  to_key_values(c).write(dir / "config.txt");
}

/// Localized audits in the order gradient, speed, H ratio, curvature ratio;
/// wbar and cbound default to the values discharged by the earlier checks.
std::vector<EstimateReport> localized_checks(const Trajectory& traj, const RunConfig& c) {
  std::vector<EstimateReport> out;
  if (!c.window_a) return out;
  const LocalizationWindow win{*c.window_a, c.window_b};
  const LocalizationWindow flat{*c.window_a, 0.0};
  const double alpha = traj.problem.alpha_target;
  out.push_back(check_gradient_localized(traj, win, alpha, c.c_tol));
  out.push_back(check_speed_lower_localized(traj, win, alpha, c.c_tol));
  const double wbar = c.wbar.value_or(chained_wbar(traj, flat));
  const double cbound = c.cbound.value_or(chained_cbound(traj, flat, alpha));
  out.push_back(check_H_upper_localized(traj, flat, wbar, c.c_tol));
  out.push_back(check_curvature_localized(traj, flat, cbound, wbar, c.c_tol));
  return out;
}

void collect(RunResult& res, const std::vector<EstimateReport>& reports) {
  for (const auto& r : reports) {
    res.metrics[r.name + ".margin"] = r.margin;
    if (r.name == "H_upper_ratio" || r.name == "curvature_ratio") res.metrics[r.name] = r.observed;
    if (!r.ok()) {
      res.exit_code = kExitFail;
      res.failures.push_back(format_report(r));
    }
  }
}

/// Evolves, writing a diagnostic snapshot under out/abort on loss of mean convexity.
bool evolve_or_abort(const AuxiliaryProblem& P, const EvolveOptions& eo, const fs::path& out,
                            Trajectory& traj, RunResult& res) {
  try {
    traj = evolve(P, eo);
    return true;
  } catch (const EvolveAbort& e) {
    fs::create_directories(out / "abort");
    write_field(out / "abort" / ("u_t" + time_tag(e.last_state.t) + ".dat"), e.last_state.u);
    std::ofstream(out / "abort" / "abort.txt") << e.what() << "\nnode=" << e.node << "\n";
    res.exit_code = kExitFail;
    res.failures.push_back(e.what());
    return false;
  }
}

EvolveOptions evolve_options(const RunConfig& c) {
  EvolveOptions eo;
  eo.t_end = c.t_end;
  eo.safety = c.safety;
  eo.cadence = c.cadence;
  eo.schedule = c.schedule;
  eo.record_steps = c.record_steps;
  return eo;
}

std::vector<std::pair<double, double>> translation_errors(const Trajectory& traj, double a) {
  const auto& P = traj.problem;
  std::vector<std::pair<double, double>> out;
  for (const auto& s : traj.snapshots) {
    double m = 0.0;
    for (std::size_t n : P.mask.interior) {
      const double v = s.u[n] + P.a_k;
      if (v < a) m = std::max(m, std::abs(v - (P.u0[n] + P.a_k + s.t)));
    }
    out.emplace_back(s.t, m);
  }
  return out;
}

RunResult run_solve_aux(const RunConfig& c, const fs::path& out, bool oracle) {
  RunResult res;
  const ScalarField u0 = initial_field(c);
  const double a_k = first_height(c);
  const AuxiliaryProblem P = assemble_aux_problem(u0, a_k, c.alpha, assembly_options(c));
  Trajectory traj;
  if (!evolve_or_abort(P, evolve_options(c), out, traj, res)) return res;
  traj.label = to_string(c.mode);
  write_trajectory(out, traj, utc_timestamp());

  const auto compat = compatibility_report(P, c.safety);
  {
    KeyValues kv;
    kv.set("cutoff_nodes", compat.cutoff_nodes);
    kv.set("order01", compat.order01);
    kv.set("band_mismatch", compat.band_mismatch);
    kv.set("drift", compat.drift);
    kv.set("dt", compat.dt);
    kv.set("compatible", std::string(compat.compatible ? "true" : "false"));
    kv.write(out / "compatibility.txt");
  }
  res.metrics["compat.order01"] = compat.order01;

  // The program bounds rest on the cut-off band; without it the run is the
  // plain flow with Dirichlet data and only the localized audits apply.
  auto reports = c.modified_band ? check_program_bounds(traj, c.c_tol) : std::vector<EstimateReport>{};
  for (auto& r : localized_checks(traj, c)) reports.push_back(r);
  write_reports(out / "reports.txt", reports);
  collect(res, reports);
  for (const auto& r : reports)
    if (r.name.rfind("program_", 0) == 0) res.metrics[r.name + ".deficit"] = r.deficit();

  if (oracle) {
    const double a = c.oracle_a.value_or(a_k - 1.0);
    const auto errs = translation_errors(traj, a);
    std::ofstream f(out / "oracle.txt");
    f << "# t max_error a=" << format_double(a) << "\n";
    for (const auto& [t, e] : errs) f << format_double(t) << " " << format_double(e) << "\n";
    const double final_err = errs.back().second;
    res.metrics["oracle.max_error"] = final_err;
    if (c.oracle_tol && !(final_err <= *c.oracle_tol)) {
      res.exit_code = kExitFail;
      res.failures.push_back("oracle error " + format_double(final_err) + " > " +
                             format_double(*c.oracle_tol));
    }
  }
  return res;
}

RunResult run_cascade_mode(const RunConfig& c, const fs::path& out) {
  RunResult res;
  const ScalarField u0 = initial_field(c);
  CascadeOptions co;
  co.safety = c.safety;
  co.schedule = c.schedule;
  co.workers = c.workers;
  co.assembly = assembly_options(c);
  co.c_tol = c.c_tol;
  CascadeResult result;
  try {
    result = run_cascade(u0, c.heights, c.alpha, c.t_end, co);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonpositiveH) throw;
    res.exit_code = kExitFail;
    res.failures.push_back(e.what());
    std::ofstream(out / "abort.txt") << e.what() << "\n";
    return res;
  }
  const double a = c.convergence_a.value_or(c.heights.front() - 2.5);
  const double t_star = c.t_star.value_or(c.t_end);
  const auto rep = convergence_report(result, a, t_star, c.c_tol);

  KeyValues manifest = cascade_manifest(result);
  manifest.set("convergence_a", a);
  manifest.set("t_star", t_star);
  manifest.set("created", utc_timestamp());
  manifest.write(out / "manifest.txt");
  {
    std::ofstream f(out / "convergence.txt");
    write_convergence_table(f, rep);
  }
  for (std::size_t k = 0; k < result.extended.size(); ++k) {
    const fs::path dir = out / ("k" + std::to_string(k));
    fs::create_directories(dir);
    for (const auto& e : result.extended[k]) write_field(dir / ("v_t" + time_tag(e.t) + ".dat"), e.v);
  }
  fs::create_directories(out / "limit");
  for (const auto& e : rep.limit_candidate)
    write_field(out / "limit" / ("v_t" + time_tag(e.t) + ".dat"), e.v);

  std::vector<EstimateReport> reports;
  for (const auto& traj : result.trajectories)
    for (auto r : check_program_bounds(traj, c.c_tol)) {
      r.name += "_k" + traj.label.substr(2, traj.label.find(' ') - 2);
      reports.push_back(r);
    }
  write_reports(out / "reports.txt", reports);
  collect(res, reports);

  for (std::size_t k = 0; k < rep.d.size(); ++k) res.metrics["d_" + std::to_string(k)] = rep.d[k];
  if (!rep.passed) {
    res.exit_code = kExitFail;
    res.failures.push_back("cascade pair differences do not contract");
  }
  if (!rep.continuous) {
    res.exit_code = kExitFail;
    res.failures.push_back("DISCONTINUOUS_EXTENSION");
  }
  if (c.preset == "grim-reaper" && c.alpha == 1.0) {
    const auto errs = oracle_errors(result, a, t_star, [](double x, double, double t) {
      return grim_reaper(x, t);
    });
    std::ofstream f(out / "oracle.txt");
    f << "# k max_error a=" << format_double(a) << "\n";
    for (std::size_t k = 0; k < errs.size(); ++k) {
      f << k << " " << format_double(errs[k]) << "\n";
      res.metrics["oracle_k" + std::to_string(k)] = errs[k];
    }
  }
  return res;
}

RunResult run_verify(const RunConfig& c, const fs::path& out) {
  RunResult res;
  const Trajectory traj = read_trajectory(fs::path(c.input));
  auto reports = check_program_bounds(traj, c.c_tol);
  for (auto& r : localized_checks(traj, c)) reports.push_back(r);
  write_reports(out / "reports.txt", reports);
  collect(res, reports);
  return res;
}

RunResult run_curve(const RunConfig& c, const fs::path& out) {
  RunResult res;
  const bool circle = c.preset == "circle";
  MarkerCurve curve = circle ? circle_curve(c.R0, static_cast<std::size_t>(c.markers))
                             : grim_reaper_curve(c.s_max, static_cast<std::size_t>(c.markers));
  const int steps = static_cast<int>(std::llround(c.t_end / c.dt));
  MarkerOptions mo;
  mo.snapshot_every = c.snapshot_every;
  const auto traj = evolve_markers(curve, c.alpha, c.dt, steps, mo);
  {
    std::ofstream f(out / "markers.txt");
    write_marker_trajectory(f, traj);
  }
  double final_error = 0.0;
  {
    std::ofstream f(out / (circle ? "radius.txt" : "graph_error.txt"));
    f << (circle ? "# t radius exact\n" : "# t max_error\n");
    for (const auto& s : traj.snapshots) {
      if (circle) {
        const double R = mean_radius(s), exact = circle_radius(c.alpha, c.R0, s.t);
        f << format_double(s.t) << " " << format_double(R) << " " << format_double(exact) << "\n";
        final_error = std::abs(R - exact);
      } else {
        double m = 0.0;
        for (const auto& p : s.points) m = std::max(m, std::abs(p[1] - grim_reaper(p[0], s.t)));
        f << format_double(s.t) << " " << format_double(m) << "\n";
        final_error = m;
      }
    }
  }
  res.metrics["curve.final_error"] = final_error;
  if (traj.snapshots.size() >= 3) {
    const auto r = verify_evolution_identities(traj, static_cast<std::size_t>(c.markers / 10));
    std::ofstream f(out / "identities.txt");
    f << "identity=w residual=" << format_double(r.w) << "\n"
      << "identity=speed residual=" << format_double(r.speed) << "\n"
      << "identity=height residual=" << format_double(r.height) << "\n"
      << "identity=curvature residual=" << format_double(r.curvature) << "\n"
      << "samples=" << r.samples << "\n";
    res.metrics["identity.w"] = r.w;
    res.metrics["identity.speed"] = r.speed;
    res.metrics["identity.height"] = r.height;
  }
  const double tol = c.radius_tol.value_or(1e-3);
  if (!(final_error <= tol)) {
    res.exit_code = kExitFail;
    res.failures.push_back("curve error " + format_double(final_error) + " > " + format_double(tol));
  }
  return res;
}

}  // namespace app

RunResult run(const RunConfig& config, const std::filesystem::path& out) {
  RunResult res;
  try {
    validate(config);
    std::filesystem::create_directories(out);
    app::write_config_copy(out, config);
    switch (config.mode) {
      case Mode::SolveAux: return app::run_solve_aux(config, out, false);
      case Mode::OracleCompare: return app::run_solve_aux(config, out, true);
      case Mode::Cascade: return app::run_cascade_mode(config, out);
      case Mode::Verify: return app::run_verify(config, out);
      case Mode::Curve: return app::run_curve(config, out);
    }
  } catch (const Error& e) {
    res.exit_code = e.code() == ErrorCode::Config ? kExitConfig : kExitFail;
    res.failures.push_back(e.what());
  } catch (const std::exception& e) {
    res.exit_code = kExitFail;
    res.failures.push_back(e.what());
  }
  return res;
}

RunResult run_resolution_sweep(const RunConfig& config, const std::filesystem::path& out,
                               int levels) {
  RunResult total;
  if (levels < 0) {
    total.exit_code = kExitConfig;
    total.failures.push_back("resolution-sweep: must be >= 0");
    return total;
  }
  std::vector<RunResult> results;
  std::vector<double> hs;
  for (int i = 0; i <= levels; ++i) {
    RunConfig c = config;
    c.h = config.h / std::pow(2.0, i);
    const auto dir = out / ("level" + std::to_string(i));
    results.push_back(run(c, dir));
    hs.push_back(c.h);
    const auto& r = results.back();
    total.exit_code = std::max(total.exit_code, r.exit_code);
    for (const auto& f : r.failures) total.failures.push_back("level" + std::to_string(i) + ": " + f);
    if (r.exit_code == kExitConfig) return total;
  }
  std::filesystem::create_directories(out);
  std::ofstream f(out / "sweep.txt");
  f << "# level h metric value ratio_to_previous\n";
  for (std::size_t i = 0; i < results.size(); ++i)
    for (const auto& [name, value] : results[i].metrics) {
      f << i << " " << format_double(hs[i]) << " " << name << " " << format_double(value);
      if (i > 0) {
        const auto it = results[i - 1].metrics.find(name);
        if (it != results[i - 1].metrics.end() && value != 0.0)
          f << " " << format_double(it->second / value);
        else
          f << " nan";
      } else {
        f << " nan";
      }
      f << "\n";
    }
  total.metrics = results.back().metrics;
  return total;
}

}  // namespace hflow
