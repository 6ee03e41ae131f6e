#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hflow/error.hpp"
#include "hflow/field_io.hpp"

namespace hflow {

enum class Mode { SolveAux, Cascade, Verify, Curve, OracleCompare };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::SolveAux: return "solve-aux";
    case Mode::Cascade: return "cascade";
    case Mode::Verify: return "verify";
    case Mode::Curve: return "curve";
    case Mode::OracleCompare: return "oracle-compare";
  }
  return "solve-aux";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::SolveAux, Mode::Cascade, Mode::Verify, Mode::Curve, Mode::OracleCompare})
    if (to_string(m) == s) return m;
  fail(ErrorCode::Config, "mode: unknown mode '" + s + "'");
}

/// Everything a run needs. Optional keys are written only when set.
struct RunConfig {
  Mode mode = Mode::SolveAux;
  /// grim-reaper | paraboloid | translator | circle | custom
  std::string preset = "grim-reaper";
  /// Field file for preset=custom; trajectory directory for mode=verify.
  std::string input;
  std::string output = "out";
  double alpha = 1.0;
  double h = 0.01;
  double t_end = 0.5;
  /// Cut heights; for the translator preset an empty list cuts at the profile height at x_max.
  std::vector<double> heights{3.0};
  /// Shared snapshot times (cascade) or extra snapshot times (solve-aux).
  std::vector<double> schedule;
  double safety = 0.9;
  int cadence = 0;
  double c_tol = 10.0;
  int workers = 1;
  bool record_steps = false;

  double transition_width = 0.25;
  bool modified_band = true;
  bool cutoff = true;
  std::optional<double> c;

  /// Localization window; no localized checks unless window_a is set.
  std::optional<double> window_a;
  double window_b = 0.0;
  std::optional<double> wbar;
  std::optional<double> cbound;

  /// Cascade convergence window; defaults to min heights - 2.5 and t_end.
  std::optional<double> convergence_a;
  std::optional<double> t_star;

  /// Paraboloid box half width; default sqrt(2 max height) + 0.5.
  std::optional<double> half_width;
  double x_max = 1.195;
  double ode_tol = 1e-10;

  /// Oracle comparison below this height (default a_k - 1) and pass threshold.
  std::optional<double> oracle_a;
  std::optional<double> oracle_tol;

  int markers = 2000;
  double dt = 1e-5;
  double R0 = 1.0;
  double s_max = 3.0;
  int snapshot_every = 100;
  std::optional<double> radius_tol;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& field, const std::string& why) {
  fail(ErrorCode::Config, field + ": " + why);
}

inline double config_double(const std::string& field, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d))
    config_error(field, "not a finite number: '" + v + "'");
  return d;
}

inline int config_int(const std::string& field, const std::string& v) {
  const double d = config_double(field, v);
  if (d != std::floor(d) || std::abs(d) > 1e9) config_error(field, "not an integer: '" + v + "'");
  return static_cast<int>(d);
}

inline bool config_bool(const std::string& field, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  config_error(field, "expected true or false, got '" + v + "'");
}

inline std::vector<double> config_list(const std::string& field, const std::string& v) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string tok;
  while (in >> tok) out.push_back(config_double(field, tok));
  return out;
}

inline std::string list_string(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + format_double(xs[i]);
  return s;
}

}  // namespace detail

/// Range checks; the message names the offending key.
inline void validate(const RunConfig& c) {
  using detail::config_error;
  static const std::set<std::string> presets{"grim-reaper", "paraboloid", "translator", "circle", "custom"};
  if (!presets.count(c.preset)) config_error("preset", "unknown preset '" + c.preset + "'");
  if (!(c.alpha > 0.0)) config_error("alpha", "must be > 0");
  if (!(c.h > 0.0)) config_error("h", "must be > 0");
  if (!(c.t_end >= 0.0)) config_error("t_end", "must be >= 0");
  if (!(c.safety > 0.0) || c.safety > 1.0) config_error("safety", "must lie in (0, 1]");
  if (c.cadence < 0) config_error("cadence", "must be >= 0");
  if (!(c.c_tol > 0.0)) config_error("c_tol", "must be > 0");
  if (c.workers < 1) config_error("workers", "must be >= 1");
  if (!(c.transition_width > 0.0) || c.transition_width > 1.0 / 3.0)
    config_error("transition_width", "must lie in (0, 1/3]");
  if (c.c && !(*c.c > 0.0)) config_error("c", "must be > 0");
  if (c.window_a && !(*c.window_a > 0.0)) config_error("window_a", "must be > 0");
  if (!(c.window_b >= 0.0)) config_error("window_b", "must be >= 0");
  if (c.wbar && !(*c.wbar > 0.0)) config_error("wbar", "must be > 0");
  if (c.cbound && !(*c.cbound > 0.0)) config_error("cbound", "must be > 0");
  if (!(c.ode_tol > 0.0)) config_error("ode_tol", "must be > 0");
  if (!(c.x_max > 0.0)) config_error("x_max", "must be > 0");
  if (c.half_width && !(*c.half_width > 0.0)) config_error("half_width", "must be > 0");
  if (c.preset == "custom" && c.mode != Mode::Verify && c.input.empty())
    config_error("input", "preset=custom needs an input field file");
  if (c.mode == Mode::Verify && c.input.empty()) config_error("input", "verify needs a trajectory directory");
  if (c.output.empty()) config_error("output", "must not be empty");
  for (std::size_t i = 1; i < c.heights.size(); ++i)
    if (!(c.heights[i] > c.heights[i - 1])) config_error("heights", "must be strictly increasing");
  if (c.mode != Mode::Curve && c.mode != Mode::Verify && c.heights.empty() &&
      c.preset != "translator")
    config_error("heights", "needs at least one height");
  if (c.mode == Mode::Cascade) {
    if (c.heights.size() < 2) config_error("heights", "a cascade needs at least two heights");
    const double a = c.convergence_a.value_or(c.heights.front() - 2.5);
    if (!(a < c.heights.front() - 2.0))
      config_error("convergence_a", "must lie below min heights - 2");
    if (c.t_star && (*c.t_star > c.t_end || *c.t_star < 0.0))
      config_error("t_star", "must lie in [0, t_end]");
  }
  for (double s : c.schedule)
    if (!(s > 0.0) || s > c.t_end) config_error("schedule", "times must lie in (0, t_end]");
  if (c.mode == Mode::Curve) {
    if (c.preset != "circle" && c.preset != "grim-reaper")
      config_error("preset", "curve mode supports circle and grim-reaper");
    if (c.markers < 8) config_error("markers", "must be >= 8");
    if (!(c.dt > 0.0)) config_error("dt", "must be > 0");
    if (!(c.R0 > 0.0)) config_error("R0", "must be > 0");
    if (!(c.s_max > 0.0)) config_error("s_max", "must be > 0");
    if (c.snapshot_every < 1) config_error("snapshot_every", "must be >= 1");
  } else if (c.preset == "circle") {
    config_error("preset", "circle is a curve-mode preset");
  }
  if (c.mode == Mode::OracleCompare && c.preset != "grim-reaper" && c.preset != "translator")
    config_error("preset", "oracle-compare needs an exact solution (grim-reaper or translator)");
  if (c.mode == Mode::OracleCompare && c.preset == "grim-reaper" && c.alpha != 1.0)
    config_error("alpha", "the grim reaper translates only for alpha = 1");
  if (c.radius_tol && !(*c.radius_tol > 0.0)) config_error("radius_tol", "must be > 0");
  if (c.oracle_tol && !(*c.oracle_tol > 0.0)) config_error("oracle_tol", "must be > 0");
}

inline KeyValues to_key_values(const RunConfig& c) {
  KeyValues kv;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  kv.set("mode", to_string(c.mode));
  kv.set("preset", c.preset);
  if (!c.input.empty()) kv.set("input", c.input);
  kv.set("output", c.output);
  kv.set("alpha", c.alpha);
  kv.set("h", c.h);
  kv.set("t_end", c.t_end);
  kv.set("heights", detail::list_string(c.heights));
  kv.set("schedule", detail::list_string(c.schedule));
  kv.set("safety", c.safety);
  kv.set("cadence", c.cadence);
  kv.set("c_tol", c.c_tol);
  kv.set("workers", c.workers);
  kv.set("record_steps", b(c.record_steps));
  kv.set("transition_width", c.transition_width);
  kv.set("modified_band", b(c.modified_band));
  kv.set("cutoff", b(c.cutoff));
  if (c.c) kv.set("c", *c.c);
  if (c.window_a) kv.set("window_a", *c.window_a);
  kv.set("window_b", c.window_b);
  if (c.wbar) kv.set("wbar", *c.wbar);
  if (c.cbound) kv.set("cbound", *c.cbound);
  if (c.convergence_a) kv.set("convergence_a", *c.convergence_a);
  if (c.t_star) kv.set("t_star", *c.t_star);
  if (c.half_width) kv.set("half_width", *c.half_width);
  kv.set("x_max", c.x_max);
  kv.set("ode_tol", c.ode_tol);
  if (c.oracle_a) kv.set("oracle_a", *c.oracle_a);
  if (c.oracle_tol) kv.set("oracle_tol", *c.oracle_tol);
  kv.set("markers", c.markers);
  kv.set("dt", c.dt);
  kv.set("R0", c.R0);
  kv.set("s_max", c.s_max);
  kv.set("snapshot_every", c.snapshot_every);
  if (c.radius_tol) kv.set("radius_tol", *c.radius_tol);
  return kv;
}

/// Parses and validates. Unknown keys are errors.
inline RunConfig from_key_values(const KeyValues& kv) {
  using namespace detail;
  RunConfig c;
  for (const auto& [k, v] : kv.entries()) {
    if (k == "mode") c.mode = parse_mode(v);
    else if (k == "preset") c.preset = v;
    else if (k == "input") c.input = v;
    else if (k == "output") c.output = v;
    else if (k == "alpha") c.alpha = config_double(k, v);
    else if (k == "h") c.h = config_double(k, v);
    else if (k == "t_end") c.t_end = config_double(k, v);
    else if (k == "heights") c.heights = config_list(k, v);
    else if (k == "schedule") c.schedule = config_list(k, v);
    else if (k == "safety") c.safety = config_double(k, v);
    else if (k == "cadence") c.cadence = config_int(k, v);
    else if (k == "c_tol") c.c_tol = config_double(k, v);
    else if (k == "workers") c.workers = config_int(k, v);
    else if (k == "record_steps") c.record_steps = config_bool(k, v);
    else if (k == "transition_width") c.transition_width = config_double(k, v);
    else if (k == "modified_band") c.modified_band = config_bool(k, v);
    else if (k == "cutoff") c.cutoff = config_bool(k, v);
    else if (k == "c") c.c = config_double(k, v);
    else if (k == "window_a") c.window_a = config_double(k, v);
    else if (k == "window_b") c.window_b = config_double(k, v);
    else if (k == "wbar") c.wbar = config_double(k, v);
    else if (k == "cbound") c.cbound = config_double(k, v);
    else if (k == "convergence_a") c.convergence_a = config_double(k, v);
    else if (k == "t_star") c.t_star = config_double(k, v);
    else if (k == "half_width") c.half_width = config_double(k, v);
    else if (k == "x_max") c.x_max = config_double(k, v);
    else if (k == "ode_tol") c.ode_tol = config_double(k, v);
    else if (k == "oracle_a") c.oracle_a = config_double(k, v);
    else if (k == "oracle_tol") c.oracle_tol = config_double(k, v);
    else if (k == "markers") c.markers = config_int(k, v);
    else if (k == "dt") c.dt = config_double(k, v);
    else if (k == "R0") c.R0 = config_double(k, v);
    else if (k == "s_max") c.s_max = config_double(k, v);
    else if (k == "snapshot_every") c.snapshot_every = config_int(k, v);
    else if (k == "radius_tol") c.radius_tol = config_double(k, v);
    else config_error(k, "unknown key");
  }
  validate(c);
  return c;
}

inline RunConfig read_config(const std::filesystem::path& path) {
  return from_key_values(KeyValues::read(path));
}

}  // namespace hflow
