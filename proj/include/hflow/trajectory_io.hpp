#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hflow/error.hpp"
#include "hflow/field_io.hpp"
#include "hflow/solver.hpp"

namespace hflow {

/// "u_t0.2500000000.dat" style time tag; fixed width keeps directory listings ordered.
inline std::string time_tag(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", t);
  return buf;
}

inline std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + format_double(xs[i]);
  return s;
}

inline std::vector<double> split_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, what));
  return out;
}

/// Node classes as a scalar field: 0 interior, 1 boundary, 2 exterior.
inline ScalarField mask_field(const DomainMask& mask) {
  ScalarField f(mask.grid);
  for (std::size_t n = 0; n < f.size(); ++n) f[n] = static_cast<double>(mask.classes[n]);
  return f;
}

inline DomainMask mask_from_field(const ScalarField& f, double level) {
  DomainMask m;
  m.grid = f.grid;
  m.level = level;
  m.classes.resize(f.size());
  for (std::size_t n = 0; n < f.size(); ++n) {
    const int c = static_cast<int>(f[n]);
    if (c < 0 || c > 2 || static_cast<double>(c) != f[n])
      fail(ErrorCode::Io, "bad node class " + format_double(f[n]));
    m.classes[n] = static_cast<NodeClass>(c);
    if (c == 0) m.interior.push_back(n);
    if (c == 1) m.boundary.push_back(n);
  }
  return m;
}

/// Problem parameters, without the creation time.
inline KeyValues trajectory_manifest(const Trajectory& traj) {
  const auto& P = traj.problem;
  KeyValues kv;
  kv.set("format_version", kFieldFormatVersion);
  kv.set("label", traj.label);
  kv.set("dim", P.dim());
  kv.set("a_k", P.a_k);
  kv.set("alpha", P.alpha_target);
  kv.set("c", P.c);
  kv.set("h", P.spacing());
  kv.set("safety", traj.safety);
  kv.set("cadence", traj.cadence);
  kv.set("transition_width", P.options.transition_width);
  kv.set("cutoff", std::string(P.options.cutoff ? "true" : "false"));
  kv.set("modified_band", std::string(P.options.modified_band ? "true" : "false"));
  if (P.options.c_override) kv.set("c_override", *P.options.c_override);
  std::vector<double> times;
  for (const auto& s : traj.snapshots) times.push_back(s.t);
  kv.set("snapshot_times", join_doubles(times));
  kv.set("steps", traj.summary.count);
  kv.set("udot_min", traj.summary.udot_min);
  kv.set("udot_max", traj.summary.udot_max);
  kv.set("dt_min", traj.summary.dt_min);
  kv.set("dt_max", traj.summary.dt_max);
  return kv;
}

/// Writes problem fields, one u and one udot file per snapshot, the step log
/// (if recorded) and manifest.txt. `created` goes only into the manifest.
inline void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj,
                             const std::string& created = "") {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "problem");
  const auto& P = traj.problem;
  write_field(dir / "problem" / "u0.dat", P.u0);
  write_field(dir / "problem" / "alpha.dat", P.alpha_field);
  write_field(dir / "problem" / "xi.dat", P.xi_field);
  write_field(dir / "problem" / "G0.dat", P.G0);
  write_field(dir / "problem" / "mask.dat", mask_field(P.mask));
  for (const auto& s : traj.snapshots) {
    write_field(dir / ("u_t" + time_tag(s.t) + ".dat"), s.u);
    write_field(dir / ("udot_t" + time_tag(s.t) + ".dat"), ScalarField(P.grid(), s.udot));
  }
  if (!traj.steps.empty()) {
    std::ofstream out(dir / "steps.txt");
    out << "# t dt udot_min udot_max\n";
    for (const auto& r : traj.steps)
      out << format_double(r.t) << " " << format_double(r.dt) << " " << format_double(r.udot_min)
          << " " << format_double(r.udot_max) << "\n";
  }
  KeyValues kv = trajectory_manifest(traj);
  if (!created.empty()) kv.set("created", created);
  kv.write(dir / "manifest.txt");
}

/// Loads a directory written by write_trajectory. Derived fields are
/// recomputed from u; udot is taken from the stored files.
inline Trajectory read_trajectory(const std::filesystem::path& dir) {
  const KeyValues kv = KeyValues::read(dir / "manifest.txt");
  Trajectory traj;
  traj.label = kv.get("label").value_or("");
  traj.safety = kv.require_double("safety");
  traj.cadence = static_cast<int>(kv.require_double("cadence"));
  auto& P = traj.problem;
  P.a_k = kv.require_double("a_k");
  P.alpha_target = kv.require_double("alpha");
  P.c = kv.require_double("c");
  P.options.transition_width = kv.require_double("transition_width");
  P.options.cutoff = kv.require("cutoff") == "true";
  P.options.modified_band = kv.require("modified_band") == "true";
  if (auto c = kv.get("c_override")) P.options.c_override = parse_double(*c, "c_override");
  P.u0 = read_field(dir / "problem" / "u0.dat");
  P.alpha_field = read_field(dir / "problem" / "alpha.dat");
  P.xi_field = read_field(dir / "problem" / "xi.dat");
  P.G0 = read_field(dir / "problem" / "G0.dat");
  P.mask = mask_from_field(read_field(dir / "problem" / "mask.dat"), 0.0);
  if (!(P.alpha_field.grid == P.u0.grid) || !(P.xi_field.grid == P.u0.grid) ||
      !(P.G0.grid == P.u0.grid) || !(P.mask.grid == P.u0.grid))
    fail(ErrorCode::Io, dir.string() + ": problem fields live on different grids");

  traj.summary.count = static_cast<std::size_t>(kv.require_double("steps"));
  traj.summary.udot_min = kv.require_double("udot_min");
  traj.summary.udot_max = kv.require_double("udot_max");
  traj.summary.dt_min = kv.require_double("dt_min");
  traj.summary.dt_max = kv.require_double("dt_max");

  for (double t : split_doubles(kv.require("snapshot_times"), "snapshot_times")) {
    ScalarField u = read_field(dir / ("u_t" + time_tag(t) + ".dat"));
    if (!(u.grid == P.u0.grid)) fail(ErrorCode::Io, "snapshot grid differs from problem grid");
    GraphState s = make_state(P, std::move(u), t, false);
    const auto udot_path = dir / ("udot_t" + time_tag(t) + ".dat");
    if (std::filesystem::exists(udot_path)) s.udot = read_field(udot_path).values;
    traj.snapshots.push_back(std::move(s));
  }
  if (std::filesystem::exists(dir / "steps.txt")) {
    std::ifstream in(dir / "steps.txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto v = split_doubles(line, "steps.txt");
      if (v.size() != 4) fail(ErrorCode::Io, "steps.txt: expected 4 columns");
      traj.steps.push_back({v[0], v[1], v[2], v[3]});
    }
  }
  return traj;
}

}  // namespace hflow
