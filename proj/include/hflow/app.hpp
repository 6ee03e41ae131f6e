#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hflow/config.hpp"
#include "hflow/solver.hpp"

namespace hflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

struct RunResult {
  int exit_code = kExitOk;
  /// Named scalar outcomes; a resolution sweep tabulates them per level.
  std::map<std::string, double> metrics;
  std::vector<std::string> failures;
};

namespace app {

/// max |u + a_k - (u0_raw + t)| over INTERIOR nodes below `a`, per snapshot.
std::vector<std::pair<double, double>> translation_errors(const Trajectory& traj, double a);

}  // namespace app

/// Runs one configuration into `out`. Errors other than configuration errors
/// become exit 1 with the message in `failures`.
RunResult run(const RunConfig& config, const std::filesystem::path& out);

/// Repeats the run at h, h/2, ..., h/2^levels in out/level<i> and writes
/// out/sweep.txt with one row per level and metric, plus the ratio to the
/// previous level.
RunResult run_resolution_sweep(const RunConfig& config, const std::filesystem::path& out,
                               int levels);

}  // namespace hflow
