#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hflow/app.hpp"
#include "hflow/estimates.hpp"
#include "hflow/presets.hpp"
#include "hflow/trajectory_io.hpp"

using namespace hflow;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() /
            ("hflow_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(root_);
  }

  fs::path write_config(const std::string& name, const std::string& body) {
    const auto p = root_ / name;
    std::ofstream(p) << body;
    return p;
  }

  /// Runs the CLI; stderr lands in root_/stderr.txt.
  int cli(const std::string& args) {
    const std::string cmd =
        std::string(HFLOW_CLI_PATH) + " " + args + " > " + (root_ / "stdout.txt").string() +
        " 2> " + (root_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  std::string err() { return slurp(root_ / "stderr.txt"); }

  fs::path root_;
};

const char* kGrimAux =
    "# grim reaper, small\n"
    "preset=grim-reaper\n"
    "alpha=1\n"
    "h=0.0628318530717958648\n"
    "heights=2.5\n"
    "t_end=0.1\n"
    "schedule=0.05\n";

}  // namespace

TEST(Config, RoundTripsThroughKeyValues) {
  RunConfig c;
  c.mode = Mode::Cascade;
  c.preset = "paraboloid";
  c.alpha = 0.5;
  c.h = 0.1 / 3.0;
  c.heights = {4.0, 5.0, 6.25};
  c.schedule = {0.1, 0.2};
  c.c = 0.75;
  c.window_a = 2.0;
  c.window_b = 1.0 / 7.0;
  c.t_star = 0.3;
  c.record_steps = true;
  c.workers = 3;
  std::ostringstream os;
  to_key_values(c).write(os);
  std::istringstream is(os.str());
  EXPECT_EQ(from_key_values(KeyValues::parse(is)), c);

  RunConfig d;  // defaults, optionals unset
  std::ostringstream os2;
  to_key_values(d).write(os2);
  std::istringstream is2(os2.str());
  EXPECT_EQ(from_key_values(KeyValues::parse(is2)), d);
}

TEST(Config, ValidationNamesTheField) {
  auto message = [](const std::string& text) -> std::string {
    std::istringstream is(text);
    try {
      from_key_values(KeyValues::parse(is));
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Config);
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message("h=-0.1\n").find("h:"), std::string::npos);
  EXPECT_NE(message("alpha=0\n").find("alpha:"), std::string::npos);
  EXPECT_NE(message("safety=1.5\n").find("safety:"), std::string::npos);
  EXPECT_NE(message("frobnicate=1\n").find("frobnicate: unknown key"), std::string::npos);
  EXPECT_NE(message("h=abc\n").find("h: not a finite number"), std::string::npos);
  EXPECT_NE(message("heights=3 2\n").find("heights:"), std::string::npos);
  EXPECT_NE(message("mode=cascade\nheights=3\n").find("heights:"), std::string::npos);
  EXPECT_NE(message("mode=cascade\nheights=2 3\nconvergence_a=0.5\n").find("convergence_a:"),
            std::string::npos);
  EXPECT_NE(message("mode=verify\n").find("input:"), std::string::npos);
  EXPECT_NE(message("preset=circle\n").find("preset:"), std::string::npos);
  EXPECT_NE(message("mode=oracle-compare\nalpha=2\n").find("alpha:"), std::string::npos);
  EXPECT_NE(message("mode=nonsense\n").find("mode:"), std::string::npos);
}

TEST_F(CliTest, MalformedConfigExitsTwo) {
  const auto cfg = write_config("bad.cfg", "preset=grim-reaper\nh=-0.01\n");
  EXPECT_EQ(cli("solve-aux --config " + cfg.string() + " --out " + (root_ / "o").string()), 2);
  EXPECT_NE(err().find("h: must be > 0"), std::string::npos);
  EXPECT_FALSE(fs::exists(root_ / "o"));

  const auto mismatch = write_config("m.cfg", "mode=curve\npreset=circle\n");
  EXPECT_EQ(cli("cascade --config " + mismatch.string()), 2);
  EXPECT_NE(err().find("mode:"), std::string::npos);

  EXPECT_EQ(cli("solve-aux"), 2);  // --config is required
  EXPECT_EQ(cli("bogus --config " + cfg.string()), 2);
  EXPECT_EQ(cli("solve-aux --config " + (root_ / "missing.cfg").string()), 2);
}

TEST_F(CliTest, CurveCircleWritesRadiusSeriesAndIdentities) {
  const auto cfg = write_config("curve.cfg",
                                "preset=circle\nalpha=2\nmarkers=200\ndt=1e-4\nt_end=0.2\n"
                                "snapshot_every=1\n");
  const auto out = root_ / "curve";
  ASSERT_EQ(cli("curve --config " + cfg.string() + " --out " + out.string()), 0) << err();
  std::ifstream radius(out / "radius.txt");
  std::string line, last;
  std::getline(radius, line);
  EXPECT_EQ(line, "# t radius exact");
  while (std::getline(radius, line)) last = line;
  std::istringstream row(last);
  double t, R, exact;
  ASSERT_TRUE(row >> t >> R >> exact);
  EXPECT_DOUBLE_EQ(t, 0.2);
  EXPECT_NEAR(exact, 0.73681, 1e-5);
  EXPECT_NEAR(R, exact, 1e-3);
  const auto ident = KeyValues::read(out / "identities.txt");
  EXPECT_TRUE(ident.get("samples").has_value());
  EXPECT_NE(slurp(out / "identities.txt").find("identity=speed residual="), std::string::npos);
  EXPECT_EQ(read_config(out / "config.txt").preset, "circle");
}

TEST_F(CliTest, SolveAuxOutputsReadBackAndMatchLibrary) {
  const auto cfg = write_config("aux.cfg", kGrimAux);
  const auto out = root_ / "aux";
  ASSERT_EQ(cli("solve-aux --config " + cfg.string() + " --out " + out.string()), 0) << err();
  const Trajectory traj = read_trajectory(out);
  ASSERT_EQ(traj.snapshots.size(), 3u);

  RunConfig c = read_config(out / "config.txt");
  EXPECT_EQ(c.output, out.string());
  const auto P = assemble_aux_problem(grim_reaper_initial(c.h), 2.5, 1.0);
  EvolveOptions eo;
  eo.t_end = 0.1;
  eo.schedule = {0.05};
  const auto direct = evolve(P, eo);
  for (std::size_t j = 0; j < direct.snapshots.size(); ++j)
    EXPECT_EQ(traj.snapshots[j].u.values, direct.snapshots[j].u.values);

  const auto reports = read_reports(out / "reports.txt");
  EXPECT_EQ(reports.size(), 5u);
  for (const auto& r : reports) EXPECT_TRUE(r.ok()) << format_report(r);
  const auto compat = KeyValues::read(out / "compatibility.txt");
  EXPECT_LE(std::abs(compat.require_double("order01")), 1e-13);
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  const auto cfg = write_config("aux.cfg", kGrimAux);
  ASSERT_EQ(cli("solve-aux --config " + cfg.string() + " --out " + (root_ / "a").string()), 0);
  ASSERT_EQ(cli("solve-aux --config " + cfg.string() + " --out " + (root_ / "b").string()), 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root_ / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root_ / "a");
    if (rel == "manifest.txt" || rel == "config.txt") continue;  // timestamp, output path
    EXPECT_EQ(slurp(e.path()), slurp(root_ / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 8u);
  // Manifests differ at most in the creation time.
  auto strip = [&](const fs::path& p) {
    KeyValues kv = KeyValues::read(p);
    kv.set("created", std::string());
    std::ostringstream os;
    kv.write(os);
    return os.str();
  };
  EXPECT_EQ(strip(root_ / "a" / "manifest.txt"), strip(root_ / "b" / "manifest.txt"));
}

TEST_F(CliTest, VerifyPassesCleanAndFailsTampered) {
  const auto out = root_ / "aux";
  ASSERT_EQ(cli("solve-aux --config " + write_config("aux.cfg", kGrimAux).string() + " --out " +
                out.string()),
            0);
  const auto vcfg = write_config("verify.cfg", "input=" + out.string() + "\n");
  ASSERT_EQ(cli("verify --config " + vcfg.string() + " --out " + (root_ / "v1").string()), 0)
      << err();

  // Lift one interior node of the last snapshot by 1; the audit must name a failing check.
  const Trajectory traj = read_trajectory(out);
  const auto& last = traj.snapshots.back();
  ScalarField u = last.u;
  u[traj.problem.mask.interior[traj.problem.mask.interior.size() / 2]] += 1.0;
  write_field(out / ("u_t" + time_tag(last.t) + ".dat"), u);
  EXPECT_EQ(cli("verify --config " + vcfg.string() + " --out " + (root_ / "v2").string()), 1);
  EXPECT_NE(err().find("check=program_"), std::string::npos) << err();
  EXPECT_NE(err().find("status=FAIL"), std::string::npos) << err();
  EXPECT_TRUE(fs::exists(root_ / "v2" / "reports.txt"));

  // A truncated field is an IO failure, not a config error.
  std::ofstream(out / "problem" / "u0.dat") << "garbage\n";
  EXPECT_EQ(cli("verify --config " + vcfg.string() + " --out " + (root_ / "v3").string()), 1);
}

TEST_F(CliTest, OracleCompareAndSweep) {
  const auto cfg = write_config("oracle.cfg", std::string(kGrimAux) + "oracle_tol=1e-2\n");
  const auto out = root_ / "oracle";
  ASSERT_EQ(cli("oracle-compare --config " + cfg.string() + " --out " + out.string() +
                " --resolution-sweep 1"),
            0)
      << err();
  EXPECT_TRUE(fs::exists(out / "level0" / "oracle.txt"));
  EXPECT_TRUE(fs::exists(out / "level1" / "oracle.txt"));
  std::ifstream sweep(out / "sweep.txt");
  std::string line;
  std::getline(sweep, line);
  EXPECT_EQ(line, "# level h metric value ratio_to_previous");
  double ratio = 0;
  while (std::getline(sweep, line)) {
    std::istringstream row(line);
    int level;
    double h, value;
    std::string metric, r;
    row >> level >> h >> metric >> value >> r;
    if (level == 1 && metric == "oracle.max_error") ratio = std::stod(r);
  }
  EXPECT_GT(ratio, 3.0);  // second order in h

  const auto strict = write_config("strict.cfg", std::string(kGrimAux) + "oracle_tol=1e-9\n");
  EXPECT_EQ(cli("oracle-compare --config " + strict.string() + " --out " +
                (root_ / "strict").string()),
            1);
  EXPECT_NE(err().find("oracle error"), std::string::npos);
}

TEST_F(CliTest, CascadeWritesReadableFields) {
  const auto cfg = write_config(
      "cascade.cfg",
      "preset=grim-reaper\nh=0.0314159265358979324\nheights=2.5 3\nt_end=0.2\n"
      "schedule=0.1\nworkers=2\nconvergence_a=0.4\n");
  const auto out = root_ / "cascade";
  ASSERT_EQ(cli("cascade --config " + cfg.string() + " --out " + out.string()), 0) << err();
  for (const char* k : {"k0", "k1"}) {
    const auto v = read_field(out / k / ("v_t" + time_tag(0.2) + ".dat"));
    EXPECT_EQ(v.grid.extents()[0], grim_reaper_initial(std::numbers::pi / 100).grid.extents()[0]);
  }
  EXPECT_TRUE(fs::exists(out / "convergence.txt"));
  EXPECT_TRUE(fs::exists(out / "oracle.txt"));
  EXPECT_EQ(KeyValues::read(out / "manifest.txt").require("heights"), "2.5 3");
}

TEST_F(CliTest, NonpositiveMeanCurvatureAbortsWithSnapshot) {
  // A saddle-shaped custom field is not mean convex at assembly.
  const Grid g = symmetric_grid(2, 0.1, 15);
  write_field(root_ / "saddle.dat", sample(g, [](double x, double y) { return x * x - y * y + 3; }));
  const auto cfg = write_config(
      "s.cfg", "preset=custom\ninput=" + (root_ / "saddle.dat").string() + "\nheights=3.5\n");
  EXPECT_EQ(cli("solve-aux --config " + cfg.string() + " --out " + (root_ / "s").string()), 1);
  EXPECT_FALSE(err().empty());
}
