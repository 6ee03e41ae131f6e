#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hflow/estimates.hpp"
#include "hflow/presets.hpp"

using namespace hflow;

namespace {

constexpr double kPi = std::numbers::pi;

Trajectory grim_run(double h, double alpha, double t_end, int cadence = 0, double lift = 0.0) {
  ScalarField u0 = grim_reaper_initial(h);
  for (auto& v : u0.values) v += lift;
  const auto P = assemble_aux_problem(u0, 3.0 + lift, alpha);
  return evolve(P, {.t_end = t_end, .cadence = cadence});
}

Trajectory paraboloid_run(double h, double alpha, double t_end) {
  const auto P = assemble_aux_problem(paraboloid_initial(h, 2.5), 2.0, alpha);
  return evolve(P, {.t_end = t_end, .cadence = 100});
}

EstimateReport find(const std::vector<EstimateReport>& rs, const std::string& name) {
  for (const auto& r : rs)
    if (r.name == name) return r;
  throw std::runtime_error("missing report " + name);
}

}  // namespace

TEST(PsiField, Examples) {
  const Grid g = build_grid({1, {0, 0}, {1, 0}}, 0.5);
  EXPECT_EQ(psi_field(ScalarField(g, 0.0), 0.0, {2.0, 0.0}).values, std::vector<double>(3, 2.0));
  EXPECT_EQ(psi_field(ScalarField(g, 3.0), 0.0, {2.0, 0.0}).values, std::vector<double>(3, 0.0));
  EXPECT_EQ(psi_field(ScalarField(g, 0.5), 1.0, {2.0, 1.0}).values, std::vector<double>(3, 0.5));
}

TEST(PsiField, StateUsesRawHeights) {
  const auto traj = grim_run(kPi / 100, 1.0, 0.1);
  const auto& P = traj.problem;
  const auto& s = traj.snapshots.back();
  const auto psi = psi_field(s, P, {2.0, 0.5});
  for (std::size_t n : P.mask.interior)
    EXPECT_DOUBLE_EQ(psi[n], std::max(2.0 - 0.5 * s.t - (s.u[n] + 3.0), 0.0));
}

TEST(BoundConstants, Arithmetic) {
  EXPECT_EQ(gradient_bound_constant(10.0, 2.0, 1, {2.0, 1.0}), 0.5);
  EXPECT_EQ(gradient_bound_constant(0.3, 2.0, 1, {2.0, 1.0}), 0.3);
  EXPECT_EQ(gradient_bound_constant(10.0, 3.0, 2, {2.0, 100.0}), 0.75);
  EXPECT_EQ(gradient_bound_constant(10.0, 1.0, 2, {2.0, 1.0}), 10.0);
  EXPECT_EQ(speed_lower_bound_constant(10.0, 3.0, {2.0, 2.0}), 0.5);
  EXPECT_EQ(speed_lower_bound_constant(10.0, 0.5, {2.0, 2.0}), 10.0);
}

TEST(GradientLocalized, GrimReaperMinimumIsOneOverE) {
  // Exact profile: w = cos x, psi = 2 - t + log cos x. The minimum of
  // cos x / psi is e^{t-1}, attained at log cos x = t - 1, so the infimum over
  // the run is the initial one, 1/e.
  const auto traj = grim_run(kPi / 200, 1.0, 0.5, 500);
  const auto r = check_gradient_localized(traj, {2.0, 0.0}, 1.0);
  EXPECT_EQ(r.status, CheckStatus::Pass);
  EXPECT_NEAR(r.bound, std::exp(-1.0), 1e-3);
  EXPECT_NEAR(r.observed, std::exp(-1.0), 1e-3);
  EXPECT_GE(r.margin, -r.tolerance);
}

TEST(GradientLocalized, BoundIgnoresBForAlphaAtMostOne) {
  const auto traj = grim_run(kPi / 100, 1.0, 0.3, 100);
  const auto r0 = check_gradient_localized(traj, {2.0, 0.0}, 1.0);
  const auto r1 = check_gradient_localized(traj, {2.0, 0.7}, 1.0);
  EXPECT_EQ(r0.bound, r1.bound);
  EXPECT_TRUE(r1.ok());
}

TEST(GradientLocalized, AlphaTwoWithTimeSlope) {
  const auto traj = grim_run(kPi / 100, 2.0, 0.5, 200);
  const LocalizationWindow win{2.0, 1.0};
  const auto r = check_gradient_localized(traj, win, 2.0);
  EXPECT_TRUE(r.ok()) << format_report(r);
  EXPECT_LE(r.bound, 0.5);
  const auto s = check_speed_lower_localized(traj, win, 2.0);
  EXPECT_TRUE(s.ok()) << format_report(s);
  EXPECT_LE(s.bound, 0.5);
}

TEST(GradientLocalized, WindowTooHigh) {
  const auto traj = grim_run(kPi / 100, 2.0, 0.1);
  try {
    check_gradient_localized(traj, {2.6, 0.0}, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowTooHigh);
  }
  EXPECT_THROW(check_speed_lower_localized(traj, {2.6, 0.0}, 2.0), Error);
  EXPECT_THROW(check_gradient_localized(traj, {0.0, 0.0}, 2.0), Error);
}

TEST(SpeedLowerLocalized, GrimReaperMatchesGradient) {
  // For the grim reaper H = cos x = w, so both audits see the same quantity.
  const auto traj = grim_run(kPi / 200, 1.0, 0.5, 500);
  const auto g = check_gradient_localized(traj, {2.0, 0.0}, 1.0);
  const auto s = check_speed_lower_localized(traj, {2.0, 0.0}, 1.0);
  EXPECT_EQ(s.status, CheckStatus::Pass);
  EXPECT_NEAR(s.bound, g.bound, 1e-4);
  EXPECT_NEAR(s.observed, g.observed, 1e-4);
}

TEST(SpeedLowerLocalized, EmptyWindowIsVacuous) {
  const auto traj = grim_run(kPi / 100, 1.0, 0.1, 0, 1.0);
  EXPECT_EQ(check_speed_lower_localized(traj, {0.5, 0.0}, 1.0).status, CheckStatus::Vacuous);
  EXPECT_EQ(check_gradient_localized(traj, {0.5, 0.0}, 1.0).status, CheckStatus::Vacuous);
  EXPECT_EQ(check_H_upper_localized(traj, {0.5, 0.0}, 0.5).status, CheckStatus::Vacuous);
}

TEST(HUpperLocalized, GrimReaperRatioIsOne) {
  // psi H = (2 - t + log c) c is maximal at x = 0, t = 0 with value 2, so the
  // ratio is 2 / max{2, 1} = 1.
  const auto coarse = grim_run(kPi / 100, 1.0, 0.5, 200);
  const auto fine = grim_run(kPi / 200, 1.0, 0.5, 800);
  const auto rc = check_H_upper_localized(coarse, {2.0, 0.0}, chained_wbar(coarse, {2.0, 0.0}));
  const auto rf = check_H_upper_localized(fine, {2.0, 0.0}, chained_wbar(fine, {2.0, 0.0}));
  EXPECT_NEAR(rc.observed, 1.0, 1e-3);
  EXPECT_NEAR(rf.observed, 1.0, 1e-3);
  EXPECT_EQ(compare_refinement(rc, rf).status, CheckStatus::Pass);
  EXPECT_THROW(check_H_upper_localized(coarse, {2.0, 0.5}, 0.1), Error);
}

TEST(HUpperLocalized, GradientHypothesisThreshold) {
  // On {psi > 0} with a = -log 0.9, w = cos x > 0.9.
  const auto traj = grim_run(kPi / 200, 1.0, 0.0);
  const LocalizationWindow win{-std::log(0.9), 0.0};
  try {
    check_H_upper_localized(traj, win, 0.6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GradientHypothesisFailed);
  }
  EXPECT_NO_THROW(check_H_upper_localized(traj, win, 0.4));
  const double wbar = chained_wbar(traj, win);
  EXPECT_GT(2 * wbar, 0.9);
  EXPECT_NO_THROW(check_H_upper_localized(traj, win, wbar));
  EXPECT_THROW(check_H_upper_localized(traj, win, wbar * 1.001), Error);
}

TEST(HUpperLocalized, SingleSnapshotRatioIsOne) {
  const auto traj = grim_run(kPi / 100, 1.0, 0.0);
  const LocalizationWindow win{2.0, 0.0};
  EXPECT_DOUBLE_EQ(check_H_upper_localized(traj, win, chained_wbar(traj, win)).observed, 1.0);
}

TEST(CurvatureLocalized, GrimReaper) {
  const auto traj = grim_run(kPi / 100, 1.0, 0.5, 200);
  const LocalizationWindow win{2.0, 0.0};
  const double cb = chained_cbound(traj, win, 1.0);
  const double wb = chained_wbar(traj, win);
  const auto r = check_curvature_localized(traj, win, cb, wb);
  // |A| = kappa = H for curves.
  EXPECT_NEAR(r.observed, check_H_upper_localized(traj, win, wb).observed, 1e-12);
  EXPECT_EQ(r.status, CheckStatus::Pass);
  try {
    check_curvature_localized(traj, win, cb * 1.01, wb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HHypothesisFailed);
  }
}

TEST(CurvatureLocalized, ParaboloidAlphaTwoStableUnderRefinement) {
  const LocalizationWindow win{1.0, 0.0};
  std::vector<EstimateReport> rs;
  for (double h : {0.05, 0.025}) {
    const auto traj = paraboloid_run(h, 2.0, 0.2);
    rs.push_back(check_curvature_localized(traj, win, chained_cbound(traj, win, 2.0),
                                           chained_wbar(traj, win)));
    EXPECT_EQ(rs.back().status, CheckStatus::Pass);
  }
  EXPECT_EQ(compare_refinement(rs[0], rs[1]).status, CheckStatus::Pass);
}

TEST(ProgramBounds, GrimReaperAllPass) {
  const auto traj = grim_run(kPi / 200, 1.0, 0.5, 1000);
  const auto reports = check_program_bounds(traj);
  ASSERT_EQ(reports.size(), 5u);
  for (const auto& r : reports) EXPECT_TRUE(r.ok()) << format_report(r);
  // At t = 0 the cut-off nodes move with speed c exactly.
  const auto speed = find(reports, "program_1_speed");
  EXPECT_EQ(speed.bound, traj.problem.c);
  EXPECT_LE(std::abs(speed.margin), 1e-13);
}

TEST(ProgramBounds, ParaboloidCorpusAllPass) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto reports = check_program_bounds(paraboloid_run(0.05, alpha, 0.2));
    for (const auto& r : reports) EXPECT_TRUE(r.ok()) << alpha << " " << format_report(r);
  }
}

TEST(ProgramBounds, PerturbedSnapshotFailsHeightItem) {
  auto traj = grim_run(kPi / 100, 1.0, 0.5, 300);
  const auto& P = traj.problem;
  {
    auto t = traj;
    t.snapshots.back().u[P.grid().index(P.grid().extents()[0] / 2)] -= 0.1;
    const auto r = find(check_program_bounds(t), "program_2_height");
    EXPECT_EQ(r.status, CheckStatus::Fail);
    EXPECT_LT(r.margin, -0.05);
  }
  {
    std::size_t top = P.mask.interior.front();
    for (std::size_t n : P.mask.interior)
      if (P.u0[n] > P.u0[top]) top = n;
    auto t = traj;
    t.snapshots.back().u[top] += 1.0;
    const auto r = find(check_program_bounds(t), "program_2_height");
    EXPECT_EQ(r.status, CheckStatus::Fail);
    EXPECT_EQ(r.formula, "u - c t <= max boundary offset");
  }
}

TEST(Reports, FormatParseRoundTrip) {
  EstimateReport r;
  r.name = "gradient_localized";
  r.window = {2.0, 0.5};
  r.h = 0.01;
  r.observed = 0.36787944117144233;
  r.bound = 0.1 / 3;
  r.margin = r.observed - r.bound;
  r.tolerance = 1e-3;
  r.status = CheckStatus::Vacuous;
  const std::string line = format_report(r);
  EXPECT_EQ(line.rfind("check=gradient_localized a=2 b=0.5 h=0.01 observed=", 0), 0u);
  const auto back = parse_report(line);
  EXPECT_EQ(back.name, r.name);
  EXPECT_EQ(back.window.b, 0.5);
  EXPECT_EQ(back.observed, r.observed);
  EXPECT_EQ(back.bound, r.bound);
  EXPECT_EQ(back.margin, r.margin);
  EXPECT_EQ(back.status, CheckStatus::Vacuous);
  EXPECT_THROW(parse_report("observed=1"), Error);
  EXPECT_THROW(parse_report("check=x status=MAYBE"), Error);
}

TEST(Reports, StatusFollowsMarginAndTolerance) {
  auto traj = grim_run(kPi / 100, 1.0, 0.0);
  for (const auto& r : check_program_bounds(traj, 10.0))
    EXPECT_EQ(r.status == CheckStatus::Pass, r.margin >= -r.tolerance) << r.name;
  EXPECT_DOUBLE_EQ(discretization_slack(0.1, 10.0), 0.1);
}
