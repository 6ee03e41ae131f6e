#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hflow/cascade.hpp"
#include "hflow/curve_lab.hpp"
#include "hflow/presets.hpp"

using namespace hflow;

namespace {

constexpr double kPi = std::numbers::pi;

template <class F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

double order(double coarse, double fine, double factor = 2.0) {
  return std::log(coarse / fine) / std::log(factor);
}

/// Runs with ds halved and dt quartered per level (parabolic scaling).
std::vector<IdentityResiduals> parabolic_study(bool circle, double alpha, int levels) {
  std::vector<IdentityResiduals> out;
  for (int l = 0; l < levels; ++l) {
    const double dt = 4e-5 / std::pow(4.0, l);
    const auto c = circle ? circle_curve(1.0, 64u << l) : grim_reaper_curve(2.0, (40u << l) + 1);
    out.push_back(verify_evolution_identities(evolve_markers(c, alpha, dt, 4), 4));
  }
  return out;
}

}  // namespace

TEST(GrimReaperProfile, Examples) {
  EXPECT_EQ(grim_reaper(0.0, 0.0), 0.0);
  EXPECT_EQ(grim_reaper(0.0, 1.5), 1.5);
  EXPECT_NEAR(grim_reaper(kPi / 3, 0.0), std::log(2.0), 1e-15);
  EXPECT_EQ(code_of([] { grim_reaper(kPi / 2, 0.0); }), ErrorCode::OutOfDomain);
  EXPECT_EQ(code_of([] { grim_reaper(-2.0, 0.0); }), ErrorCode::OutOfDomain);
}

TEST(GrimReaperProfile, SolvesGraphEquation) {
  // u_t = sqrt(1 + u_x^2) kappa with kappa = u_xx / (1 + u_x^2)^(3/2); centered differences.
  const double d = 1e-4;
  for (double x : {-1.2, -0.5, 0.0, 0.3, 1.4}) {
    const double ux = (grim_reaper(x + d, 0) - grim_reaper(x - d, 0)) / (2 * d);
    const double uxx =
        (grim_reaper(x + d, 0) - 2 * grim_reaper(x, 0) + grim_reaper(x - d, 0)) / (d * d);
    const double ut = (grim_reaper(x, 1e-3) - grim_reaper(x, -1e-3)) / 2e-3;
    EXPECT_NEAR(ut, uxx / (1 + ux * ux), 1e-5 * (1 + ux * ux));
  }
}

TEST(Translator, AlphaOneIsGrimReaper) {
  const auto p = translator_profile(1.0, 1.5, 1e-12, 0.01);
  EXPECT_FALSE(p.blew_up);
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    EXPECT_NEAR(p.phi[i], -std::log(std::cos(p.x[i])), 1e-9 * (1 + p.phi[i]));
    EXPECT_NEAR(p.dphi[i], std::tan(p.x[i]), 1e-9 * (1 + p.dphi[i] * p.dphi[i]));
  }
  const auto full = translator_profile(1.0, 2.0, 1e-12, 0.01);
  EXPECT_TRUE(full.blew_up);
  EXPECT_NEAR(full.x_end, kPi / 2, 1e-6);
}

TEST(Translator, AlphaTwoReferenceValues) {
  const auto v = translator_values(2.0, {1.195, -1.195, 0.0}, 1e-10);
  EXPECT_NEAR(v[0][0], 1.66476, 5e-5);
  EXPECT_NEAR(v[0][1], 35.58, 5e-3);
  EXPECT_EQ(v[1][0], v[0][0]);  // even profile, odd slope
  EXPECT_EQ(v[1][1], -v[0][1]);
  EXPECT_EQ(v[2][0], 0.0);
  const auto p = translator_profile(2.0, 1.3, 1e-10);
  EXPECT_TRUE(p.blew_up);
  EXPECT_NEAR(p.x_end, 1.19814, 2e-4);
  EXPECT_EQ(code_of([] { translator_values(2.0, {1.25}, 1e-10); }), ErrorCode::OutOfDomain);
  EXPECT_EQ(code_of([] { translator_profile(0.0, 1.0, 1e-10); }), ErrorCode::InvalidArgument);
}

TEST(Translator, SatisfiesOde) {
  // phi'' recovered from the sampled slope matches the right side; phi''(0) = 1.
  for (double alpha : {0.5, 2.0, 3.0}) {
    const double e = (3 * alpha - 1) / (2 * alpha);
    const auto p = translator_profile(alpha, 0.8, 1e-11, 1e-3);
    ASSERT_FALSE(p.blew_up);
    for (std::size_t i = 1; i + 1 < p.x.size(); i += 50) {
      const double dd = (p.dphi[i + 1] - p.dphi[i - 1]) / 2e-3;
      EXPECT_NEAR(dd, std::pow(1 + p.dphi[i] * p.dphi[i], e), 1e-5 * dd);
    }
    EXPECT_NEAR((p.dphi[1] - p.dphi[0]) / 1e-3, 1.0, 1e-3);
  }
  // Where phi' = 1 at alpha = 2 the ODE gives phi'' = 2^(5/4).
  EXPECT_NEAR(std::pow(2.0, 5.0 / 4.0), 2.37841, 1e-5);
  const auto p = translator_profile(2.0, 1.0, 1e-11, 1e-4);
  std::size_t i = 0;
  while (p.dphi[i] < 1.0) ++i;
  EXPECT_NEAR((p.dphi[i + 1] - p.dphi[i - 1]) / 2e-4, 2.37841, 1e-3);
}

TEST(CircleRadius, Examples) {
  EXPECT_DOUBLE_EQ(circle_radius(1.0, 1.0, 0.375), 0.5);
  EXPECT_EQ(circle_radius(2.0, 1.7, 0.0), 1.7);
  EXPECT_NEAR(circle_radius(2.0, 1.0, 0.2), std::cbrt(0.4), 1e-15);
  EXPECT_NEAR(std::cbrt(0.4), 0.73681, 1e-5);
  EXPECT_EQ(code_of([] { circle_radius(1.0, 1.0, 0.5); }), ErrorCode::Extinct);
  EXPECT_EQ(code_of([] { circle_radius(2.0, 1.0, 0.4); }), ErrorCode::Extinct);
  EXPECT_DOUBLE_EQ(extinction_time(0.5, 1.0), 2.0 / 3.0);
}

TEST(MarkerGeometryTest, RegularPolygonIsExact) {
  for (double R : {0.5, 2.0}) {
    const auto c = circle_curve(R, 200);
    const auto g = marker_geometry(c);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      // Chord-based kappa of an inscribed regular polygon is 1/R exactly,
      // and nu points to the centre.
      EXPECT_NEAR(g.kappa[i], 1.0 / R, 1e-9 / R);
      EXPECT_NEAR(g.nu[i][0] * c.points[i][0] + g.nu[i][1] * c.points[i][1], -R, 1e-12);
    }
  }
}

TEST(MarkerGeometryTest, GrimReaperArcCurvature) {
  // On the grim reaper kappa = cos x = w; second order in ds away from the ends.
  double e1 = 0, e2 = 0;
  for (int l = 0; l < 2; ++l) {
    const auto c = grim_reaper_curve(2.0, (80u << l) + 1);
    const auto g = marker_geometry(c);
    double e = 0;
    for (std::size_t i = 1; i + 1 < c.points.size(); ++i) {
      e = std::max(e, std::abs(g.kappa[i] - std::cos(c.points[i][0])));
      const double ds = 4.0 / static_cast<double>(c.points.size() - 1);
      EXPECT_NEAR(g.nu[i][1], std::cos(c.points[i][0]), ds * ds);
    }
    (l == 0 ? e1 : e2) = e;
  }
  EXPECT_GT(order(e1, e2), 1.8);
  EXPECT_EQ(code_of([] { marker_geometry(MarkerCurve{{{0, 0}, {1, 0}, {2, 0}}, false}); }),
            ErrorCode::InvalidArgument);
}

TEST(EvolveMarkers, UnitCircleAlphaOne) {
  MarkerOptions opt;
  opt.snapshot_every = 1000;
  const auto tr = evolve_markers(circle_curve(1.0, 1000), 1.0, 1e-4, 3750, opt);
  ASSERT_EQ(tr.snapshots.size(), 5u);
  EXPECT_DOUBLE_EQ(tr.snapshots.back().t, 0.375);
  EXPECT_NEAR(mean_radius(tr.snapshots.back()), 0.5, 1e-4);
  EXPECT_GT(tr.substeps_max, 1u);  // dt above the explicit limit is sub-stepped
}

TEST(EvolveMarkers, RadiusMatchesClosedFormForAllAlpha) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const double T = 0.5 * extinction_time(alpha, 1.0);
    const int steps = 500;
    const auto tr = evolve_markers(circle_curve(1.0, 400), alpha, T / steps, steps,
                                   {.snapshot_every = steps});
    EXPECT_NEAR(mean_radius(tr.snapshots.back()), circle_radius(alpha, 1.0, T), 1e-3) << alpha;
  }
  const auto tr = evolve_markers(circle_curve(1.0, 400), 2.0, 1e-3, 200, {.snapshot_every = 200});
  EXPECT_NEAR(mean_radius(tr.snapshots.back()), 0.73681, 1e-3);
}

TEST(EvolveMarkers, Errors) {
  MarkerCurve segment{{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}, false};
  EXPECT_EQ(code_of([&] { evolve_markers(segment, 1.0, 1e-3, 1); }), ErrorCode::NonpositiveKappa);
  // Clockwise circle: nu points outward, kappa < 0.
  auto cw = circle_curve(1.0, 50);
  std::reverse(cw.points.begin(), cw.points.end());
  EXPECT_EQ(code_of([&] { evolve_markers(cw, 1.0, 1e-3, 1); }), ErrorCode::NonpositiveKappa);
  EXPECT_EQ(code_of([] { evolve_markers(circle_curve(1, 50), 1.0, 0.0, 1); }),
            ErrorCode::InvalidArgument);
  // Running past extinction collapses the polygon.
  EXPECT_THROW(evolve_markers(circle_curve(0.1, 50), 1.0, 1e-3, 20), Error);
}

TEST(EvolveMarkers, ReparametrizationKeepsCircle) {
  MarkerOptions opt;
  opt.reparametrize_every = 10;
  opt.snapshot_every = 100;
  const auto tr = evolve_markers(circle_curve(1.0, 300), 1.0, 1e-3, 100, opt);
  const auto& c = tr.snapshots.back();
  const double R = circle_radius(1.0, 1.0, 0.1);
  for (const auto& p : c.points) EXPECT_NEAR(std::hypot(p[0], p[1]), R, 1e-3);
  // Arclength spacing is uniform after a reparametrization step.
  const auto g = marker_geometry(c);
  for (double ds : g.ds) EXPECT_NEAR(ds, g.ds[0], 1e-9);
}

TEST(EvolveMarkers, GrimReaperArcAgreesWithGridSolver) {
  const double h = kPi / 100;
  const auto P = assemble_aux_problem(grim_reaper_initial(h), 3.0, 1.0);
  EvolveOptions eo;
  eo.t_end = 0.25;
  const auto v = extend_solution(evolve(P, eo)).back().v;
  const auto tr = evolve_markers(grim_reaper_curve(3.5, 281), 1.0, 1e-4, 2500,
                                 {.snapshot_every = 2500});
  // The free ends use extrapolated curvature; s_max = 3.5 keeps their error
  // away from the overlap.
  const auto& c = tr.snapshots.back();
  double dev = 0, dev_exact = 0;
  for (const auto& p : c.points) {
    if (p[1] > 1.25) continue;  // overlap below the auxiliary band
    const double s = (p[0] - v.grid.origin()[0]) / h;
    const auto i = static_cast<std::size_t>(std::floor(s));
    const double f = s - static_cast<double>(i);
    const double vi = (1 - f) * v[i] + f * v[i + 1];
    // Linear interpolation adds h^2 u_xx / 8 at most.
    dev = std::max(dev, std::abs(p[1] - vi));
    dev_exact = std::max(dev_exact, std::abs(p[1] - grim_reaper(p[0], 0.25)));
  }
  EXPECT_LT(dev_exact, 1e-4);
  EXPECT_LT(dev, 2 * h * h);
}

TEST(Identities, InsufficientSnapshots) {
  const auto tr = evolve_markers(circle_curve(1.0, 40), 1.0, 1e-4, 1);
  EXPECT_EQ(code_of([&] { verify_evolution_identities(tr); }), ErrorCode::InsufficientSnapshots);
  EXPECT_EQ(code_of([&] { identity_residual_fields(tr, 0); }), ErrorCode::InsufficientSnapshots);
}

TEST(Identities, CircleReducesToClosedForm) {
  // On a circle of radius R all spatial terms vanish; d/dt R^(-alpha) over
  // alpha R^(1-alpha) equals R^(-2-alpha) = kappa^2 kappa^alpha.
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto r = parabolic_study(true, alpha, 3);
    for (const auto& x : r) {
      EXPECT_LT(x.w, 1e-8);  // w = nu_y obeys its identity exactly on a polygon circle
      EXPECT_GT(x.samples, 0u);
    }
    for (int l = 0; l + 1 < 3; ++l) {
      // dt quarters per level: first order in dt.
      EXPECT_GT(order(r[l].speed, r[l + 1].speed, 4.0), 0.85) << alpha;
      EXPECT_GT(order(r[l].height, r[l + 1].height, 4.0), 0.85) << alpha;
      EXPECT_GT(order(r[l].curvature, r[l + 1].curvature, 4.0), 0.85) << alpha;
    }
    EXPECT_LT(r.back().speed, 1e-5);
  }
}

TEST(Identities, GrimReaperConvergesSecondOrderInDs) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto r = parabolic_study(false, alpha, 3);
    for (int l = 0; l + 1 < 3; ++l) {
      EXPECT_GT(order(r[l].w, r[l + 1].w), 1.7) << alpha;
      EXPECT_GT(order(r[l].speed, r[l + 1].speed), 1.4) << alpha;
      EXPECT_GT(order(r[l].height, r[l + 1].height), 1.4) << alpha;
    }
  }
}

TEST(Identities, HalvingDsAndDtHalvesGrimReaperResidual) {
  // Joint halving: O(ds^2 + dt) residual drops by at least 2.
  double prev = 0;
  for (int l = 0; l < 3; ++l) {
    const double dt = 2e-5 / std::pow(2.0, l);
    const auto r = verify_evolution_identities(
        evolve_markers(grim_reaper_curve(2.0, (40u << l) + 1), 1.0, dt, 4), 4);
    if (l > 0) {
      EXPECT_GT(prev / r.w, 2.0);
    }
    prev = r.w;
  }
}

TEST(Identities, ResidualFieldsSkipEnds) {
  const auto tr = evolve_markers(grim_reaper_curve(2.0, 41), 1.0, 1e-5, 2);
  const auto f = identity_residual_fields(tr, 1, 3);
  for (std::size_t i = 0; i < f.w.size(); ++i)
    EXPECT_EQ(std::isnan(f.w[i]), i < 3 || i + 3 >= f.w.size()) << i;
}

TEST(MarkerOutput, ColumnsRoundTrip) {
  const auto tr = evolve_markers(circle_curve(1.0, 8), 1.0, 1e-3, 2);
  std::ostringstream os;
  write_marker_trajectory(os, tr);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "# t index x y kappa");
  for (const auto& c : tr.snapshots)
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      double t, x, y, k;
      std::size_t idx;
      ASSERT_TRUE(is >> t >> idx >> x >> y >> k);
      EXPECT_EQ(t, c.t);
      EXPECT_EQ(idx, i);
      EXPECT_EQ(x, c.points[i][0]);
      EXPECT_EQ(y, c.points[i][1]);
    }
}
