#include "finsler/indicatrix.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace finsler;

namespace {

constexpr double kPi = std::numbers::pi;

Vec unit(const PointFrame& f, const Vec& y) { return y / eval_scalars(f, y).K; }

PointFrame frame_at(const ManifoldSpec& s, std::uint64_t seed) {
  SampleRng rng(seed);
  return eval_point(s, sample_point(rng, s), 1);
}

}  // namespace

TEST(Indicatrix, SphericalCoordinates) {
  for (const auto& s : {fx::flat(3, 1.0), fx::curved(3, -1.3), fx::poly(3, 0.6)}) {
    const PointFrame f = frame_at(s, 2);
    SampleRng rng(7);
    for (int t = 0; t < 20; ++t) {
      const Vec y = sample_vector(rng, f);
      const SphericalCoords c = spherical_coords(f, y);
      const Vec back = spherical_to_vector(f, c.z1, c.chi, c.phi);
      EXPECT_LT(max_abs(Vec(back - y)), 1e-10 * std::max(1.0, max_abs(y)));
      const FinslerEval e = eval_scalars(f, back);
      EXPECT_NEAR(e.K, c.z1, 1e-10 * c.z1);
      EXPECT_NEAR(e.q, c.z1 * c.Sin_chi, 1e-10 * c.z1);
      EXPECT_NEAR(e.b_scalar, c.z1 * c.Cos_chi, 1e-10 * c.z1);
      const Vec y2 = sample_vector(rng, f);
      EXPECT_NEAR(angle_spherical(f, c, spherical_coords(f, y2)), angle(f, y, y2).alpha, 1e-10);
    }
  }
}

TEST(Indicatrix, InducedMetric) {
  for (double g : {0.0, 1.0, -1.5}) {
    for (const auto& s : {fx::flat(3, g), fx::curved(3, g)}) {
      const PointFrame f = frame_at(s, 3);
      SampleRng rng(9);
      for (int t = 0; t < 10; ++t) {
        const double chi = rng.uniform(0.1, 0.9) * kPi / f.h, phi = rng.uniform(-kPi, kPi);
        const Mat m = induced_metric(f, spherical_chart(f), vec2(chi, phi));
        EXPECT_LT(max_abs(Mat(m - spherical_metric_closed(f, chi))), 1e-6);
        const double z1 = rng.uniform(0.3, 3.0);
        Mat full = Mat::Zero(3, 3);
        full(0, 0) = 1.0;
        full(1, 1) = z1 * z1;
        full(2, 2) = z1 * z1 * std::pow(std::sin(f.h * chi) / f.h, 2);
        EXPECT_LT(max_abs(Mat(spherical_metric_full(f, z1, chi, phi) - full)) / (z1 * z1), 1e-8);
        if (g == 0.0) EXPECT_NEAR(m(1, 1), std::pow(std::sin(chi), 2), 1e-8);
      }
    }
  }
}

TEST(Indicatrix, ScalingLawThroughKappa) {
  for (double g : {0.7, -1.2}) {
    const auto s = fx::flat(3, g);
    const PointFrame f = frame_at(s, 4);
    // chart on the unit a-sphere (a is the identity here)
    Chart L = [](const Vec& u) { return vec3(std::sin(u[0]) * std::cos(u[1]), std::sin(u[0]) * std::sin(u[1]), std::cos(u[0])); };
    SampleRng rng(5);
    for (int t = 0; t < 10; ++t) {
      const Vec u = vec2(rng.uniform(0.3, 2.8), rng.uniform(-3, 3));
      const Mat i_ab = induced_metric(f, kappa_chart(f, L), u);
      const Mat ref = sphere_metric_scaled(f, L, u);
      EXPECT_LT(max_abs(Mat(i_ab - ref)), 1e-8);
    }
  }
}

TEST(Indicatrix, GaussCurvatureIsHSquared) {
  for (double g : {0.0, 1.0, -1.0, 1.6}) {
    for (const auto& s : {fx::flat(3, g), fx::curved(3, g)}) {
      const PointFrame f = frame_at(s, 6);
      SampleRng rng(11);
      for (int t = 0; t < 5; ++t) {
        const double chi = rng.uniform(0.15, 0.85) * kPi / f.h, phi = rng.uniform(-kPi, kPi);
        EXPECT_NEAR(indicatrix_curvature(f, chi, phi), f.h * f.h, 1e-3) << "g=" << g;
      }
    }
  }
  const PointFrame f = frame_at(fx::flat(3, 1.0), 1);
  EXPECT_NEAR(f.h * f.h, 0.75, 1e-15);
  EXPECT_THROW(indicatrix_curvature(f, 0.005, 0.0), EvalError);
}

TEST(Indicatrix, AreaAndVolume) {
  for (double g : {0.0, 1.0}) {
    const PointFrame f = frame_at(fx::flat(3, g), 1);
    const AreaVolume r = area_volume_ratios(f, 400);
    const double inv_h2 = 1.0 / (f.h * f.h);
    EXPECT_NEAR(r.area_ratio / inv_h2, 1.0, 1e-3);
    EXPECT_NEAR(r.volume_ratio / inv_h2, 1.0, 1e-3);
    EXPECT_NEAR(r.area_over_volume / 3.0, 1.0, 1e-3);
  }
  {
    const PointFrame f = frame_at(fx::flat(2, 1.0), 1);
    const AreaVolume r = area_volume_ratios(f, 4000);
    EXPECT_NEAR(r.area_over_volume / 2.0, 1.0, 1e-3);
  }
  EXPECT_THROW(area_volume_ratios(frame_at(fx::flat(3, 1.0), 1), 16), std::invalid_argument);
}

TEST(Indicatrix, ConeAndConformalForms) {
  for (double g : {1.0, -0.6}) {
    const PointFrame f = frame_at(fx::curved(3, g), 8);
    SampleRng rng(13);
    for (int t = 0; t < 10; ++t) {
      const double sg = rng.uniform(-1, 1), chi = rng.uniform(0.2, 0.8) * kPi / f.h;
      EXPECT_LT(conformal_cylinder_residual(f, std::exp(f.h * sg) * std::sin(f.h * chi),
                                            std::exp(f.h * sg) * std::cos(f.h * chi), rng.uniform(-3, 3)),
                1e-8);
      const Vec y = sample_vector(rng, f);
      Vec dy(3);
      for (int i = 0; i < 3; ++i) dy[i] = rng.normal();
      dy *= 1e-3 * std::sqrt(y.dot(f.a * y) / dy.dot(f.a * dy));
      EXPECT_LT(infinitesimal_angle_residual(f, y, dy) * dy.dot(f.a * dy), 1e-8);
    }
  }
}

TEST(Indicatrix, ClosedFormGeodesicEquations) {
  SampleRng rng(17);
  for (double g : {0.0, 1.0, -1.4}) {
    const double h = charge_h(g);
    for (int t = 0; t < 20; ++t) {
      ArcConstants k{rng.uniform(-0.9, 0.9) / h, rng.uniform(-1, 1), rng.uniform(-3, 3)};
      const double s = k.s_tilde + rng.uniform(0.05, 0.95) * kPi / h;  // one sign of sigma
      EXPECT_LT(arc_ode_residual(h, k, s).max(), 1e-8);
    }
    // meridian and equator
    ArcConstants mer{0.0, 0.0, 0.4};
    EXPECT_NEAR(std::cos(h * arc_chi(h, mer, 0.7)), std::cos(h * 0.7), 1e-14);
    EXPECT_EQ(arc_phi(h, mer, 0.7), 0.4);
    ArcConstants eq{1.0 / h, 0.3, 0.0};
    EXPECT_NEAR(arc_chi(h, eq, 1.1), kPi / (2 * h), 1e-12);
    EXPECT_NEAR((arc_phi(h, eq, 1.2) - arc_phi(h, eq, 1.0)) / 0.2, h, 1e-9);
    EXPECT_THROW(arc_chi(h, ArcConstants{1.01 / h}, 0.0), EvalError);
  }
}

TEST(Indicatrix, FitAndExpansion) {
  for (double g : {0.0, 1.0, -1.3}) {
    const PointFrame f = frame_at(fx::curved(3, g), 19);
    const AdaptedFrame af(f);
    SampleRng rng(23);
    for (int t = 0; t < 20; ++t) {
      const Vec l1 = unit(f, sample_vector(rng, f)), l2 = unit(f, sample_vector(rng, f));
      const ArcFit fit = fit_arc(f, l1, l2);
      EXPECT_LT(max_abs(Vec(af.to_y(arc_R(f, fit.k, fit.s1)) - l1)), 1e-10);
      EXPECT_LT(max_abs(Vec(af.to_y(arc_R(f, fit.k, fit.s2)) - l2)), 1e-10);
      EXPECT_NEAR(fit.s2 - fit.s1, angle(f, l1, l2).alpha, 1e-10);
      if (std::abs(std::sin(f.h * (fit.s2 - fit.s1))) < 1e-3) continue;
      for (double w : {0.0, 0.3, 0.77, 1.0}) {
        const double s = fit.s1 + w * (fit.s2 - fit.s1);
        EXPECT_LT(expansion_reconstruction_error(f, fit.k, fit.s1, fit.s2, s), 1e-9);
        if (g == 0.0) EXPECT_EQ(arc_expansion_coeffs(f, fit.k, fit.s1, fit.s2, s).k3, 0.0);
      }
    }
    // C = 0 gives Y = 0 on a meridian arc away from the pole
    ArcConstants mer{0.0, 0.0, 1.0};
    for (double s : {0.2, 0.9, 1.5})
      EXPECT_LT(std::abs(arc_expansion_coeffs(f, mer, 0.1, 1.7, s).Y), 1e-12);
    // the special case s_tilde = 0
    ArcConstants k0{0.4, 0.0, kPi / 2};
    EXPECT_LT(expansion_reconstruction_error(f, k0, 0.3, 1.4, 0.8), 1e-9);
    EXPECT_THROW(arc_expansion_coeffs(f, k0, 0.3, 0.3 + kPi / f.h, 1.0), EvalError);
  }
}

TEST(Indicatrix, NumericGeodesics) {
  for (double g : {1.0, -0.8}) {
    const PointFrame f = frame_at(fx::curved(3, g), 29);
    const AdaptedFrame af(f);
    SampleRng rng(31);
    int done = 0;
    while (done < 4) {
      const Vec l1 = unit(f, sample_vector(rng, f)), l2 = unit(f, sample_vector(rng, f));
      const double alpha = angle(f, l1, l2).alpha;
      if (alpha > 0.8 * kPi / f.h || alpha < 0.05) continue;
      ++done;
      const GeodesicArc arc = geodesic_numeric(f, l1, l2);
      EXPECT_NEAR(arc.length(), alpha, 1e-6);
      EXPECT_EQ(arc.samples.size(), 65u);
      EXPECT_LT(max_abs(Vec(arc.samples.back().l - l2)), 1e-9);
      EXPECT_DOUBLE_EQ(arc.samples.back().s, arc.length());
      const ArcInvariants inv = arc_invariants(f, arc);
      EXPECT_LT(inv.unit_speed, 1e-6);
      EXPECT_LT(inv.clairaut, 1e-8);
      // trajectory against the closed form through the fitted constants
      const ArcConstants k{arc.C_tilde, arc.s_tilde, arc.phi_tilde};
      double dev = 0;
      for (const auto& smp : arc.samples) dev = std::max(dev, max_abs(Vec(af.to_y(arc_R(f, k, smp.s)) - smp.l)));
      EXPECT_LT(dev, 1e-6);
    }
  }
  {
    const PointFrame f = frame_at(fx::flat(3, 0.0), 1);
    const GeodesicArc arc = geodesic_numeric(f, fx::vec({1, 0, 0.0}), fx::vec({0, 1, 0.0}));
    EXPECT_NEAR(arc.length(), kPi / 2, 1e-6);
    const Vec l = unit(f, fx::vec({0.3, 0.4, 0.5}));
    EXPECT_EQ(geodesic_numeric(f, l, l).length(), 0.0);
  }
  {
    // any N
    const PointFrame f = frame_at(fx::curved(4, 1.2), 37);
    SampleRng rng(41);
    const Vec l1 = unit(f, sample_vector(rng, f)), l2 = unit(f, sample_vector(rng, f));
    const GeodesicArc arc = geodesic_numeric(f, l1, l2);
    EXPECT_NEAR(arc.length(), angle(f, l1, l2).alpha, 1e-6);
    EXPECT_LT(arc_invariants(f, arc).unit_speed, 1e-6);
    std::ostringstream os;
    write_arc(os, f, arc);
    EXPECT_NE(os.str().find("l3"), std::string::npos);
    EXPECT_EQ(os.str().find("clairaut"), std::string::npos);
  }
}

TEST(Indicatrix, ClosedFormArcSamples) {
  {
    // meridian on one side of the pole: phi constant
    const PointFrame f = frame_at(fx::curved(3, 1.0), 43);
    const GeodesicArc arc = geodesic_closed_arc(f, ArcConstants{0.0, 0.0, 0.8}, 0.05, 3.0, 100);
    ASSERT_EQ(arc.samples.size(), 100u);
    for (const auto& smp : arc.samples) EXPECT_EQ(smp.phi, 0.8);
  }
  {
    const PointFrame f = frame_at(fx::flat(3, 0.0), 1);
    const GeodesicArc arc = geodesic_closed_arc(f, ArcConstants{1.0, 0.0, 0.0}, 0.0, 6.0, 50);
    for (const auto& smp : arc.samples) EXPECT_NEAR(smp.chi, kPi / 2, 1e-12);
  }
  for (double g : {1.0, -1.4}) {
    const PointFrame f = frame_at(fx::curved(3, g), 47);
    const ArcConstants k{0.45 / f.h, 0.3, 1.1};
    const GeodesicArc arc = geodesic_closed_arc(f, k, 0.0, 5.0, 80);
    EXPECT_LT(arc_invariants(f, arc).clairaut, 1e-8);
    EXPECT_LT(arc_invariants(f, arc).unit_speed, 1e-8);
    std::ostringstream os;
    write_arc(os, f, arc);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "s\tchi\tphi\tl0\tl1\tl2\tclairaut");
    int rows = 0;
    while (std::getline(in, line)) {
      const double cl = std::stod(line.substr(line.rfind('\t') + 1));
      EXPECT_NEAR(cl, k.C_tilde, 1e-8);
      ++rows;
    }
    EXPECT_EQ(rows, 80);
  }
  EXPECT_THROW(geodesic_closed_arc(frame_at(fx::flat(3, 1.0), 1), ArcConstants{2.0}, 0, 1, 10), EvalError);
  EXPECT_THROW(geodesic_closed_arc(frame_at(fx::flat(4, 1.0), 1), ArcConstants{}, 0, 1, 10), std::invalid_argument);
}

TEST(Indicatrix, AxisClearanceOfArcs) {
  for (double g : {1.0, -1.3, 0.0}) {
    const PointFrame f = frame_at(fx::curved(3, g), 53);
    SampleRng rng(59);
    for (int t = 0; t < 20; ++t) {
      const Vec l1 = unit(f, sample_vector(rng, f)), l2 = unit(f, sample_vector(rng, f));
      const ArcFit fit = fit_arc(f, l1, l2);
      double mn = 1e9, mx = 0;
      for (int k = 0; k <= 20000; ++k) {
        const double c = arc_chi(f.h, fit.k, fit.s1 + (fit.s2 - fit.s1) * k / 20000);
        mn = std::min(mn, c);
        mx = std::max(mx, c);
      }
      EXPECT_NEAR(arc_axis_clearance(f, l1, l2), std::min(f.h * mn, kPi - f.h * mx), 1e-6);
    }
    // an arc through the axis has no clearance
    const Vec b = f.b_up, v = unit(f, Vec(f.a_inv * orthonormal_coframe(f).row(0).transpose()));
    EXPECT_LT(arc_axis_clearance(f, unit(f, Vec(b + 0.5 * v)), unit(f, Vec(b - 0.5 * v))), 1e-7);
  }
}
