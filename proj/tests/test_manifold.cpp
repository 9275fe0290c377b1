#include "finsler/config.hpp"
#include "finsler/manifold.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace finsler;

namespace {

// Christoffel symbols from central differences of the metric family.
Tensor3 fd_christoffel(const ManifoldSpec& s, const Vec& x, double step) {
  const int n = s.dim;
  auto amat = [&](const Vec& p) {
    std::vector<double> xv(p.data(), p.data() + n);
    auto a = s.metric.eval(xv);
    return Mat(Eigen::Map<Mat>(a.data(), n, n));
  };
  std::vector<Mat> da;
  for (int i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    da.push_back((amat(xp) - amat(xm)) / (2 * step));
  }
  Mat ai = amat(x).inverse();
  Tensor3 c(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double sum = 0;
        for (int l = 0; l < n; ++l) sum += ai(k, l) * (da[i](l, j) + da[j](l, i) - da[l](i, j));
        c(k, i, j) = 0.5 * sum;
      }
  return c;
}

}  // namespace

TEST(Manifold, FlatFrameIsTrivial) {
  auto s = fx::flat(3, 0.0);
  EXPECT_DOUBLE_EQ(s.h, 1.0);
  auto f = eval_point(s, fx::vec({0.3, -2.0, 4.0}));
  EXPECT_EQ(f.christoffel.max_abs(), 0.0);
  EXPECT_EQ(max_abs(f.nabla_b), 0.0);
  EXPECT_EQ(f.riem.max_abs(), 0.0);
  EXPECT_EQ(f.d_riem.max_abs(), 0.0);
  EXPECT_EQ(max_abs(covariant_db(f)), 0.0);
}

TEST(Manifold, ChargeSetsH) {
  auto s = fx::flat(3, 1.0);
  EXPECT_NEAR(s.h, std::sqrt(3.0) / 2.0, 1e-15);
  EXPECT_NEAR(s.G, 1.0 / (std::sqrt(3.0) / 2.0), 1e-15);
}

TEST(Manifold, DiagonalExpChristoffelMatchesHandFormula) {
  auto s = fx::curved(3, 1.0);
  const int n = 3;
  Vec x = fx::vec({0.2, -0.4, 0.5});
  auto f = eval_point(s, x, 1);
  // phi_i and its gradient by hand
  std::vector<double> phi(n, 0.0);
  Mat dphi(n, n);  // dphi(i, j) = d phi_i / dx^j
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      phi[i] += s.metric.lin[i * n + j] * x[j] + 0.5 * s.metric.quad[i * n + j] * x[j] * x[j];
      dphi(i, j) = s.metric.lin[i * n + j] + s.metric.quad[i * n + j] * x[j];
    }
  double err = 0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double expect = kronecker(k, i) * dphi(k, j) + kronecker(k, j) * dphi(k, i) -
                        kronecker(i, j) * std::exp(2 * (phi[i] - phi[k])) * dphi(i, k);
        err = std::max(err, std::abs(expect - f.christoffel(k, i, j)));
      }
  EXPECT_LT(err, 1e-13);
  EXPECT_LT(rel_diff(f.christoffel, fd_christoffel(s, x, 1e-6)), 1e-8);
}

TEST(Manifold, ChristoffelSymmetricAndMatchesFiniteDifferences) {
  for (auto s : {fx::poly(3, 0.5), fx::sphere(3, 1.0), fx::poly(4, -1.0)}) {
    SampleRng rng(7);
    for (int t = 0; t < 10; ++t) {
      Vec x = sample_point(rng, s);
      auto f = eval_point(s, x, 1);
      double asym = 0;
      for (int k = 0; k < s.dim; ++k)
        for (int i = 0; i < s.dim; ++i)
          for (int j = 0; j < s.dim; ++j)
            asym = std::max(asym, std::abs(f.christoffel(k, i, j) - f.christoffel(k, j, i)));
      EXPECT_LT(asym, 1e-15);
      EXPECT_LT(rel_diff(f.christoffel, fd_christoffel(s, x, 1e-6), 1e-3), 1e-5);
    }
  }
}

TEST(Manifold, CurvatureAntisymmetryAndFirstBianchi) {
  auto s = fx::poly(3, 0.0, 0.05);
  SampleRng rng(11);
  for (int t = 0; t < 10; ++t) {
    Vec x = sample_point(rng, s);
    auto f = eval_point(s, x, 3);
    const int n = s.dim;
    double anti = 0, bianchi = 0, low = 0;
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
          for (int m = 0; m < n; ++m) {
            anti = std::max(anti, std::abs(f.riem(p, i, k, m) + f.riem(p, i, m, k)));
            bianchi = std::max(bianchi, std::abs(f.riem(p, i, k, m) + f.riem(k, i, m, p) + f.riem(m, i, p, k)));
            // pair antisymmetry of the lowered tensor
            low = std::max(low, std::abs(f.riem_low(p, i, k, m) + f.riem_low(i, p, k, m)));
          }
    EXPECT_EQ(anti, 0.0);
    EXPECT_LT(bianchi, 1e-9);
    EXPECT_LT(low, 1e-9);
  }
}

TEST(Manifold, CurvatureMatchesFiniteDifferenceOfChristoffel) {
  auto s = fx::curved(3, 0.0);
  Vec x = fx::vec({0.1, 0.3, -0.2});
  auto f = eval_point(s, x, 2);
  const int n = 3;
  const double hstep = 1e-5;
  std::vector<Tensor3> dG;
  for (int k = 0; k < n; ++k) {
    Vec xp = x, xm = x;
    xp[k] += hstep;
    xm[k] -= hstep;
    dG.push_back((eval_point(s, xp, 1).christoffel - eval_point(s, xm, 1).christoffel) * (0.5 / hstep));
  }
  const Tensor3& G = f.christoffel;
  double err = 0;
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          double r = dG[k](i, p, m) - dG[m](i, p, k);
          for (int u = 0; u < n; ++u) r += G(u, p, m) * G(i, u, k) - G(u, p, k) * G(i, u, m);
          err = std::max(err, std::abs(r - f.riem(p, i, k, m)));
        }
  EXPECT_LT(err, 1e-7);
}

TEST(Manifold, CovariantCurvatureDerivative) {
  auto s = fx::curved(3, 0.0);
  Vec x = fx::vec({-0.3, 0.2, 0.4});
  auto f = eval_point(s, x, 3);
  const int n = 3;
  const double hstep = 1e-5;
  double err = 0, bianchi2 = 0;
  for (int k = 0; k < n; ++k) {
    Vec xp = x, xm = x;
    xp[k] += hstep;
    xm[k] -= hstep;
    Tensor4 dR = (eval_point(s, xp, 2).riem - eval_point(s, xm, 2).riem) * (0.5 / hstep);
    for (int hh = 0; hh < n; ++hh)
      for (int t = 0; t < n; ++t)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double v = dR(hh, t, i, j);
            for (int u = 0; u < n; ++u)
              v += f.christoffel(t, k, u) * f.riem(hh, u, i, j) - f.christoffel(u, k, hh) * f.riem(u, t, i, j) -
                   f.christoffel(u, k, i) * f.riem(hh, t, u, j) - f.christoffel(u, k, j) * f.riem(hh, t, i, u);
            err = std::max(err, std::abs(v - f.d_riem(k, hh, t, i, j)));
          }
  }
  EXPECT_LT(err, 1e-7);
  for (int k = 0; k < n; ++k)
    for (int hh = 0; hh < n; ++hh)
      for (int t = 0; t < n; ++t)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            bianchi2 = std::max(bianchi2, std::abs(f.d_riem(k, hh, t, i, j) + f.d_riem(i, hh, t, j, k) +
                                                  f.d_riem(j, hh, t, k, i)));
  EXPECT_LT(bianchi2, 1e-9);
}

TEST(Manifold, ConstantCurvatureFamily) {
  const double c = 0.7;
  auto s = fx::sphere(3, 0.5, c);
  Vec x = fx::vec({0.2, -0.1, 0.3});
  auto f = eval_point(s, x, 3);
  const int n = 3;
  double err = 0;
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          double expect = c * (f.a(i, k) * f.a(p, m) - f.a(i, m) * f.a(p, k));
          err = std::max(err, std::abs(expect - f.riem_low(p, i, k, m)));
        }
  EXPECT_LT(err, 1e-10);
  EXPECT_LT(f.d_riem.max_abs(), 1e-10);
}

TEST(Manifold, UnitNormalizationOnGrid) {
  // polynomial-perturbation eps = 0.05 with raw b = (0, 0, 2)
  auto s = make_spec(3, 0.0, MetricFamily::polynomial(3, 0.05), BField::raw_vector({0, 0, 2}, {}));
  EXPECT_NEAR(s.b_norm_factor, 0.5, 1e-15);
  for (int k = 0; k < 10; ++k) {
    Vec x = fx::vec({-0.8 + 0.17 * k, 0.5 - 0.1 * k, 0.07 * k - 0.3});
    auto f = eval_point(s, x, 0);
    EXPECT_NEAR(f.b_up.dot(f.a * f.b_up), 1.0, 1e-12);
    EXPECT_NEAR(f.b_low.dot(f.a_inv * f.b_low), 1.0, 1e-12);
  }
}

TEST(Manifold, NablaBOrthogonalToUnitB) {
  for (auto s : {fx::curved(3, 1.0), fx::poly(3, 1.0), fx::sphere(4, 0.0)}) {
    SampleRng rng(3);
    for (int t = 0; t < 10; ++t) {
      auto f = eval_point(s, sample_point(rng, s), 1);
      EXPECT_LT(max_abs(Vec(f.nabla_b * f.b_up)), 1e-9);
    }
  }
}

TEST(Manifold, GradientFieldOnFlatMetric) {
  auto s = make_spec(3, 0.0, MetricFamily::flat(3), BField::gradient({0.2, 0.1, 1.0}, {0.3, 0.1, 0, 0.1, -0.2, 0.05, 0, 0.05, 0.4}));
  Vec x = fx::vec({0.5, -1.0, 0.7});
  auto f = eval_point(s, x, 1);
  Mat nb = covariant_db(f);
  const double hstep = 1e-6;
  Mat fd(3, 3);
  for (int k = 0; k < 3; ++k) {
    Vec xp = x, xm = x;
    xp[k] += hstep;
    xm[k] -= hstep;
    fd.row(k) = ((eval_point(s, xp, 0).b_low - eval_point(s, xm, 0).b_low) / (2 * hstep)).transpose();
  }
  EXPECT_LT(max_abs_diff(Mat(0.5 * (nb + nb.transpose())), Mat(0.5 * (fd + fd.transpose()))), 1e-8);
}

TEST(Manifold, FiniteDifferenceModeAgrees) {
  auto sa = fx::curved(3, 1.0, DerivativeMode::Analytic);
  auto sf = fx::curved(3, 1.0, DerivativeMode::FiniteDifference);
  SampleRng rng(5);
  for (int t = 0; t < 5; ++t) {
    Vec x = sample_point(rng, sa);
    auto fa = eval_point(sa, x, 2);
    auto ff = eval_point(sf, x, 2);
    EXPECT_LT(rel_diff(ff.christoffel, fa.christoffel, 1e-3), 1e-5);
    EXPECT_LT(rel_diff(ff.nabla_b, fa.nabla_b, 1e-3), 1e-5);
    EXPECT_LT(rel_diff(ff.riem, fa.riem, 1e-3), 1e-4);
  }
}

TEST(Manifold, SpecErrors) {
  EXPECT_THROW(
      {
        try {
          fx::flat(3, 2.0);
        } catch (const SpecError& e) {
          EXPECT_STREQ(e.what(), "charge out of range");
          throw;
        }
      },
      SpecError);
  MetricFamily bad = MetricFamily::flat(3);
  bad.matrix = {1, 0, 0, 0, -1, 0, 0, 0, 1};
  try {
    make_spec(3, 0.0, bad, BField::constant_axis({0, 0, 1}));
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_STREQ(e.what(), "metric not positive definite at probe points");
  }
  try {
    make_spec(3, 0.0, MetricFamily::flat(3), BField::constant_axis({0, 0, 0}));
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_STREQ(e.what(), "b field vanishes at probe points");
  }
  auto s = fx::curved(3, 0.0);
  EXPECT_THROW(eval_point(s, fx::vec({2.0, 0, 0})), EvalError);
}

TEST(Config, ParsesAndRejects) {
  const char* good = R"({"dim": 3, "g": 1.0,
    "metric_family": {"tag": "flat"},
    "b_family": {"tag": "constant-axis", "params": {"axis": [0, 0, 1]}}})";
  auto s = load_spec_text(good);
  EXPECT_EQ(s.dim, 3);
  EXPECT_NEAR(s.h, std::sqrt(3.0) / 2, 1e-15);
  EXPECT_THROW(load_spec_text(R"({"dim": 3, "g": 0, "extra": 1,
    "metric_family": {"tag": "flat"}, "b_family": {"tag": "constant-axis", "params": {"axis": [0,0,1]}}})"),
               SpecError);
  EXPECT_THROW(load_spec_text(R"({"dim": 3, "g": 0,
    "metric_family": {"tag": "hyperbolic"}, "b_family": {"tag": "constant-axis", "params": {"axis": [0,0,1]}}})"),
               SpecError);
  EXPECT_THROW(load_spec_text("{not json"), SpecError);
  try {
    load_spec_text(R"({"dim": 3, "g": -2.5, "metric_family": {"tag": "flat"},
      "b_family": {"tag": "constant-axis", "params": {"axis": [0,0,1]}}})");
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_STREQ(e.what(), "charge out of range");
  }
  auto p = load_spec_text(R"({"dim": 3, "g": 0.5, "derivative_mode": "finite-difference", "fd_step": 2e-5,
    "metric_family": {"tag": "polynomial-perturbation", "params": {"epsilon": 0.05}},
    "b_family": {"tag": "raw-vector", "params": {"vector": [0, 0, 2]}}})");
  EXPECT_EQ(p.mode, DerivativeMode::FiniteDifference);
  EXPECT_DOUBLE_EQ(p.fd_step, 2e-5);
  EXPECT_NEAR(p.b_norm_factor, 0.5, 1e-15);
}
