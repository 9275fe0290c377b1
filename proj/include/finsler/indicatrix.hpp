#pragma once
// Indicatrix geometry in a fixed tangent space: spherical coordinates,
// induced metric, Gauss curvature, area and volume, closed-form N=3
// geodesics with their two-point expansion, and a generic numeric
// geodesic boundary-value solver.

#include "finsler/angle.hpp"
#include "finsler/numerics.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <vector>

namespace finsler {

inline constexpr double kChartCap = 1e-6;  // f kept below pi (1 - kChartCap)

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
inline Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

// Coframe with the last row along b; y = H_inv R.
struct AdaptedFrame {
  Mat H, H_inv;
  explicit AdaptedFrame(const PointFrame& fr) : H(orthonormal_coframe(fr)), H_inv(H.inverse()) {}
  Vec to_R(const Vec& y) const { return H * y; }
  Vec to_y(const Vec& R) const { return H_inv * R; }
  // metric in R-components
  Mat pull(const Mat& g) const { return H_inv.transpose() * g * H_inv; }
};

// generalized sine and cosine of the azimuthal angle
inline double gen_sin(const PointFrame& fr, double chi) {
  return std::sin(fr.h * chi) / (std::exp(-0.5 * fr.g * chi) * fr.h);
}
inline double gen_cos(const PointFrame& fr, double chi) {
  const double f = fr.h * chi;
  return (std::cos(f) - 0.5 * fr.G * std::sin(f)) / std::exp(-0.5 * fr.g * chi);
}

struct SphericalCoords {
  double z1 = 0.0;  // K
  double phi = 0.0;
  double chi = 0.0;
  double Sin_chi = 0.0, Cos_chi = 0.0;
};

// N = 2 uses phi in {0, pi}.
inline SphericalCoords spherical_coords(const PointFrame& fr, const Vec& y) {
  if (fr.dim != 2 && fr.dim != 3) throw std::invalid_argument("spherical coordinates need N = 2 or 3");
  const AdaptedFrame af(fr);
  const Vec R = af.to_R(y);
  const AngleArg p = angle_arg(fr, y);
  SphericalCoords c;
  c.z1 = p.K;
  c.chi = std::acos(std::clamp(p.A / std::sqrt(p.B), -1.0, 1.0)) / fr.h;
  c.phi = fr.dim == 3 ? std::atan2(R[1], R[0]) : (R[0] >= 0 ? 0.0 : std::numbers::pi);
  c.Sin_chi = gen_sin(fr, c.chi);
  c.Cos_chi = gen_cos(fr, c.chi);
  return c;
}

inline Vec spherical_R(const PointFrame& fr, double z1, double chi, double phi) {
  const double s = z1 * gen_sin(fr, chi), c = z1 * gen_cos(fr, chi);
  if (fr.dim == 3) return vec3(s * std::cos(phi), s * std::sin(phi), c);
  if (fr.dim == 2) {
    Vec R(2);
    R << s * std::cos(phi), c;
    return R;
  }
  throw std::invalid_argument("spherical coordinates need N = 2 or 3");
}

inline Vec spherical_to_vector(const PointFrame& fr, double z1, double chi, double phi) {
  return AdaptedFrame(fr).to_y(spherical_R(fr, z1, chi, phi));
}

// ---------------------------------------------------------------------------
// Induced metric.

using Chart = std::function<Vec(const Vec& u)>;  // u -> unit vector l(u)

// FD tangents of a chart, columns t_a
inline Mat chart_tangents(const Chart& chart, const Vec& u, double step = 1e-5) {
  auto d = fd_gradient([&](const Vec& us) { return to_std(chart(us)); }, u, step);
  const int m = static_cast<int>(d.size()), n = static_cast<int>(d[0].size());
  Mat t(n, m);
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < n; ++i) t(i, a) = d[a][i];
  return t;
}

// i_ab = g_mn t^m_a t^n_b
inline Mat induced_metric(const PointFrame& fr, const Chart& chart, const Vec& u, double step = 1e-5) {
  const Vec l = chart(u);
  const Mat t = chart_tangents(chart, u, step);
  const FinslerEval e = eval_metric(fr, l);
  return t.transpose() * e.g_low * t;
}

// (chi, phi) chart on the N = 3 indicatrix
inline Chart spherical_chart(const PointFrame& fr) {
  const AdaptedFrame af(fr);
  return [fr, af](const Vec& u) { return af.to_y(spherical_R(fr, 1.0, u[0], u[1])); };
}

// chart of l through the inverse kappa map of a chart on the unit a-sphere
inline Chart kappa_chart(const PointFrame& fr, Chart L) {
  return [fr, L](const Vec& u) { return kappa_inverse(fr, L(u), 0.0); };
}

// (1/h^2) a(dL, dL): the scaled Riemannian sphere metric
inline Mat sphere_metric_scaled(const PointFrame& fr, const Chart& L, const Vec& u, double step = 1e-5) {
  const Mat t = chart_tangents(L, u, step);
  return t.transpose() * fr.a * t / (fr.h * fr.h);
}

// analytic diag(1, sin^2(h chi) / h^2)
inline Mat spherical_metric_closed(const PointFrame& fr, double chi) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;
  const double s = std::sin(fr.h * chi) / fr.h;
  m(1, 1) = s * s;
  return m;
}

// Full tangent metric in (z1, chi, phi) coordinates.
inline Mat spherical_metric_full(const PointFrame& fr, double z1, double chi, double phi, double step = 1e-5) {
  const AdaptedFrame af(fr);
  Chart c = [&](const Vec& u) { return af.to_y(spherical_R(fr, u[0], u[1], u[2])); };
  const Vec u = vec3(z1, chi, phi);
  const Mat t = chart_tangents(c, u, step);
  return t.transpose() * eval_metric(fr, c(u)).g_low * t;
}

// Tangent metric in (rho, tau, phi) with rho = e^{h sigma} sin(h chi),
// tau = e^{h sigma} cos(h chi), z1 = e^sigma; compared with kappa^2 diag(1, 1, rho^2).
inline double conformal_cylinder_residual(const PointFrame& fr, double rho, double tau, double phi, double step = 1e-6) {
  const AdaptedFrame af(fr);
  const double h = fr.h;
  Chart c = [&](const Vec& u) {
    const double r2 = u[0] * u[0] + u[1] * u[1];
    const double z1 = std::pow(r2, 0.5 / h);
    const double chi = std::atan2(u[0], u[1]) / h;
    return af.to_y(spherical_R(fr, z1, chi, u[2]));
  };
  const Vec u = vec3(rho, tau, phi);
  const Mat t = chart_tangents(c, u, step);
  const Mat m = t.transpose() * eval_metric(fr, c(u)).g_low * t;
  const double kappa = std::pow(rho * rho + tau * tau, (1.0 - h) / (2.0 * h)) / h;
  Mat ref = Mat::Zero(3, 3);
  ref(0, 0) = ref(1, 1) = kappa * kappa;
  ref(2, 2) = kappa * kappa * rho * rho;
  return max_abs(Mat(m - ref)) / std::max(1.0, max_abs(ref));
}

// ds^2 = dz1^2 + z1^2 dalpha^2 for a small displacement dy about y; returns
// |g_mid(dy, dy) - dK^2 - K_mid^2 dalpha^2| / |dy|_a^2.
inline double infinitesimal_angle_residual(const PointFrame& fr, const Vec& y, const Vec& dy) {
  const Vec y1 = y - 0.5 * dy, y2 = y + 0.5 * dy;
  const FinslerEval em = eval_metric(fr, y);
  const double K1 = eval_scalars(fr, y1).K, K2 = eval_scalars(fr, y2).K;
  const double da = angle(fr, y1, y2).alpha;
  const double lhs = dy.dot(em.g_low * dy);
  const double rhs = (K2 - K1) * (K2 - K1) + em.K * em.K * da * da;
  return std::abs(lhs - rhs) / dy.dot(fr.a * dy);
}

// Angle from spherical coordinates: (1/h) arccos(cos(f2-f1) - (1-cos(phi2-phi1)) sin f1 sin f2).
inline double angle_spherical(const PointFrame& fr, const SphericalCoords& c1, const SphericalCoords& c2) {
  const double f1 = fr.h * c1.chi, f2 = fr.h * c2.chi;
  const double tau = std::cos(f2 - f1) - (1.0 - std::cos(c2.phi - c1.phi)) * std::sin(f1) * std::sin(f2);
  return std::acos(clamp_lambda(tau)) / fr.h;
}

// ---------------------------------------------------------------------------
// Gauss curvature of the (chi, phi) chart by the Brioschi formula; the
// metric coefficients come from the FD-induced metric.

inline double indicatrix_curvature(const PointFrame& fr, double chi, double phi, double outer = 1e-2,
                                   double inner = 1e-5) {
  if (fr.dim != 3) throw std::invalid_argument("indicatrix curvature needs N = 3");
  const double cmax = std::numbers::pi / fr.h;
  if (chi - 2 * outer <= 0.0 || chi + 2 * outer >= cmax) throw EvalError("chart degenerate at sample");
  const Chart ch = spherical_chart(fr);
  auto EFG = [&](double u, double v) {
    const Mat m = induced_metric(fr, ch, vec2(u, v), inner);
    return std::array<double, 3>{m(0, 0), m(0, 1), m(1, 1)};
  };
  static constexpr double w1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  static constexpr double w2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
  std::array<double, 3> f[5][5];
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      // only the cross and the axes are needed
      if (a != 2 && b != 2 && std::abs(a - 2) != std::abs(b - 2)) continue;
      f[a][b] = EFG(chi + (a - 2) * outer, phi + (b - 2) * outer);
    }
  auto du = [&](int k) { double s = 0; for (int a = 0; a < 5; ++a) s += w1[a] * f[a][2][k]; return s / outer; };
  auto dv = [&](int k) { double s = 0; for (int b = 0; b < 5; ++b) s += w1[b] * f[2][b][k]; return s / outer; };
  auto duu = [&](int k) { double s = 0; for (int a = 0; a < 5; ++a) s += w2[a] * f[a][2][k]; return s / (outer * outer); };
  auto dvv = [&](int k) { double s = 0; for (int b = 0; b < 5; ++b) s += w2[b] * f[2][b][k]; return s / (outer * outer); };
  auto duv = [&](int k) {
    // diagonal stencil: f_uv = (f(+,+) - f(+,-) - f(-,+) + f(-,-)) / 4h^2, Richardson over two spacings
    auto cross = [&](int d) {
      return (f[2 + d][2 + d][k] - f[2 + d][2 - d][k] - f[2 - d][2 + d][k] + f[2 - d][2 - d][k]) / (4.0 * d * d * outer * outer);
    };
    return (4.0 * cross(1) - cross(2)) / 3.0;
  };
  const double E = f[2][2][0], F = f[2][2][1], G = f[2][2][2];
  const double Eu = du(0), Ev = dv(0), Fu = du(1), Fv = dv(1), Gu = du(2), Gv = dv(2);
  const double Evv = dvv(0), Fuv = duv(1), Guu = duu(2);
  Eigen::Matrix3d m1, m2;
  m1 << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
        Fv - 0.5 * Gu, E, F,
        0.5 * Gv, F, G;
  m2 << 0.0, 0.5 * Ev, 0.5 * Gu,
        0.5 * Ev, E, F,
        0.5 * Gu, F, G;
  const double den = E * G - F * F;
  return (m1.determinant() - m2.determinant()) / (den * den);
}

// ---------------------------------------------------------------------------
// Area and volume.

struct AreaVolume {
  double area = 0.0, volume = 0.0;
  double area_ratio = 0.0;        // area / unit-sphere area
  double volume_ratio = 0.0;      // volume / unit-ball volume
  double area_over_volume = 0.0;  // N for N = 3, 2 for N = 2 (length over area)
};

// Midpoint rule on the (chi, phi) chart; the volume integrates sqrt(det g)
// over K <= 1 in polar form, independently of the induced metric.
inline AreaVolume area_volume_ratios(const PointFrame& fr, int resolution = 400) {
  if (resolution < 32) throw std::invalid_argument("quadrature resolution too low");
  if (fr.dim != 2 && fr.dim != 3) throw std::invalid_argument("area/volume needs N = 2 or 3");
  const AdaptedFrame af(fr);
  const double pi = std::numbers::pi;
  const double cmax = pi * (1.0 - kChartCap) / fr.h;
  const double dchi = cmax / resolution;
  AreaVolume r;
  const double step = 1e-6;
  if (fr.dim == 3) {
    const double dphi = 2 * pi / resolution;
    for (int i = 0; i < resolution; ++i) {
      const double chi = (i + 0.5) * dchi;
      for (int j = 0; j < resolution; ++j) {
        const double phi = (j + 0.5) * dphi;
        const Vec R = spherical_R(fr, 1.0, chi, phi);
        const Vec Rc = (spherical_R(fr, 1.0, chi + step, phi) - spherical_R(fr, 1.0, chi - step, phi)) / (2 * step);
        const Vec Rp = (spherical_R(fr, 1.0, chi, phi + step) - spherical_R(fr, 1.0, chi, phi - step)) / (2 * step);
        const Mat g = af.pull(eval_metric(fr, af.to_y(R), 0.0).g_low);
        Mat T(3, 2);
        T.col(0) = Rc;
        T.col(1) = Rp;
        const Mat i_ab = T.transpose() * g * T;
        r.area += std::sqrt(i_ab.determinant()) * dchi * dphi;
        Mat D(3, 3);
        D.col(0) = R;
        D.col(1) = Rc;
        D.col(2) = Rp;
        r.volume += std::sqrt(g.determinant()) * std::abs(D.determinant()) / 3.0 * dchi * dphi;
      }
    }
    r.area_ratio = r.area / (4 * pi);
    r.volume_ratio = r.volume / (4 * pi / 3);
  } else {
    for (double phi : {0.0, pi})
      for (int i = 0; i < resolution; ++i) {
        const double chi = (i + 0.5) * dchi;
        const Vec R = spherical_R(fr, 1.0, chi, phi);
        const Vec Rc = (spherical_R(fr, 1.0, chi + step, phi) - spherical_R(fr, 1.0, chi - step, phi)) / (2 * step);
        const Mat g = af.pull(eval_metric(fr, af.to_y(R), 0.0).g_low);
        r.area += std::sqrt(Rc.dot(g * Rc)) * dchi;  // length of the indicatrix
        Mat D(2, 2);
        D.col(0) = R;
        D.col(1) = Rc;
        r.volume += std::sqrt(g.determinant()) * std::abs(D.determinant()) / 2.0 * dchi;
      }
    r.area_ratio = r.area / (2 * pi);
    r.volume_ratio = r.volume / pi;
  }
  r.area_over_volume = r.area / r.volume;
  return r;
}

// ---------------------------------------------------------------------------
// Closed-form N = 3 geodesics. sigma = h (s - s_tilde), c = h C_tilde.

struct ArcConstants {
  double C_tilde = 0.0, s_tilde = 0.0, phi_tilde = std::numbers::pi / 2;
};

inline double arc_c(double h, double C) {
  const double c = h * C;
  if (std::abs(c) > 1.0 + 1e-12) throw EvalError("no real arc");
  return std::clamp(c, -1.0, 1.0);
}

inline double arc_chi(double h, const ArcConstants& k, double s) {
  const double c = arc_c(h, k.C_tilde);
  return std::acos(std::clamp(std::sqrt(1 - c * c) * std::cos(h * (s - k.s_tilde)), -1.0, 1.0)) / h;
}

// Continuous branch of phi_tilde - pi/2 + arctan(tan(sigma) / c). On C = 0
// the meridian passes the pole at sigma = 0 and phi jumps by pi there.
inline double arc_phi(double h, const ArcConstants& k, double s) {
  const double c = arc_c(h, k.C_tilde);
  const double sg = h * (s - k.s_tilde);
  if (c == 0.0) return std::sin(sg) >= 0 ? k.phi_tilde : k.phi_tilde - std::numbers::pi;
  const double sc = c > 0 ? 1.0 : -1.0;
  return k.phi_tilde - std::numbers::pi / 2 + std::atan2(sc * std::sin(sg), std::abs(c) * std::cos(sg));
}

inline std::pair<double, double> geodesic_closed_form(double h, const ArcConstants& k, double s) {
  return {arc_chi(h, k, s), arc_phi(h, k, s)};
}

// unit vector along the closed-form arc, in R-components
inline Vec arc_R(const PointFrame& fr, const ArcConstants& k, double s) {
  return spherical_R(fr, 1.0, arc_chi(fr.h, k, s), arc_phi(fr.h, k, s));
}

struct ArcOdeResidual {
  double clairaut = 0.0;   // (1/h^2) sin^2(h chi) phi' - C
  double chi_second = 0.0; // chi'' - h^3 C^2 cos / sin^3
  double unit_speed = 0.0; // chi'^2 - (1 - h^2 C^2 / sin^2)
  double f_relation = 0.0; // ((1/h) sin f chi')' - cos f
  double max() const { return std::max({std::abs(clairaut), std::abs(chi_second), std::abs(unit_speed), std::abs(f_relation)}); }
};

// Substitute the closed form into the geodesic equations; derivatives by
// 5-point differences in s.
inline ArcOdeResidual arc_ode_residual(double h, const ArcConstants& k, double s, double ds = 1e-3) {
  auto chi = [&](double t) { return arc_chi(h, k, t); };
  auto phi = [&](double t) { return arc_phi(h, k, t); };
  auto d1 = [&](auto fn, double t) {
    return (fn(t - 2 * ds) - 8 * fn(t - ds) + 8 * fn(t + ds) - fn(t + 2 * ds)) / (12 * ds);
  };
  auto d2 = [&](auto fn, double t) {
    return (-fn(t - 2 * ds) + 16 * fn(t - ds) - 30 * fn(t) + 16 * fn(t + ds) - fn(t + 2 * ds)) / (12 * ds * ds);
  };
  const double x = chi(s), sn = std::sin(h * x), cs = std::cos(h * x);
  const double xp = d1(chi, s), xpp = d2(chi, s), pp = d1(phi, s);
  ArcOdeResidual r;
  const double C = k.C_tilde;
  r.clairaut = sn * sn * pp / (h * h) - C;
  r.chi_second = xpp - h * h * h * C * C * cs / (sn * sn * sn);
  r.unit_speed = xp * xp - (1 - h * h * C * C / (sn * sn));
  auto u = [&](double t) { return std::sin(h * chi(t)) * d1(chi, t) / h; };
  r.f_relation = d1(u, s) - cs;
  return r;
}

// Fit (C, s_tilde, phi_tilde) to the arc from l1 to l2 with s1 = 0 and
// s2 = (1/h) times the great-circle angle of the unit-sphere images.
struct ArcFit {
  ArcConstants k;
  double s1 = 0.0, s2 = 0.0;
};

inline ArcFit fit_arc(const PointFrame& fr, const Vec& l1, const Vec& l2) {
  if (fr.dim != 3) throw std::invalid_argument("closed-form arcs need N = 3");
  const double h = fr.h;
  auto U = [&](const Vec& l) {
    const SphericalCoords c = spherical_coords(fr, l);
    const double th = h * c.chi;
    return Eigen::Vector3d(std::sin(th) * std::cos(c.phi), std::sin(th) * std::sin(c.phi), std::cos(th));
  };
  const Eigen::Vector3d U1 = U(l1), U2 = U(l2);
  Eigen::Vector3d nrm = U1.cross(U2);
  const double sn = nrm.norm();
  if (sn < 1e-12) throw EvalError("arc endpoints coincide or are antipodal");
  nrm /= sn;
  const double delta = std::atan2(sn, U1.dot(U2));
  ArcFit r;
  r.k.C_tilde = nrm[2] / h;
  const Eigen::Vector3d ez(0, 0, 1);
  Eigen::Vector3d u = ez - nrm[2] * nrm;
  const double un = u.norm();
  if (un < 1e-14) {
    // equator: any point serves as sigma = 0
    u = U1;
  } else {
    u /= un;
  }
  const Eigen::Vector3d w = nrm.cross(u);
  const double sig1 = std::atan2(U1.dot(w), U1.dot(u));
  r.k.s_tilde = -sig1 / h;
  r.s1 = 0.0;
  r.s2 = delta / h;
  // phi at sigma = 0 is phi_tilde - pi/2 when c != 0
  if (std::abs(nrm[2]) > 0.0) {
    r.k.phi_tilde = std::atan2(u[1], u[0]) + std::numbers::pi / 2;
  } else {
    r.k.phi_tilde = std::atan2(w[1], w[0]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Two-point expansion l(s) = k1 l1 + k2 l2 + k3 b.

struct ExpansionCoeffs {
  double k1 = 0.0, k2 = 0.0, k3 = 0.0, Y = 0.0;
};

inline ExpansionCoeffs arc_expansion_coeffs(const PointFrame& fr, const ArcConstants& k, double s1, double s2, double s) {
  const double h = fr.h, g = fr.g;
  const double den = std::sin(h * (s2 - s1));
  if (std::abs(den) < 1e-8) throw EvalError("conjugate endpoints, expansion singular");
  const double x = arc_chi(h, k, s), x1 = arc_chi(h, k, s1), x2 = arc_chi(h, k, s2);
  ExpansionCoeffs r;
  r.k1 = std::sin(h * (s2 - s)) / den * std::exp(0.5 * g * (x - x1));
  r.k2 = std::sin(h * (s - s1)) / den * std::exp(0.5 * g * (x - x2));
  auto sinth = [&](double xc) { return std::sin(h * xc); };
  r.Y = -sinth(x) * std::exp(0.5 * g * x) + r.k1 * sinth(x1) * std::exp(0.5 * g * x1) +
        r.k2 * sinth(x2) * std::exp(0.5 * g * x2);
  r.k3 = g / (2 * h) * r.Y;
  return r;
}

// max |l(s) - (k1 l1 + k2 l2 + k3 b)| in x-components
inline double expansion_reconstruction_error(const PointFrame& fr, const ArcConstants& k, double s1, double s2, double s) {
  const AdaptedFrame af(fr);
  const Vec l = af.to_y(arc_R(fr, k, s));
  const Vec l1 = af.to_y(arc_R(fr, k, s1)), l2 = af.to_y(arc_R(fr, k, s2));
  const ExpansionCoeffs c = arc_expansion_coeffs(fr, k, s1, s2, s);
  return max_abs(Vec(l - (c.k1 * l1 + c.k2 * l2 + c.k3 * fr.b_up)));
}

// Smallest Riemannian angle between the axis line (+-b) and the minor great
// arc joining the kappa images of l1 and l2; the arc clears the slit when
// this is well above zero. Any N.
inline double arc_axis_clearance(const PointFrame& fr, const Vec& l1, const Vec& l2) {
  auto unit = [&](const Vec& z) { return Vec(z / std::sqrt(z.dot(fr.a * z))); };
  const Vec u1 = unit(zeta_any(fr, l1)), u2 = unit(zeta_any(fr, l2));
  auto ang = [&](const Vec& p, const Vec& q) { return std::acos(std::clamp(p.dot(fr.a * q), -1.0, 1.0)); };
  // a-orthonormal basis (u1, w) of the arc plane
  Vec w = u2 - u1 * u1.dot(fr.a * u2);
  const double wn = std::sqrt(std::max(0.0, w.dot(fr.a * w)));
  const bool plane = wn > 1e-14;
  if (plane) w /= wn;
  const double theta = ang(u1, u2);
  double best = std::numeric_limits<double>::infinity();
  for (double sg : {1.0, -1.0}) {
    const Vec pole = sg * fr.b_up;
    best = std::min({best, ang(pole, u1), ang(pole, u2)});
    if (!plane) continue;
    // the arc point closest to the pole sits at angle t from u1
    const double t = std::atan2(pole.dot(fr.a * w), pole.dot(fr.a * u1));
    if (t > 0 && t < theta) best = std::min(best, ang(pole, Vec(std::cos(t) * u1 + std::sin(t) * w)));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Numeric geodesics on the indicatrix of g(y), any N.
//   l'' = -C^i_jk(l) l'^j l'^k - g(l', l') l

struct ArcSample {
  double s = 0.0, chi = 0.0, phi = 0.0;
  Vec l, dl;  // dl = dl/ds
};

struct GeodesicArc {
  double C_tilde = 0.0, s_tilde = 0.0, phi_tilde = 0.0;  // N = 3 fit of the endpoints
  double s1 = 0.0, s2 = 0.0;
  std::vector<ArcSample> samples;
  int iterations = 0;
  int steps = 0;
  double endpoint_error = 0.0;
  double length() const { return s2 - s1; }
};

struct BvpOptions {
  int max_iterations = 40;
  double tol = 1e-11;       // endpoint error
  int initial_steps = 400;  // RK4 steps over the unit parameter
  int max_steps = 12800;
  double step_tol = 1e-11;  // endpoint change on step doubling
  int sample_count = 65;
  double stage_length = 0.2;  // continuation step in arc length
  double stage_tol = 1e-3;     // endpoint error at intermediate targets
};

namespace detail {

inline Vec geodesic_accel(const PointFrame& fr, const Vec& l, const Vec& v) {
  const FinslerEval e = eval_cartan(fr, l, 0.0);
  const int n = fr.dim;
  Vec av = Vec::Zero(n);  // A_pjk v^j v^k
  for (int p = 0; p < n; ++p)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) av[p] += e.cartan(p, j, k) * v[j] * v[k];
  return -(e.g_up * av) / e.K - v.dot(e.g_low * v) / (e.K * e.K) * l;
}

// integrate over t in [0, 1]; out receives the states if non-null
inline std::pair<Vec, Vec> shoot(const PointFrame& fr, const Vec& l0, const Vec& w, int steps,
                                 std::vector<std::pair<Vec, Vec>>* out = nullptr) {
  Vec l = l0, v = w;
  const double dt = 1.0 / steps;
  if (out) out->push_back({l, v});
  for (int s = 0; s < steps; ++s) {
    const Vec k1l = v, k1v = geodesic_accel(fr, l, v);
    const Vec k2l = v + 0.5 * dt * k1v, k2v = geodesic_accel(fr, l + 0.5 * dt * k1l, k2l);
    const Vec k3l = v + 0.5 * dt * k2v, k3v = geodesic_accel(fr, l + 0.5 * dt * k2l, k3l);
    const Vec k4l = v + dt * k3v, k4v = geodesic_accel(fr, l + dt * k3l, k4l);
    l += dt / 6 * (k1l + 2 * k2l + 2 * k3l + k4l);
    v += dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    if (out) out->push_back({l, v});
  }
  return {l, v};
}

// g-orthonormal basis of the tangent space of the indicatrix at l
inline Mat indicatrix_tangent_basis(const PointFrame& fr, const Vec& l) {
  const FinslerEval e = eval_metric(fr, l, 0.0);
  const int n = fr.dim;
  std::vector<Vec> basis;
  const Vec nrm = l / e.K;  // g-unit normal
  for (int k = 0; k < n && static_cast<int>(basis.size()) < n - 1; ++k) {
    Vec c = Vec::Unit(n, k);
    c -= nrm * nrm.dot(e.g_low * c);
    for (const Vec& b : basis) c -= b * b.dot(e.g_low * c);
    const double nn = c.dot(e.g_low * c);
    if (nn < 1e-12) continue;
    basis.push_back(c / std::sqrt(nn));
  }
  Mat T(n, n - 1);
  for (int a = 0; a < n - 1; ++a) T.col(a) = basis[a];
  return T;
}

}  // namespace detail

// Shooting with Gauss-Newton on the initial velocity; the parameter runs
// over [0, 1] so the speed equals the arc length.
inline GeodesicArc geodesic_numeric(const PointFrame& fr, const Vec& l1_in, const Vec& l2_in, const BvpOptions& opt = {}) {
  const int n = fr.dim;
  // put the endpoints on the indicatrix
  const Vec l1 = l1_in / eval_scalars(fr, l1_in).K;
  const Vec l2 = l2_in / eval_scalars(fr, l2_in).K;
  GeodesicArc arc;
  const Mat T = detail::indicatrix_tangent_basis(fr, l1);
  const Mat g1 = eval_metric(fr, l1, 0.0).g_low;
  if (max_abs(Vec(l2 - l1)) < 1e-14) {
    arc.samples.push_back({0.0, 0.0, 0.0, l1, Vec::Zero(n)});
    return arc;
  }
  // initial guess: chord projected on the tangent space, with the arc
  // length of a chord on a sphere of radius 1/h
  auto guess = [&](const Vec& to) {
    const Vec chord = to - l1;
    Vec cc = T.transpose() * g1 * chord;
    const double half = 0.5 * fr.h * std::sqrt(chord.dot(g1 * chord));
    return Vec(cc * (2 * std::asin(std::min(1.0, half)) / fr.h / std::max(cc.norm(), 1e-300)));
  };
  Vec target = l2;
  Vec c;

  // endpoint pulled back onto the indicatrix, so n - 1 unknowns can zero it
  auto residual = [&](const Vec& cc, int st) {
    const Vec end = detail::shoot(fr, l1, T * cc, st).first;
    return Vec(end / eval_scalars(fr, end).K - target);
  };
  const int jac_steps = opt.initial_steps;
  Vec r;
  // Gauss-Newton at a fixed resolution; the Jacobian stays on the coarse grid
  auto solve = [&](int st, double tol) {
    bool have_r = false;  // r already holds residual(c, st)
    for (int it = 0; it < opt.max_iterations; ++it) {
      ++arc.iterations;
      if (!have_r) r = residual(c, st);
      if (max_abs(r) < tol) return true;
      // forward differences on the coarse grid
      const Vec rj = st == jac_steps ? r : residual(c, jac_steps);
      Mat Jm(n, n - 1);
      const double hstep = 1e-7 * std::max(1.0, c.norm());
      for (int a = 0; a < n - 1; ++a) {
        Vec cp = c;
        cp[a] += hstep;
        Jm.col(a) = (residual(cp, jac_steps) - rj) / hstep;
      }
      const Vec dc = Jm.colPivHouseholderQr().solve(-r);
      // cap at a fraction of the current length, then backtrack
      double lam = 1.0;
      const double cn = c.norm();
      if (dc.norm() > 0.25 * std::max(cn, 0.5)) lam = 0.25 * std::max(cn, 0.5) / dc.norm();
      const double r0 = rj.norm();
      Vec trial = c + lam * dc;
      Vec rt = residual(trial, jac_steps);
      for (int k = 0; k < 30 && !(rt.norm() < r0 || r0 < 1e-8); ++k) {
        lam *= 0.5;
        trial = c + lam * dc;
        rt = residual(trial, jac_steps);
      }
      c = trial;
      if (!c.allFinite()) return false;
      have_r = st == jac_steps;
      if (have_r) r = rt;
    }
    return false;
  };
  // continuation: walk the target from l1 to l2 along the normalised chord
  const Vec c0 = guess(l2);
  const int stages = std::max(1, static_cast<int>(std::ceil(c0.norm() / opt.stage_length)));
  c = guess(l1 + (l2 - l1) / stages);
  int steps = opt.initial_steps;
  bool ok = true;
  for (int k = 1; k < stages && ok; ++k) {
    const Vec mid = l1 + (l2 - l1) * (static_cast<double>(k) / stages);
    target = mid / eval_scalars(fr, mid).K;
    ok = solve(steps, opt.stage_tol);
    c *= static_cast<double>(k + 1) / k;  // extrapolate the length
  }
  target = l2;
  ok = ok && solve(steps, opt.tol);
  // double the resolution until the solution stops moving
  while (ok && steps < opt.max_steps) {
    const Vec prev = c;
    steps *= 2;
    ok = solve(steps, opt.tol);
    if (max_abs(Vec(T * (c - prev))) < opt.step_tol) break;
  }
  if (!ok) throw EvalError("BVP failed");
  arc.steps = steps;
  arc.endpoint_error = max_abs(r);
  const Vec w = T * c;
  const double L = std::sqrt(w.dot(g1 * w));
  arc.s1 = 0.0;
  arc.s2 = L;
  std::vector<std::pair<Vec, Vec>> states;
  detail::shoot(fr, l1, w, steps, &states);
  const int count = std::clamp(opt.sample_count, 2, steps + 1);
  for (int k = 0; k < count; ++k) {
    const int i = static_cast<int>((static_cast<long long>(k) * steps) / (count - 1));
    ArcSample smp;
    smp.s = L * i / steps;
    smp.l = states[i].first;
    smp.dl = states[i].second / L;
    if (n == 3 || n == 2) {
      const SphericalCoords sc = spherical_coords(fr, smp.l);
      smp.chi = sc.chi;
      smp.phi = sc.phi;
    }
    arc.samples.push_back(smp);
  }
  if (n == 3) {
    const ArcFit f = fit_arc(fr, l1, l2);
    arc.C_tilde = f.k.C_tilde;
    arc.s_tilde = f.k.s_tilde;
    arc.phi_tilde = f.k.phi_tilde;
  }
  return arc;
}

// (1/h^2) sin^2(h chi) phi' at one sample, phi' from R and dR (N = 3)
inline double clairaut_value(const PointFrame& fr, const ArcSample& smp) {
  const AdaptedFrame af(fr);
  const Vec R = af.to_R(smp.l), dR = af.to_R(smp.dl);
  const double rr = R[0] * R[0] + R[1] * R[1];
  if (rr < 1e-300) return 0.0;  // on the axis
  const double sn = std::sin(fr.h * smp.chi);
  return sn * sn * (R[0] * dR[1] - R[1] * dR[0]) / (rr * fr.h * fr.h);
}

// Closed-form arc sampled at count points of [s0, s1]; dl by 5-point differences.
inline GeodesicArc geodesic_closed_arc(const PointFrame& fr, const ArcConstants& k, double s0, double s1, int count) {
  if (fr.dim != 3) throw std::invalid_argument("closed-form arcs need N = 3");
  if (count < 2) throw std::invalid_argument("at least two samples");
  arc_c(fr.h, k.C_tilde);
  const AdaptedFrame af(fr);
  GeodesicArc arc;
  arc.C_tilde = k.C_tilde;
  arc.s_tilde = k.s_tilde;
  arc.phi_tilde = k.phi_tilde;
  arc.s1 = s0;
  arc.s2 = s1;
  auto l_at = [&](double s) { return to_std(Vec(af.to_y(arc_R(fr, k, s)))); };
  for (int i = 0; i < count; ++i) {
    ArcSample smp;
    smp.s = s0 + (s1 - s0) * i / (count - 1);
    smp.chi = arc_chi(fr.h, k, smp.s);
    smp.phi = arc_phi(fr.h, k, smp.s);
    smp.l = af.to_y(arc_R(fr, k, smp.s));
    const auto d = fd5([&](double ds) { return l_at(smp.s + ds); }, 1e-4);
    smp.dl = Eigen::Map<const Vec>(d.data(), 3);
    arc.samples.push_back(smp);
  }
  return arc;
}

// Unit-speed and Clairaut drift along a numeric arc (N = 3 for Clairaut).
struct ArcInvariants {
  double unit_speed = 0.0;
  double clairaut = 0.0;
};

inline ArcInvariants arc_invariants(const PointFrame& fr, const GeodesicArc& arc) {
  ArcInvariants r;
  for (const auto& smp : arc.samples) {
    const FinslerEval e = eval_metric(fr, smp.l, 0.0);
    r.unit_speed = std::max(r.unit_speed, std::abs(smp.dl.dot(e.g_low * smp.dl) - 1.0));
    if (fr.dim == 3) r.clairaut = std::max(r.clairaut, std::abs(clairaut_value(fr, smp) - arc.C_tilde));
  }
  return r;
}

// Delimited dump: s, chi, phi, l components, and the Clairaut value for N = 3.
inline void write_arc(std::ostream& os, const PointFrame& fr, const GeodesicArc& arc, char sep = '\t') {
  os << "s" << sep << "chi" << sep << "phi";
  for (int i = 0; i < fr.dim; ++i) os << sep << "l" << i;
  if (fr.dim == 3) os << sep << "clairaut";
  os << '\n';
  os.precision(17);
  for (const auto& s : arc.samples) {
    os << s.s << sep << s.chi << sep << s.phi;
    for (int i = 0; i < s.l.size(); ++i) os << sep << s.l[i];
    if (fr.dim == 3) os << sep << clairaut_value(fr, s);
    os << '\n';
  }
}

}  // namespace finsler
