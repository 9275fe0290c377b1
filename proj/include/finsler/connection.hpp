#pragma once
// The angle-preserving connection: N^k_n, D^k_nm, the d_i operator, the
// covariant derivative, transport and transitivity checks.

#include "finsler/angle.hpp"
#include "finsler/numerics.hpp"

#include <functional>

namespace finsler {

//   N(k, n)          = N^k_n
//   D(k, n, m)       = D^k_nm
//   dD_dy(k, n, m, i) = d D^k_nm / d y^i
struct ConnectionEval {
  Mat N;
  Tensor3 D;
  Tensor4 dD_dy;
};

namespace detail {

// y^j nabla_n b_j
inline Vec ynb(const FinslerEval& e, const PointFrame& fr) { return fr.nabla_b * e.y; }

// a^k_nj y^j as (k, n)
inline Mat christoffel_y(const PointFrame& fr, const Vec& y) {
  const int n = fr.dim;
  Mat r = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m)
      for (int j = 0; j < n; ++j) r(k, m) += fr.christoffel(k, m, j) * y[j];
  return r;
}

// a^{kj} nabla_n b_j as (k, n)
inline Mat raised_nb(const PointFrame& fr) { return fr.a_inv * fr.nabla_b.transpose(); }

inline void need_aux(const FinslerEval& e) {
  if (!e.has_aux) throw std::logic_error("connection needs the auxiliary tensors");
}

}  // namespace detail

// flip_d reverses the sign of D; a negative control for the metricity suite.
inline ConnectionEval connection_coeffs(const FinslerEval& e, const PointFrame& fr, bool flip_d = false) {
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar;
  const Vec ynb = detail::ynb(e, fr);
  const Mat anb = detail::raised_nb(fr);
  const Mat enb = e.eta_up * fr.nabla_b.transpose();
  const Mat cy = detail::christoffel_y(fr, e.y);
  ConnectionEval c;
  c.N.resize(n, n);
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m)
      c.N(k, m) = -((1 - h) * b + 0.5 * g * q) / h * anb(k, m) -
                  (g / (2 * q) * e.v[k] - (1 - h) * e.b_up[k]) / h * ynb[m] - cy(k, m);
  c.D = Tensor3(n);
  c.dD_dy = Tensor4(n);
  const double s = flip_d ? -1.0 : 1.0;
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int m = 0; m < n; ++m) {
        double d = ((1 - h) * e.b_low[m] + g / (2 * q) * e.v_low[m]) / h * anb(k, nn) +
                   g / (2 * q * h) * e.eta_mixed(k, m) * ynb[nn] +
                   (g / (2 * q) * e.v[k] - (1 - h) * e.b_up[k]) / h * fr.nabla_b(nn, m) + fr.christoffel(k, nn, m);
        c.D(k, nn, m) = s * d;
        for (int i = 0; i < n; ++i)
          c.dD_dy(k, nn, m, i) =
              s * (g / (2 * q * h) * e.eta(m, i) * enb(k, nn) -
                   g / (2 * q * q * q * h) * (e.eta_mixed(k, m) * e.v_low[i] + e.eta_mixed(k, i) * e.v_low[m]) * ynb[nn] +
                   g / (2 * q * h) * (e.eta_mixed(k, m) * fr.nabla_b(nn, i) + e.eta_mixed(k, i) * fr.nabla_b(nn, m)));
      }
  return c;
}

// Alternative closed forms of N^k_n.
inline Mat N_form_eta(const FinslerEval& e, const PointFrame& fr) {
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar, A = e.A_scalar;
  const Mat cy = detail::christoffel_y(fr, e.y);
  Mat r(n, n);
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m) {
      double s = 0;
      for (int j = 0; j < n; ++j)
        s += (b * e.a_inv(k, j) - e.b_up[k] * e.y[j] - A / h * e.eta_up(k, j) +
              (e.b_up[k] - (b + g * q) / (q * q) * e.v[k]) / h * e.y[j]) *
             fr.nabla_b(m, j);
      r(k, m) = s - cy(k, m);
    }
  return r;
}

inline Mat N_form_eta_compact(const FinslerEval& e, const PointFrame& fr) {
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar, A = e.A_scalar;
  const Vec ynb = detail::ynb(e, fr);
  const Mat enb = e.eta_up * fr.nabla_b.transpose();
  const Mat cy = detail::christoffel_y(fr, e.y);
  Mat r(n, n);
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m)
      r(k, m) = (b - A / h) * enb(k, m) +
                (e.v[k] / (q * q) * (b - (b + g * q) / h) + (1 / h - 1) * e.b_up[k]) * ynb[m] - cy(k, m);
  return r;
}

// Form with the x-gradient of K at fixed y and the angular projector.
inline Mat N_form_angular(const FinslerEval& e, const PointFrame& fr, const Vec& dK_dx) {
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar, A = e.A_scalar, K = e.K, B = e.B;
  const Vec l = e.l_up(), ll = e.l_low();
  const Vec ynb = detail::ynb(e, fr);
  const Mat enb = e.eta_up * fr.nabla_b.transpose();
  const Mat cy = detail::christoffel_y(fr, e.y);
  const double cm = 1 / (h * q) - 1 / q + g * b / B;
  Mat r(n, n);
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m) {
      double proj = 0;
      for (int t = 0; t < n; ++t) proj += (kronecker(k, t) - l[k] * ll[t]) * cy(t, m);
      r(k, m) = -l[k] * dK_dx[m] + (b - A / h) * enb(k, m) + cm * K * e.m_vec_up[k] * ynb[m] - proj;
    }
  return r;
}

// y-derivative of N^k_n from the expanded coefficient form. With the
// B.5-type arrangement (variant = true) the l^j/m^j terms are kept separate.
inline Tensor3 N_y_derivative_form(const FinslerEval& e, const PointFrame& fr, bool variant) {
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar, A = e.A_scalar, K = e.K, B = e.B;
  const Vec lu = e.l_up(), ll = e.l_low();
  const Vec& mu = e.m_vec_up;
  const Vec& ml = e.m_vec_low;
  const Mat& eu = e.eta_up;
  const Mat& em = e.eta_mixed;  // (j, m) = eta^j_m
  const Mat& nb = fr.nabla_b;
  const double cm = 1 / (h * q) - 1 / q + g * b / B;
  const double c1 = (q - q / h + g * (b + g * q) / (2 * h)) / K;
  const double c2 = (b - A / h) * K / B;
  Tensor3 r(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int m = 0; m < n; ++m) {
        double s = -lu[k] * g * (q / K) * (K * K / B) * nb(nn, m) + cm * K * mu[k] * nb(nn, m) -
                   fr.christoffel(k, nn, m);
        for (int j = 0; j < n; ++j) {
          const double lj = lu[j];
          double t = c1 * eu(k, j) * ml[m];
          double br = (B / (K * K)) * eu(k, j) * ll[m] - lu[k] * em(j, m) + (b / q) * mu[k] * em(j, m);
          if (variant) br += -lj * em(k, m) + (b / q) * mu[j] * em(k, m);
          t += c2 * br;
          t += K * b / (q * q) * (1 / h - 1) * ml[m] * mu[k] * lj;
          t -= K / q * (1 / h - 1) * ml[m] * lu[k] * lj;
          if (variant)
            t -= K * ((b + g * q) / (h * q) - b / q) / q * em(k, m) * lj;
          else
            t -= g / (2 * q * h) * em(k, m) * e.y[j];
          s += t * nb(nn, j);
        }
        r(k, nn, m) = s;
      }
  return r;
}

// ---------------------------------------------------------------------------
// Fields over (x, y) and derivative operators.

using FieldFn = std::function<std::vector<double>(const PointFrame&, const Vec&)>;

struct Probe {
  const ManifoldSpec* spec = nullptr;
  Vec x, y;
  int level = 1;
  double x_step = kXStep;
  double y_rel = kYStep;
};

// dw/dx^i at fixed y, as out[i][c].
inline std::vector<std::vector<double>> x_partials(const Probe& p, const FieldFn& fn) {
  return fd_gradient([&](const Vec& xs) { return fn(eval_point(*p.spec, xs, p.level), p.y); }, p.x, p.x_step);
}

// dw/dy^k at fixed x, as out[k][c].
inline std::vector<std::vector<double>> y_partials(const Probe& p, const PointFrame& fr, const FieldFn& fn) {
  const double step = p.y_rel * std::sqrt(p.y.dot(fr.a * p.y));
  return fd_gradient([&](const Vec& ys) { return fn(fr, ys); }, p.y, step);
}

// d_i w = dw/dx^i + N^k_i dw/dy^k, as out[i][c].
inline std::vector<std::vector<double>> d_operator(const Probe& p, const PointFrame& fr, const Mat& N,
                                                   const FieldFn& fn) {
  auto dx = x_partials(p, fn);
  auto dy = y_partials(p, fr, fn);
  const int n = fr.dim;
  for (int i = 0; i < n; ++i)
    for (std::size_t c = 0; c < dx[i].size(); ++c)
      for (int k = 0; k < n; ++k) dx[i][c] += N(k, i) * dy[k][c];
  return dx;
}

enum class Rank { Scalar, Up, Down, UpDown, DownDown };

inline const char* to_string(Rank r) {
  switch (r) {
    case Rank::Scalar: return "scalar";
    case Rank::Up: return "(1,0)";
    case Rank::Down: return "(0,1)";
    case Rank::UpDown: return "(1,1)";
    case Rank::DownDown: return "(0,2)";
  }
  return "?";
}

// D_i w with components flattened row-major; out[i][c].
inline std::vector<std::vector<double>> covariant_derivative(const Probe& p, const PointFrame& fr,
                                                             const ConnectionEval& c, const FieldFn& fn, Rank rank) {
  const int n = fr.dim;
  auto out = d_operator(p, fr, c.N, fn);
  const std::vector<double> w = fn(fr, p.y);
  const std::size_t expect = rank == Rank::Scalar ? 1 : (rank == Rank::Up || rank == Rank::Down) ? n : n * n;
  if (w.size() != expect) throw std::invalid_argument("field size does not match its rank");
  for (int i = 0; i < n; ++i) {
    auto& o = out[i];
    switch (rank) {
      case Rank::Scalar: break;
      case Rank::Up:
        for (int a = 0; a < n; ++a)
          for (int hh = 0; hh < n; ++hh) o[a] += c.D(a, i, hh) * w[hh];
        break;
      case Rank::Down:
        for (int a = 0; a < n; ++a)
          for (int hh = 0; hh < n; ++hh) o[a] -= c.D(hh, i, a) * w[hh];
        break;
      case Rank::UpDown:
        for (int a = 0; a < n; ++a)
          for (int m = 0; m < n; ++m)
            for (int hh = 0; hh < n; ++hh)
              o[a * n + m] += c.D(a, i, hh) * w[hh * n + m] - c.D(hh, i, m) * w[a * n + hh];
        break;
      case Rank::DownDown:
        for (int a = 0; a < n; ++a)
          for (int m = 0; m < n; ++m)
            for (int hh = 0; hh < n; ++hh)
              o[a * n + m] -= c.D(hh, i, a) * w[hh * n + m] + c.D(hh, i, m) * w[a * n + hh];
        break;
    }
  }
  return out;
}

inline double max_abs(const std::vector<std::vector<double>>& v) {
  double r = 0;
  for (const auto& row : v)
    for (double x : row) r = std::max(r, std::abs(x));
  return r;
}

namespace fields {

inline std::vector<double> K(const PointFrame& f, const Vec& y) { return {eval_scalars(f, y).K}; }
inline std::vector<double> b(const PointFrame& f, const Vec& y) { return {f.b_low.dot(y)}; }
inline std::vector<double> q(const PointFrame& f, const Vec& y) { return {eval_scalars(f, y).q}; }
inline std::vector<double> B(const PointFrame& f, const Vec& y) { return {eval_scalars(f, y).B}; }
inline std::vector<double> q_over_b(const PointFrame& f, const Vec& y) {
  auto e = eval_scalars(f, y);
  return {e.q / e.b_scalar};
}
inline std::vector<double> B_over_b2(const PointFrame& f, const Vec& y) {
  auto e = eval_scalars(f, y);
  return {e.B / (e.b_scalar * e.b_scalar)};
}
inline std::vector<double> y_up(const PointFrame&, const Vec& y) { return to_std(y); }
inline std::vector<double> y_low(const PointFrame& f, const Vec& y) { return to_std(eval_metric(f, y).y_low); }
inline std::vector<double> g_low(const PointFrame& f, const Vec& y) { return to_std(eval_metric(f, y).g_low); }
inline std::vector<double> g_up(const PointFrame& f, const Vec& y) { return to_std(eval_metric(f, y).g_up); }
// w^n_k = y^n y_k / K^2
inline std::vector<double> yy_mixed(const PointFrame& f, const Vec& y) {
  auto e = eval_metric(f, y);
  return to_std(Mat(e.y * e.y_low.transpose() / (e.K * e.K)));
}

}  // namespace fields

// N^m_n from the kappa map: -y^m_i (d zeta^i / d x^n + a^i_kn zeta^k), with
// the x-derivative of zeta at fixed y by finite differences.
inline Mat N_from_kappa(const Probe& p, const PointFrame& fr) {
  const int n = fr.dim;
  auto dz = x_partials(p, [](const PointFrame& f, const Vec& y) { return to_std(kappa_forward(eval_scalars(f, y)).zeta); });
  const KappaJet k = kappa_jacobians(eval_cartan(fr, p.y));
  Mat inner(n, n);  // (i, nn)
  for (int i = 0; i < n; ++i)
    for (int nn = 0; nn < n; ++nn) {
      double s = dz[nn][i];
      for (int kk = 0; kk < n; ++kk) s += fr.christoffel(i, kk, nn) * k.zeta[kk];
      inner(i, nn) = s;
    }
  return -k.dy * inner;
}

// dlambda/dx^i + N^k_i(y1) dlambda/dy1^k + N^k_i(y2) dlambda/dy2^k
inline Vec angle_transport_residual(const ManifoldSpec& spec, const Vec& x, const Vec& y1, const Vec& y2,
                                    double x_step = kXStep) {
  const PointFrame fr = eval_point(spec, x, 1);
  const AnglePair p = angle(fr, y1, y2);
  if (!p.has_gradients) throw EvalError("on the Finsleroid axis slit");
  const Mat N1 = connection_coeffs(evaluate(fr, y1), fr).N;
  const Mat N2 = connection_coeffs(evaluate(fr, y2), fr).N;
  auto dl = fd_gradient(
      [&](const Vec& xs) {
        const PointFrame f = eval_point(spec, xs, 0);
        return std::vector<double>{lambda_value(f, angle_arg(f, y1), angle_arg(f, y2))};
      },
      x, x_step);
  const int n = fr.dim;
  Vec r(n);
  for (int i = 0; i < n; ++i) r[i] = dl[i][0] + N1.col(i).dot(p.dlam_dy1) + N2.col(i).dot(p.dlam_dy2);
  return r;
}

// A curve x(t) with its velocity.
struct Curve {
  std::function<Vec(double)> x;
  std::function<Vec(double)> xdot;
};

// Quadratic curve x0 + v t + w t^2.
inline Curve quadratic_curve(const Vec& x0, const Vec& v, const Vec& w) {
  return {[=](double t) { return Vec(x0 + v * t + w * (t * t)); }, [=](double t) { return Vec(v + 2.0 * t * w); }};
}

// Parallel transport dy/dt = N^k_i(x, y) xdot^i by classical RK4.
inline std::vector<Vec> transport_rk4(const ManifoldSpec& spec, const Curve& c, std::vector<Vec> ys, double t1,
                                      int steps) {
  const double dt = t1 / steps;
  auto rhs = [&](const PointFrame& fr, const Vec& xd, const Vec& y) {
    return Vec(connection_coeffs(evaluate(fr, y), fr).N * xd);
  };
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    const PointFrame f0 = eval_point(spec, c.x(t), 1);
    const PointFrame fm = eval_point(spec, c.x(t + 0.5 * dt), 1);
    const PointFrame f1 = eval_point(spec, c.x(t + dt), 1);
    const Vec v0 = c.xdot(t), vm = c.xdot(t + 0.5 * dt), v1 = c.xdot(t + dt);
    for (Vec& y : ys) {
      const Vec k1 = rhs(f0, v0, y);
      const Vec k2 = rhs(fm, vm, Vec(y + 0.5 * dt * k1));
      const Vec k3 = rhs(fm, vm, Vec(y + 0.5 * dt * k2));
      const Vec k4 = rhs(f1, v1, Vec(y + dt * k3));
      y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return ys;
}

struct TransportResult {
  double alpha_change = 0.0;
  double K1_change = 0.0, K2_change = 0.0;
  double length = 0.0;  // a-length of the curve
};

inline TransportResult transport_pair(const ManifoldSpec& spec, const Curve& c, const Vec& y1, const Vec& y2,
                                      double t1 = 1.0, int steps_per_unit = 1000) {
  const int steps = std::max(1, static_cast<int>(std::ceil(steps_per_unit * t1)));
  const PointFrame f0 = eval_point(spec, c.x(0.0), 1);
  auto out = transport_rk4(spec, c, {y1, y2}, t1, steps);
  const PointFrame f1 = eval_point(spec, c.x(t1), 1);
  TransportResult r;
  r.alpha_change = std::abs(angle(f1, out[0], out[1]).alpha - angle(f0, y1, y2).alpha);
  r.K1_change = std::abs(eval_scalars(f1, out[0]).K - eval_scalars(f0, y1).K);
  r.K2_change = std::abs(eval_scalars(f1, out[1]).K - eval_scalars(f0, y2).K);
  // curve length by Simpson on the a-speed
  const int m = 64;
  for (int i = 0; i <= m; ++i) {
    const double t = t1 * i / m;
    const PointFrame f = eval_point(spec, c.x(t), 0);
    const Vec v = c.xdot(t);
    const double w = (i == 0 || i == m) ? 1 : (i % 2 ? 4 : 2);
    r.length += w * std::sqrt(v.dot(f.a * v));
  }
  r.length *= t1 / (3.0 * m);
  return r;
}

// Transitivity: (d/dx^i + N^k_i d/dy^k) w  versus  (d/dx^i - a^k_ij zeta^j d/dzeta^k) W
// with W(x, zeta(x, y)) = w(x, y). Returns the per-i difference.
inline Vec transitivity_residual(const Probe& p, const FieldFn& w, const FieldFn& W) {
  const PointFrame fr = eval_point(*p.spec, p.x, std::max(p.level, 1));
  const Mat N = connection_coeffs(evaluate(fr, p.y), fr).N;
  auto lhs = d_operator(p, fr, N, w);
  const Vec zeta = kappa_forward(eval_scalars(fr, p.y)).zeta;
  Probe pz = p;
  pz.y = zeta;
  auto dxW = x_partials(pz, W);
  auto dzW = y_partials(pz, fr, W);
  const int n = fr.dim;
  Vec r(n);
  for (int i = 0; i < n; ++i) {
    double rhs = dxW[i][0];
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) rhs -= fr.christoffel(k, j, i) * zeta[j] * dzW[k][0];
    r[i] = lhs[i][0] - rhs;
  }
  return r;
}

namespace zeta_fields {

// S^(1/h), the image of K.
inline std::vector<double> K_image(const PointFrame& f, const Vec& z) {
  return {std::pow(z.dot(f.a * z), 0.5 / f.h)};
}

// b recovered from zeta.
inline std::vector<double> b_image(const PointFrame& f, const Vec& z) {
  const double S2 = z.dot(f.a * z);
  const double zb = f.b_low.dot(z);
  const Vec zt = z - zb * f.b_up;
  const double rzz = std::sqrt(std::max(0.0, zt.dot(f.a * zt)));
  const double hk = std::pow(S2, (1 - f.h) / (2 * f.h));
  const double chi = std::acos(std::clamp(zb / std::sqrt(S2), -1.0, 1.0)) / f.h;
  const double J = std::exp(-0.5 * f.g * chi);
  return {(zb - f.g / (2 * f.h) * rzz) * hk / J};
}

}  // namespace zeta_fields

}  // namespace finsler
