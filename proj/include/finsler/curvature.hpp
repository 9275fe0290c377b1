#pragma once
// Curvature of the angle-preserving connection: M, E, rho, P, T, their
// closed forms, definitional finite-difference paths, contractions and
// the cyclic identities.

#include "finsler/connection.hpp"

#include <string>
#include <vector>

namespace finsler {

//   M(n, i, j)        = M^n_ij,   M_low(n, i, j) = M_nij
//   E(k, n, i, j)     = E_k^n_ij
//   rho(k, n, i, j)   = rho_k^n_ij, rho_low(k, n, i, j) = rho_knij
//   P(t, i, j)        = P_tij
//   T(k, n, h, m)     = T_kn^hm
struct CurvatureEval {
  Tensor3 M, M_low;
  Tensor4 E;
  Tensor4 rho, rho_low;
  Tensor3 P;
  Tensor4 T;
  KappaJet kj;
  Tensor3 C_mixed;  // C_mixed(n, h, k) = C^n_hk
};

namespace detail {

inline void need_curv(const PointFrame& fr) {
  if (fr.level < 2) throw std::logic_error("frame lacks the Riemannian curvature");
}

// b_l a_t^l_ij as (t, i, j)
inline Tensor3 b_riem(const PointFrame& fr) {
  const int n = fr.dim;
  Tensor3 r(n);
  for (int t = 0; t < n; ++t)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r(t, i, j) += fr.b_low[l] * fr.riem(t, l, i, j);
  return r;
}

// contract the first index of a (t, i, j) object with a vector
inline Mat first_contract(const Tensor3& t, const Vec& v) {
  const int n = t.dim();
  Mat r = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) += v[a] * t(a, i, j);
  return r;
}

// lower (or raise) the second index of a rank-4 object
inline Tensor4 map_index1(const Tensor4& t, const Mat& m) {
  const int n = t.dim();
  Tensor4 r(n);
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int p = 0; p < n; ++p) s += m(a, p) * t(k, p, i, j);
          r(k, a, i, j) = s;
        }
  return r;
}

inline Tensor3 map_index0(const Tensor3& t, const Mat& m) {
  const int n = t.dim();
  Tensor3 r(n);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int p = 0; p < n; ++p) s += m(a, p) * t(p, i, j);
        r(a, i, j) = s;
      }
  return r;
}

// C^n_hk = g^{np} A_phk / K
inline Tensor3 cartan_mixed(const FinslerEval& e) {
  const int n = e.dim;
  Tensor3 r(n);
  for (int a = 0; a < n; ++a)
    for (int h = 0; h < n; ++h)
      for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int p = 0; p < n; ++p) s += e.g_up(a, p) * e.cartan(p, h, k);
        r(a, h, k) = s / e.K;
      }
  return r;
}

}  // namespace detail

// Full contraction sum T1(a,b,..) T2(a',b',..) m0(a,a') m1(b,b') ...
template <int R>
double contract(const Tensor<R>& t1, const Tensor<R>& t2, const std::array<const Mat*, R>& m) {
  const int n = t1.dim();
  // raise t2 index by index
  std::vector<double> cur = t2.flat();
  std::size_t stride = 1;
  for (int r = R - 1; r >= 0; --r) {
    std::vector<double> next(cur.size(), 0.0);
    const std::size_t block = stride * n;
    for (std::size_t base = 0; base < cur.size(); base += block)
      for (std::size_t s = 0; s < stride; ++s)
        for (int a = 0; a < n; ++a) {
          double acc = 0;
          for (int p = 0; p < n; ++p) acc += (*m[r])(a, p) * cur[base + p * stride + s];
          next[base + a * stride + s] = acc;
        }
    cur.swap(next);
    stride *= n;
  }
  double sum = 0;
  for (std::size_t k = 0; k < cur.size(); ++k) sum += t1.flat()[k] * cur[k];
  return sum;
}

// M^n_ij closed form.
inline Tensor3 M_closed(const FinslerEval& e, const PointFrame& fr) {
  detail::need_curv(fr);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar;
  const Tensor3 br = detail::b_riem(fr);
  Tensor3 M(n);
  for (int nn = 0; nn < n; ++nn)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int t = 0; t < n; ++t) {
          const double coef = ((1 - h) * b + 0.5 * g * q) * e.a_inv(nn, t) +
                              (g / (2 * q) * e.v[nn] - (1 - h) * e.b_up[nn]) * e.y[t];
          s += coef / h * br(t, i, j) - fr.riem(t, nn, i, j) * e.y[t];
        }
        M(nn, i, j) = s;
      }
  return M;
}

// E_k^n_ij closed form.
inline Tensor4 E_closed(const FinslerEval& e, const PointFrame& fr) {
  detail::need_curv(fr);
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q;
  const Tensor3 br = detail::b_riem(fr);
  Tensor4 E(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int t = 0; t < n; ++t) {
            const double coef = ((1 - h) * e.b_low[k] + g / (2 * q) * e.v_low[k]) * e.a_inv(nn, t) +
                                g / (2 * q) * e.eta_mixed(nn, k) * e.y[t] +
                                (g / (2 * q) * e.v[nn] - (1 - h) * e.b_up[nn]) * kronecker(t, k);
            s += coef * br(t, i, j);
          }
          E(k, nn, i, j) = -s / h + fr.riem(k, nn, i, j);
        }
  return E;
}

// P_tij
inline Tensor3 P_closed(const FinslerEval& e, const PointFrame& fr) {
  const int n = e.dim;
  const double h = e.h, q = e.q, A = e.A_scalar, K = e.K, B = e.B;
  Tensor3 P(n);
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int l = 0; l < n; ++l) s += (-h * q * q * e.b_up[l] + A * e.v[l]) * fr.riem_low(t, l, i, j);
        P(t, i, j) = s * K / (q * B);
      }
  return P;
}

// P_tij, the variant written with y^l in place of v^l.
inline Tensor3 P_closed_y(const FinslerEval& e, const PointFrame& fr) {
  const int n = e.dim;
  const double h = e.h, q = e.q, A = e.A_scalar, K = e.K, B = e.B, b = e.b_scalar;
  Tensor3 P(n);
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int l = 0; l < n; ++l)
          s += (-(h * q * q + b * A) * e.b_up[l] + A * e.y[l]) * fr.riem_low(t, l, i, j);
        P(t, i, j) = s * K / (q * B);
      }
  return P;
}

// T_kn^hm
inline Tensor4 T_closed(const FinslerEval& e, const KappaJet& kj) {
  const int n = e.dim;
  const double k2 = kj.kappa * kj.kappa, K2 = e.K * e.K, h = e.h;
  Tensor4 T(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int hh = 0; hh < n; ++hh)
        for (int m = 0; m < n; ++m)
          T(k, nn, hh, m) = k2 * (0.5 * (kj.dzeta(hh, k) * kj.dzeta(m, nn) - kj.dzeta(m, k) * kj.dzeta(hh, nn)) +
                                  (1 - h) / K2 *
                                      (e.y_low[k] * kj.zeta[hh] * kj.dzeta(m, nn) -
                                       e.y_low[nn] * kj.zeta[hh] * kj.dzeta(m, k)));
  return T;
}

// rho_knij closed form from M, P and the angular projectors.
inline Tensor4 rho_low_closed(const FinslerEval& e, const PointFrame& fr, const Tensor3& M_low, const Tensor3& P) {
  detail::need_aux(e);
  const int n = e.dim;
  const double K = e.K, B = e.B;
  const Vec l = e.l_low();
  const Vec& m = e.m_vec_low;
  const Mat& em = e.eta_mixed;  // (t, k) = eta^t_k
  Tensor4 r(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = -(l[k] * M_low(nn, i, j) - l[nn] * M_low(k, i, j)) / K;
          for (int t = 0; t < n; ++t) {
            s += (m[k] * em(t, nn) - m[nn] * em(t, k)) * P(t, i, j);
            for (int ll = 0; ll < n; ++ll) s += em(t, k) * em(ll, nn) * fr.riem_low(t, ll, i, j) * K * K / B;
          }
          r(k, nn, i, j) = s;
        }
  return r;
}

inline CurvatureEval curvature_tensors(const FinslerEval& e, const PointFrame& fr) {
  detail::need_curv(fr);
  CurvatureEval c;
  const int n = e.dim;
  c.kj = kappa_jacobians(e);
  c.C_mixed = detail::cartan_mixed(e);
  c.M = M_closed(e, fr);
  c.M_low = detail::map_index0(c.M, e.g_low);
  c.E = E_closed(e, fr);
  c.rho = Tensor4(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = c.E(k, nn, i, j);
          for (int hh = 0; hh < n; ++hh) s -= c.M(hh, i, j) * c.C_mixed(nn, hh, k);
          c.rho(k, nn, i, j) = s;
        }
  c.rho_low = detail::map_index1(c.rho, e.g_low);
  c.P = P_closed(e, fr);
  c.T = T_closed(e, c.kj);
  return c;
}

// ---------------------------------------------------------------------------
// Alternative closed forms.

// M^n_ij = -y^n_t zeta^h a_h^t_ij
inline Tensor3 M_via_kappa(const PointFrame& fr, const KappaJet& kj) {
  const int n = fr.dim;
  Tensor3 r(n);
  for (int nn = 0; nn < n; ++nn)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int t = 0; t < n; ++t)
          for (int hh = 0; hh < n; ++hh) s -= kj.dy(nn, t) * kj.zeta[hh] * fr.riem(hh, t, i, j);
        r(nn, i, j) = s;
      }
  return r;
}

// M_nij = -kappa^2 zeta^h zeta^m_n a_hmij
inline Tensor3 M_low_via_kappa(const PointFrame& fr, const KappaJet& kj) {
  const int n = fr.dim;
  Tensor3 r(n);
  for (int nn = 0; nn < n; ++nn)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int hh = 0; hh < n; ++hh)
          for (int m = 0; m < n; ++m) s -= kj.zeta[hh] * kj.dzeta(m, nn) * fr.riem_low(hh, m, i, j);
        r(nn, i, j) = kj.kappa * kj.kappa * s;
      }
  return r;
}

// (B/K^2) M_nij in terms of b, v and the Riemannian curvature.
inline Tensor3 M_low_scaled_form(const FinslerEval& e, const PointFrame& fr) {
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar;
  const Tensor3 br = detail::b_riem(fr);
  const Mat ybr = detail::first_contract(br, e.y);
  Tensor3 r(n);
  for (int nn = 0; nn < n; ++nn)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = ((1 - h) * b + 0.5 * g * q) / h * br(nn, i, j) -
                   (g / (2 * q) * e.v_low[nn] + (1 - h) * e.b_low[nn]) / h * ybr(i, j);
        for (int t = 0; t < n; ++t) s -= fr.riem_low(t, nn, i, j) * e.y[t];
        r(nn, i, j) = s;
      }
  return r;
}

// M_nij with the angular projector and the m-vector.
inline Tensor3 M_low_projector_form(const FinslerEval& e, const PointFrame& fr) {
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar, K = e.K, B = e.B;
  const Tensor3 br = detail::b_riem(fr);
  const Mat ybr = detail::first_contract(br, e.y);
  Tensor3 r(n);
  for (int nn = 0; nn < n; ++nn)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int t = 0; t < n; ++t) {
          double inner = ((1 - h) * b + 0.5 * g * q) / h * br(t, i, j);
          for (int l = 0; l < n; ++l) inner += e.y[l] * fr.riem_low(t, l, i, j);
          s += K * K / B * e.eta_mixed(t, nn) * inner;
        }
        r(nn, i, j) = s - K * e.m_vec_low[nn] / (q * h) * ybr(i, j);
      }
  return r;
}

// M^n_ij written with H^{nt}, H^n_l and m^n.
inline Tensor3 M_projector_form(const FinslerEval& e, const PointFrame& fr) {
  detail::need_aux(e);
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, b = e.b_scalar, K = e.K;
  const Tensor3 br = detail::b_riem(fr);
  const Mat ybr = detail::first_contract(br, e.y);
  Tensor3 r(n);
  for (int nn = 0; nn < n; ++nn)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = -K * e.m_vec_up[nn] / (q * h) * ybr(i, j);
        for (int t = 0; t < n; ++t) {
          // H^{nt} K^2/B = eta^{nt}
          s += ((1 - h) * b + 0.5 * g * q) * e.eta_up(nn, t) / h * br(t, i, j);
          for (int l = 0; l < n; ++l) s -= e.eta_mixed(nn, l) * fr.riem(t, l, i, j) * e.y[t];
        }
        r(nn, i, j) = s;
      }
  return r;
}

// (1/J^2) g_kl M^l_ij in terms of v, b and the Riemannian curvature.
inline Tensor3 M_low_J_form(const FinslerEval& e, const PointFrame& fr) {
  const int n = e.dim;
  const double h = e.h, g = e.g, q = e.q, A = e.A_scalar;
  const Tensor3 br = detail::b_riem(fr);
  const Mat ybr = detail::first_contract(br, e.y);
  Tensor3 r(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int m = 0; m < n; ++m) s += fr.riem(k, m, i, j) * e.v_low[m];
        s += A / h * br(k, i, j) - (g / (2 * q) * e.v_low[k] + (1 - h) * e.b_low[k]) / h * ybr(i, j);
        r(k, i, j) = s;
      }
  return r;
}

// E_k^n_ij = y^n_h zeta^h_km M^m_ij + y^n_m a_h^m_ij zeta^h_k
inline Tensor4 E_via_kappa(const PointFrame& fr, const KappaJet& kj, const Tensor3& M) {
  const int n = fr.dim;
  Tensor4 r(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int hh = 0; hh < n; ++hh)
            for (int m = 0; m < n; ++m)
              s += kj.dy(nn, hh) * kj.d2zeta(hh, k, m) * M(m, i, j) + kj.dy(nn, m) * fr.riem(hh, m, i, j) * kj.dzeta(hh, k);
          r(k, nn, i, j) = s;
        }
  return r;
}

// rho_k^n_ij = y^n_m a_h^m_ij zeta^h_k + (1-h)/K^2 (y^n g_km M^m_ij - y_k M^n_ij)
inline Tensor4 rho_via_kappa(const FinslerEval& e, const PointFrame& fr, const KappaJet& kj, const Tensor3& M) {
  const int n = fr.dim;
  const double c = (1 - e.h) / (e.K * e.K);
  Tensor4 r(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = -c * e.y_low[k] * M(nn, i, j);
          for (int m = 0; m < n; ++m) {
            s += c * e.y[nn] * e.g_low(k, m) * M(m, i, j);
            for (int hh = 0; hh < n; ++hh) s += kj.dy(nn, m) * fr.riem(hh, m, i, j) * kj.dzeta(hh, k);
          }
          r(k, nn, i, j) = s;
        }
  return r;
}

// rho_knij = T_kn^hm a_hmij
inline Tensor4 rho_low_via_T(const PointFrame& fr, const Tensor4& T) {
  const int n = fr.dim;
  Tensor4 r(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int hh = 0; hh < n; ++hh)
            for (int m = 0; m < n; ++m) s += T(k, nn, hh, m) * fr.riem_low(hh, m, i, j);
          r(k, nn, i, j) = s;
        }
  return r;
}

// ---------------------------------------------------------------------------
// Definitional paths with finite differences in x.

// M^n_ij = dN^n_j/dx^i - dN^n_i/dx^j - N^h_i D^n_jh + N^h_j D^n_ih
inline Tensor3 M_definitional(const Probe& p, const PointFrame& fr, const ConnectionEval& c) {
  const int n = fr.dim;
  auto dN = x_partials(p, [](const PointFrame& f, const Vec& y) { return to_std(connection_coeffs(evaluate(f, y), f).N); });
  Tensor3 M(n);
  for (int nn = 0; nn < n; ++nn)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = dN[i][nn * n + j] - dN[j][nn * n + i];
        for (int hh = 0; hh < n; ++hh) s += -c.N(hh, i) * c.D(nn, j, hh) + c.N(hh, j) * c.D(nn, i, hh);
        M(nn, i, j) = s;
      }
  return M;
}

// E_k^n_ij = d_i D^n_jk - d_j D^n_ik + D^m_jk D^n_im - D^m_ik D^n_jm
inline Tensor4 E_definitional(const Probe& p, const PointFrame& fr, const ConnectionEval& c) {
  const int n = fr.dim;
  auto dD = x_partials(p, [](const PointFrame& f, const Vec& y) { return connection_coeffs(evaluate(f, y), f).D.flat(); });
  auto dcomp = [&](int i, int a, int jj, int k) {  // d_i D^a_jk
    double s = dD[i][(a * n + jj) * n + k];
    for (int m = 0; m < n; ++m) s += c.N(m, i) * c.dD_dy(a, jj, k, m);
    return s;
  };
  Tensor4 E(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = dcomp(i, nn, j, k) - dcomp(j, nn, i, k);
          for (int m = 0; m < n; ++m) s += c.D(m, j, k) * c.D(nn, i, m) - c.D(m, i, k) * c.D(nn, j, m);
          E(k, nn, i, j) = s;
        }
  return E;
}

// E = -dM/dy by finite differences of the closed-form M.
inline Tensor4 E_from_M_derivative(const Probe& p, const PointFrame& fr) {
  const int n = fr.dim;
  auto dM = y_partials(p, fr, [](const PointFrame& f, const Vec& y) { return M_closed(evaluate(f, y), f).flat(); });
  Tensor4 E(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) E(k, nn, i, j) = -dM[k][(nn * n + i) * n + j];
  return E;
}

// ---------------------------------------------------------------------------
// Commutator of covariant derivatives. The inner D_j w is treated as a field
// labelled by j; only the tensor indices of w are transported.

inline FieldFn covariant_component(const ManifoldSpec* spec, int j, FieldFn w, Rank rank) {
  return [=](const PointFrame& f, const Vec& y) {
    Probe p{spec, f.x, y, 1};
    const ConnectionEval c = connection_coeffs(evaluate(f, y), f);
    return covariant_derivative(p, f, c, w, rank)[j];
  };
}

// comm[i][j] = (D_i D_j - D_j D_i) w, flattened components.
inline std::vector<std::vector<std::vector<double>>> commutator(const Probe& p, const PointFrame& fr,
                                                                const FieldFn& w, Rank rank) {
  const int n = fr.dim;
  const ConnectionEval c = connection_coeffs(evaluate(fr, p.y), fr);
  std::vector<std::vector<std::vector<double>>> outer(n);  // outer[j][i] = D_i (D_j w)
  for (int j = 0; j < n; ++j)
    outer[j] = covariant_derivative(p, fr, c, covariant_component(p.spec, j, w, rank), rank);
  std::vector<std::vector<std::vector<double>>> r(n, std::vector<std::vector<double>>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      r[i][j].resize(outer[j][i].size());
      for (std::size_t k = 0; k < r[i][j].size(); ++k) r[i][j][k] = outer[j][i][k] - outer[i][j][k];
    }
  return r;
}

// M^h_ij S_h w - rho_k^h_ij w^n_h + rho_h^n_ij w^h_k (or the vector analogue).
inline std::vector<std::vector<std::vector<double>>> commutator_prediction(const Probe& p, const PointFrame& fr,
                                                                           const CurvatureEval& ce, const FieldFn& w,
                                                                           Rank rank) {
  const int n = fr.dim;
  const auto w0 = w(fr, p.y);
  const auto dw = y_partials(p, fr, w);  // dw[h][c]
  const Tensor3& C = ce.C_mixed;
  std::vector<std::vector<std::vector<double>>> r(n, std::vector<std::vector<double>>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto& o = r[i][j];
      o.assign(w0.size(), 0.0);
      if (rank == Rank::Up) {
        for (int a = 0; a < n; ++a)
          for (int h = 0; h < n; ++h) {
            double sw = dw[h][a];
            for (int t = 0; t < n; ++t) sw += C(a, h, t) * w0[t];
            o[a] += ce.M(h, i, j) * sw + ce.rho(h, a, i, j) * w0[h];
          }
      } else if (rank == Rank::UpDown) {
        for (int a = 0; a < n; ++a)
          for (int k = 0; k < n; ++k)
            for (int h = 0; h < n; ++h) {
              double sw = dw[h][a * n + k];
              for (int t = 0; t < n; ++t) sw += C(a, h, t) * w0[t * n + k] - C(t, h, k) * w0[a * n + t];
              o[a * n + k] += ce.M(h, i, j) * sw - ce.rho(k, h, i, j) * w0[a * n + h] + ce.rho(h, a, i, j) * w0[h * n + k];
            }
      } else {
        throw std::invalid_argument("commutator prediction supports (1,0) and (1,1) fields");
      }
    }
  return r;
}

inline double commutator_residual(const Probe& p, const PointFrame& fr, const CurvatureEval& ce, const FieldFn& w,
                                  Rank rank) {
  auto lhs = commutator(p, fr, w, rank);
  auto rhs = commutator_prediction(p, fr, ce, w, rank);
  double m = 0;
  for (std::size_t i = 0; i < lhs.size(); ++i)
    for (std::size_t j = 0; j < lhs.size(); ++j)
      for (std::size_t k = 0; k < lhs[i][j].size(); ++k) m = std::max(m, std::abs(lhs[i][j][k] - rhs[i][j][k]));
  return m;
}

// rho_p^n_ij from the commutator on the constant vector fields e_p:
// [D_i, D_j] e_p = M^h_ij C^n_hp + rho_p^n_ij.
inline Tensor4 rho_from_commutator(const Probe& p, const PointFrame& fr, const CurvatureEval& ce) {
  const int n = fr.dim;
  Tensor4 r(n);
  for (int pp = 0; pp < n; ++pp) {
    FieldFn ep = [pp, n](const PointFrame&, const Vec&) {
      std::vector<double> v(n, 0.0);
      v[pp] = 1.0;
      return v;
    };
    auto com = commutator(p, fr, ep, Rank::Up);
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = com[i][j][nn];
          for (int h = 0; h < n; ++h) s -= ce.M(h, i, j) * ce.C_mixed(nn, h, pp);
          r(pp, nn, i, j) = s;
        }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Contractions.

struct Contractions {
  double rho2 = 0, rho2_rhs = 0;              // rho^{knij} rho_knij and its Riemannian form
  double rho2_mixed = 0, rho2_mixed_rhs = 0;  // rho_l^t^ij rho_t^l_ij and its form
  double M2 = 0, M2_rhs = 0;                  // M^{nij} M_nij and kappa^2 (zeta a)(zeta a)
  double M2_scaled_rhs = 0;                   // (B/K^2) M.M as a square
  double E2 = 0, E2_rhs = 0;                  // B E.E and its decomposition
  double rho2_bv_rhs = 0;                     // the b, v form of the rho^2 correction
};

inline Contractions curvature_contractions(const CurvatureEval& ce, const FinslerEval& e, const PointFrame& fr) {
  const int n = e.dim;
  const Mat& ai = fr.a_inv;
  const Mat& gu = e.g_up;
  const KappaJet& kj = ce.kj;
  const double h = e.h, S2 = kj.S * kj.S, K = e.K, B = e.B;
  Contractions r;
  r.rho2 = contract<4>(ce.rho_low, ce.rho_low, {&gu, &gu, &ai, &ai});
  const double aa = contract<4>(fr.riem_low, fr.riem_low, {&ai, &ai, &ai, &ai});
  Tensor3 Z(n);  // zeta^l a_lnij
  for (int l = 0; l < n; ++l)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Z(nn, i, j) += kj.zeta[l] * fr.riem_low(l, nn, i, j);
  const double zz = contract<3>(Z, Z, {&ai, &ai, &ai});
  r.rho2_rhs = aa + 2.0 / S2 * (1 / (h * h) - 1) * zz;
  // same correction with hv + A b in place of zeta
  {
    const Vec w = h * e.v + e.A_scalar * e.b_up;
    Tensor3 W(n);
    for (int l = 0; l < n; ++l)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) W(nn, i, j) += w[l] * fr.riem_low(l, nn, i, j);
    r.rho2_bv_rhs = aa + 2.0 * (1 / (h * h) - 1) / B * contract<3>(W, W, {&ai, &ai, &ai});
  }
  // mixed: rho_l^t_{i'j'} a^{ii'} a^{jj'} rho_t^l_ij
  {
    const Mat id = Mat::Identity(n, n);
    Tensor4 swapped(n), rswap(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            swapped(a, b, i, j) = ce.rho(b, a, i, j);
            rswap(a, b, i, j) = fr.riem(b, a, i, j);
          }
    r.rho2_mixed = contract<4>(ce.rho, swapped, {&id, &id, &ai, &ai});
    const double am = contract<4>(fr.riem, rswap, {&id, &id, &ai, &ai});
    r.rho2_mixed_rhs = am - 2 * (1 - h * h) / (h * h * S2) * zz;
  }
  {
    const Mat id = Mat::Identity(n, n);
    r.M2 = contract<3>(ce.M_low, ce.M, {&id, &ai, &ai});
    r.M2_rhs = kj.kappa * kj.kappa * zz;
    const double b = e.b_scalar, g = e.g, q = e.q;
    const Tensor3 br = detail::b_riem(fr);
    Tensor3 U(n);
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = ((1 - h) * b + 0.5 * g * q) / h * br(nn, i, j);
          for (int t = 0; t < n; ++t) s -= fr.riem_low(t, nn, i, j) * e.y[t];
          U(nn, i, j) = s;
        }
    r.M2_scaled_rhs = contract<3>(U, U, {&ai, &ai, &ai});
  }
  {
    const Tensor4 E_low = detail::map_index1(ce.E, e.g_low);  // E_knij
    r.E2 = B * contract<4>(E_low, E_low, {&gu, &gu, &ai, &ai});
    const Vec l = e.l_low();
    Tensor4 W(n);
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            W(k, nn, i, j) = K * E_low(k, nn, i, j) + l[k] * ce.M_low(nn, i, j) - l[nn] * ce.M_low(k, i, j);
    r.E2_rhs = B / (K * K) * contract<4>(W, W, {&gu, &gu, &ai, &ai}) +
               2 * B / (K * K) * contract<3>(ce.M_low, ce.M_low, {&gu, &ai, &ai});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Covariant derivatives of curvature objects and the cyclic identities.

// D_k M^n_ij by the d-operator on the closed-form M; out(k, n, i, j).
inline Tensor4 DM_definitional(const Probe& p, const PointFrame& fr, const ConnectionEval& c, const Tensor3& M) {
  const int n = fr.dim;
  auto dM = d_operator(p, fr, c.N, [](const PointFrame& f, const Vec& y) { return M_closed(evaluate(f, y), f).flat(); });
  Tensor4 r(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = dM[k][(nn * n + i) * n + j];
          for (int t = 0; t < n; ++t)
            s += c.D(nn, k, t) * M(t, i, j) - fr.christoffel(t, k, i) * M(nn, t, j) - fr.christoffel(t, k, j) * M(nn, i, t);
          r(k, nn, i, j) = s;
        }
  return r;
}

// D_k M^n_ij = -y^n_t zeta^h nabla_k a_h^t_ij
inline Tensor4 DM_closed(const PointFrame& fr, const KappaJet& kj) {
  if (fr.level < 3) throw std::logic_error("frame lacks the curvature derivative");
  const int n = fr.dim;
  Tensor4 r(n);
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int t = 0; t < n; ++t)
            for (int hh = 0; hh < n; ++hh) s -= kj.dy(nn, t) * kj.zeta[hh] * fr.d_riem(k, hh, t, i, j);
          r(k, nn, i, j) = s;
        }
  return r;
}

// max over (n, i, j, k) of D_k M^n_ij + D_j M^n_ki + D_i M^n_jk
inline double cyclic_M_residual(const Tensor4& DM) {
  const int n = DM.dim();
  double m = 0;
  for (int k = 0; k < n; ++k)
    for (int nn = 0; nn < n; ++nn)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          m = std::max(m, std::abs(DM(k, nn, i, j) + DM(j, nn, k, i) + DM(i, nn, j, k)));
  return m;
}

// D_l rho_knij with k, n transported by D and i, j by the a-Christoffels; out(l, k, n, i, j).
inline Tensor5 Drho_definitional(const Probe& p, const PointFrame& fr, const ConnectionEval& c, const Tensor4& rho_low) {
  const int n = fr.dim;
  Probe p2 = p;
  p2.level = 2;
  auto dr = d_operator(p2, fr, c.N, [](const PointFrame& f, const Vec& y) {
    return curvature_tensors(evaluate(f, y), f).rho_low.flat();
  });
  Tensor5 r(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double s = dr[l][((k * n + nn) * n + i) * n + j];
            for (int t = 0; t < n; ++t)
              s -= c.D(t, l, k) * rho_low(t, nn, i, j) + c.D(t, l, nn) * rho_low(k, t, i, j) +
                   fr.christoffel(t, l, i) * rho_low(k, nn, t, j) + fr.christoffel(t, l, j) * rho_low(k, nn, i, t);
            r(l, k, nn, i, j) = s;
          }
  return r;
}

// T_kn^hm nabla_l a_hmij; out(l, k, n, i, j).
inline Tensor5 Drho_closed(const PointFrame& fr, const Tensor4& T) {
  if (fr.level < 3) throw std::logic_error("frame lacks the curvature derivative");
  const int n = fr.dim;
  // nabla_l a_hmij = a_mp nabla_l a_h^p_ij (metric compatibility)
  Tensor5 r(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int hh = 0; hh < n; ++hh)
              for (int m = 0; m < n; ++m) {
                double dl = 0;
                for (int pp = 0; pp < n; ++pp) dl += fr.a(m, pp) * fr.d_riem(l, hh, pp, i, j);
                s += T(k, nn, hh, m) * dl;
              }
            r(l, k, nn, i, j) = s;
          }
  return r;
}

// max of D_l rho_knij + D_j rho_knli + D_i rho_knjl
inline double cyclic_rho_residual(const Tensor5& Dr) {
  const int n = Dr.dim();
  double m = 0;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            m = std::max(m, std::abs(Dr(l, k, nn, i, j) + Dr(j, k, nn, l, i) + Dr(i, k, nn, j, l)));
  return m;
}

// D_l T_kn^hm: k, n transported by D, h, m by the a-Christoffels; out(l, k, n, h, m).
inline Tensor5 DT_definitional(const Probe& p, const PointFrame& fr, const ConnectionEval& c, const Tensor4& T) {
  const int n = fr.dim;
  auto dT = d_operator(p, fr, c.N, [](const PointFrame& f, const Vec& y) {
    const FinslerEval e = evaluate(f, y);
    return T_closed(e, kappa_jacobians(e)).flat();
  });
  Tensor5 r(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int hh = 0; hh < n; ++hh)
          for (int m = 0; m < n; ++m) {
            double s = dT[l][((k * n + nn) * n + hh) * n + m];
            for (int t = 0; t < n; ++t)
              s += -c.D(t, l, k) * T(t, nn, hh, m) - c.D(t, l, nn) * T(k, t, hh, m) +
                   fr.christoffel(hh, l, t) * T(k, nn, t, m) + fr.christoffel(m, l, t) * T(k, nn, hh, t);
            r(l, k, nn, hh, m) = s;
          }
  return r;
}

// ---------------------------------------------------------------------------
// Auxiliary identities; each entry is {name, residual, scale}.

struct NamedResidual {
  std::string name;
  double residual = 0.0;
  double scale = 1.0;
};

inline std::vector<NamedResidual> auxiliary_identities(const FinslerEval& e, const PointFrame& fr,
                                                       const CurvatureEval& ce) {
  const int n = e.dim;
  const double N = n, h = e.h, g = e.g, q = e.q, b = e.b_scalar, K = e.K, K2 = K * K, B = e.B;
  const KappaJet& kj = ce.kj;
  const Vec C = e.A_vec / K;
  const double S2 = kj.S * kj.S;
  std::vector<NamedResidual> out;
  auto push = [&](const std::string& name, double res, double scale) { out.push_back({name, res, std::max(scale, 1e-300)}); };

  // y^n_m a_h^m_ij zeta^h_k = -(C_k/N - (1-h) y_k/K^2) M^n_ij + y^n_m a_h^m_ij E^h_k
  {
    double res = 0, sc = 0;
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double l = 0, r = -(C[k] / N - (1 - h) * e.y_low[k] / K2) * ce.M(nn, i, j);
            for (int m = 0; m < n; ++m)
              for (int hh = 0; hh < n; ++hh) {
                l += kj.dy(nn, m) * fr.riem(hh, m, i, j) * kj.dzeta(hh, k);
                r += kj.dy(nn, m) * fr.riem(hh, m, i, j) * kj.E(hh, k);
              }
            res = std::max(res, std::abs(l - r));
            sc = std::max(sc, std::abs(l));
          }
    push("riem-pullback-split", res, sc);
  }
  // y^n_h zeta^h_km M^m_ij = C^n_km M^m_ij + (1-h)/K^2 (y^n g_km M^m_ij - y_k M^n_ij)
  {
    double res = 0, sc = 0;
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double l = 0, r = -(1 - h) / K2 * e.y_low[k] * ce.M(nn, i, j);
            for (int m = 0; m < n; ++m) {
              for (int hh = 0; hh < n; ++hh) l += kj.dy(nn, hh) * kj.d2zeta(hh, k, m) * ce.M(m, i, j);
              r += ce.C_mixed(nn, k, m) * ce.M(m, i, j) + (1 - h) / K2 * e.y[nn] * e.g_low(k, m) * ce.M(m, i, j);
            }
            res = std::max(res, std::abs(l - r));
            sc = std::max(sc, std::abs(l));
          }
    push("second-jacobian-M", res, sc);
  }
  // rho through the kappa pullback, and its transform
  {
    const Tensor4 rk = rho_via_kappa(e, fr, kj, ce.M);
    push("rho-kappa-form", max_abs_diff(rk, ce.rho), ce.rho.max_abs());
    double res = 0, sc = 0;
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double l = 0, r = fr.riem(k, nn, i, j);
            for (int t = 0; t < n; ++t)
              for (int ll = 0; ll < n; ++ll) l += kj.dy(t, k) * kj.dzeta(nn, ll) * ce.rho(t, ll, i, j);
            const Vec zl = fr.a * kj.zeta;
            for (int ll = 0; ll < n; ++ll)
              for (int hh = 0; hh < n; ++hh)
                r += (1 - h) / (h * S2) * (kronecker(nn, ll) * zl[k] - kj.zeta[nn] * fr.a(k, ll)) * kj.zeta[hh] *
                     fr.riem(hh, ll, i, j);
            res = std::max(res, std::abs(l - r));
            sc = std::max(sc, std::abs(r));
          }
    push("rho-riemannian-transform", res, sc);
  }
  // (1/J^2) g_kl M^l_ij
  {
    const Tensor3 mj = M_low_J_form(e, fr);
    const double J2 = e.J * e.J;
    double res = 0;
    for (std::size_t k = 0; k < mj.size(); ++k) res = std::max(res, std::abs(ce.M_low.flat()[k] / J2 - mj.flat()[k]));
    push("M-lowered-J-form", res, mj.max_abs());
  }
  // C_n y^n_h / N
  {
    const Vec lhs = kj.dy.transpose() * C / N;
    const Vec zl = fr.a * kj.zeta;
    const Vec rhs = -g / (2 * q * h * h * S2) * e.A_scalar * zl + g / (2 * q * h) * fr.b_low * (kj.kappa / e.J);
    push("cartan-inverse-jacobian", max_abs_diff(lhs, rhs), std::max(max_abs(lhs), 1e-12));
  }
  // L_k^n_ij = y^t_k zeta^n_l E_t^l_ij = a_k^n_ij - gamma^n_kt zeta^h a_h^t_ij
  {
    Tensor3 gam(n);  // gamma(n, k, t) = y^r_k y^s_t zeta^n_rs
    for (int nn = 0; nn < n; ++nn)
      for (int k = 0; k < n; ++k)
        for (int t = 0; t < n; ++t) {
          double s = 0;
          for (int r = 0; r < n; ++r)
            for (int ss = 0; ss < n; ++ss) s += kj.dy(r, k) * kj.dy(ss, t) * kj.d2zeta(nn, r, ss);
          gam(nn, k, t) = s;
        }
    double res = 0, sc = 0;
    for (int k = 0; k < n; ++k)
      for (int nn = 0; nn < n; ++nn)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double l = 0, r = fr.riem(k, nn, i, j);
            for (int t = 0; t < n; ++t)
              for (int ll = 0; ll < n; ++ll) l += kj.dy(t, k) * kj.dzeta(nn, ll) * ce.E(t, ll, i, j);
            for (int t = 0; t < n; ++t)
              for (int hh = 0; hh < n; ++hh) r -= gam(nn, k, t) * kj.zeta[hh] * fr.riem(hh, t, i, j);
            res = std::max(res, std::abs(l - r));
            sc = std::max(sc, std::abs(r));
          }
    push("E-riemannian-transform", res, sc);
  }
  // y^n_m in Cartan-vector form (needs g != 0)
  if (g != 0.0) {
    const double kJ = kj.kappa / e.J, J2 = e.J * e.J;
    const Vec Cu = e.A_up / K;
    Mat r(n, n);
    for (int nn = 0; nn < n; ++nn)
      for (int m = 0; m < n; ++m)
        r(nn, m) = (kronecker(nn, m) - e.v_low[m] * Cu[nn] * J2 / N - (1 - h) * e.b_low[m] * Cu[nn] * 2 * q * J2 / (g * N) -
                    ((1 - h) * e.v_low[m] + 0.5 * g * q * e.b_low[m]) / B * e.y[nn]) *
                   kJ;
    push("inverse-jacobian-cartan-form", max_abs_diff(r, kj.dy), max_abs(kj.dy));
  }
  // C_n M^n_ij / N and A_knm M^m_ij
  {
    const Tensor3 br = detail::b_riem(fr);
    const Mat ybr = detail::first_contract(br, e.y);
    double r1 = 0, r2 = 0, s2 = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double l = 0;
        for (int nn = 0; nn < n; ++nn) l += C[nn] * ce.M(nn, i, j) / N;
        r1 = std::max(r1, std::abs(l + g / (2 * q * h) * ybr(i, j)));
        for (int k = 0; k < n; ++k)
          for (int nn = 0; nn < n; ++nn) {
            double a = 0;
            for (int m = 0; m < n; ++m) a += e.cartan(k, nn, m) * ce.M(m, i, j);
            const double r = -K * e.Hcal(k, nn) * g / (2 * q * h) * ybr(i, j) +
                             (e.A_vec[k] * ce.M_low(nn, i, j) + e.A_vec[nn] * ce.M_low(k, i, j)) / N;
            r2 = std::max(r2, std::abs(a - r));
            s2 = std::max(s2, std::abs(a));
          }
      }
    push("cartan-vector-M", r1, std::max(1.0, ce.M.max_abs() * max_abs(C)));
    push("cartan-tensor-M", r2, std::max(s2, 1e-12));
  }
  // l, m contractions with the Riemannian curvature
  {
    const Tensor3 br = detail::b_riem(fr);
    const Mat ybr = detail::first_contract(br, e.y);
    const Vec l = e.l_low();
    const Vec& mu = e.m_vec_up;
    const Vec& ml = e.m_vec_low;
    double r1 = 0, r2 = 0, r3 = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double a1 = 0, a2 = 0, a3 = 0;
        for (int ll = 0; ll < n; ++ll)
          for (int t = 0; t < n; ++t) {
            a1 += l[ll] * fr.riem(t, ll, i, j) * e.y[t];
            a2 += l[ll] * mu[t] * fr.riem(t, ll, i, j);
            a3 += ml[ll] * mu[t] * fr.riem(t, ll, i, j);
          }
        r1 = std::max(r1, std::abs(a1 - g * q * K / B * ybr(i, j)));
        r2 = std::max(r2, std::abs(a2 + (B + g * q * (b + g * q)) / (B * q) * ybr(i, j)));
        r3 = std::max(r3, std::abs(a3 + g * q / B * ybr(i, j)));
      }
    const double sc = std::max(1.0, max_abs(ybr));
    push("l-y-curvature", r1, sc);
    push("l-m-curvature", r2, sc);
    push("m-m-curvature", r3, sc);
    // m_i a^{il}
    const Vec lhs = fr.a_inv * ml;
    const Vec rhs = K / B * ((q * q + b * b) / B * K * mu + g * q * q / B * e.y);
    push("m-raised-by-a", max_abs_diff(lhs, rhs), max_abs(lhs));
  }
  // P in the y-form
  {
    const Tensor3 py = P_closed_y(e, fr);
    push("P-y-form", max_abs_diff(py, ce.P), std::max(ce.P.max_abs(), 1e-12));
  }
  return out;
}

}  // namespace finsler
