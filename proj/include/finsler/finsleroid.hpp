#pragma once
// Finsleroid metric function and the tensors built from it at a support
// element (x, y): K, g_ij, g^ij, Cartan tensor and vector, the auxiliary
// m, H, eta and tau tensors, the orthonormal-frame components and the
// tangent-space conformal flatness residual.

#include "finsler/manifold.hpp"
#include "finsler/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace finsler {

inline constexpr double kDefaultQMin = 1e-6;

struct FinslerEval {
  int dim = 0;
  double g = 0.0, h = 1.0, G = 0.0;
  Vec y;
  double S2 = 0.0;  // a_ij y^i y^j
  double b_scalar = 0.0, q = 0.0, B = 0.0, A_scalar = 0.0, L_scalar = 0.0;
  double f = 0.0, chi = 0.0, J = 1.0, K = 0.0;
  Vec u;      // a_ij y^j
  Vec v;      // v^i = y^i - b b^i
  Vec v_low;  // v_m = r_mn y^n

  bool has_metric = false;
  Vec y_low;
  Mat g_low, g_up, hang;

  bool has_cartan = false;
  Tensor3 cartan;  // A_ijk
  Vec A_vec;       // A_i
  Vec A_up;        // A^i
  Vec A_hat;       // A_i / g (finite at g = 0)

  bool has_aux = false;
  Vec m_vec_low, m_vec_up;
  Mat Hcal;       // H_ij
  Mat eta;        // eta_ij
  Mat eta_mixed;  // eta_mixed(k, m) = eta^k_m
  Mat eta_up;     // eta^{kn}, both indices raised with a^{-1}
  Mat tau;
  Tensor4 tau4;

  // copies of the frame data the evaluation used
  Mat a, a_inv;
  Vec b_low, b_up;

  Vec l_up() const { return y / K; }
  Vec l_low() const { return y_low / K; }
};

// Scalars only. The slit guard rejects q/|y|_a <= q_min.
inline FinslerEval eval_scalars(const PointFrame& fr, const Vec& y, double q_min = kDefaultQMin) {
  FinslerEval e;
  e.dim = fr.dim;
  e.g = fr.g;
  e.h = fr.h;
  e.G = fr.G;
  e.y = y;
  e.a = fr.a;
  e.a_inv = fr.a_inv;
  e.b_low = fr.b_low;
  e.b_up = fr.b_up;
  if (y.size() != fr.dim) throw EvalError("vector dimension mismatch");
  e.u = fr.a * y;
  e.S2 = y.dot(e.u);
  if (!(e.S2 > 0.0) || y.cwiseAbs().maxCoeff() == 0.0) throw EvalError("null vector");
  e.b_scalar = fr.b_low.dot(y);
  e.v = y - e.b_scalar * fr.b_up;
  e.v_low = e.u - e.b_scalar * fr.b_low;
  // q from v rather than S2 - b^2, which cancels near the axis
  e.q = std::sqrt(std::max(0.0, e.v.dot(e.v_low)));
  if (e.q <= q_min * std::sqrt(e.S2)) throw EvalError("on the Finsleroid axis slit");
  const double b = e.b_scalar, q = e.q, g = e.g;
  e.B = b * b + g * b * q + q * q;
  e.A_scalar = b + 0.5 * g * q;
  e.L_scalar = q + 0.5 * g * b;
  const double c = std::clamp(e.A_scalar / std::sqrt(e.B), -1.0, 1.0);
  e.f = std::acos(c);
  e.chi = e.f / e.h;
  e.J = std::exp(-0.5 * g * e.chi);
  e.K = std::sqrt(e.B) * e.J;
  return e;
}

// Two-branch arctangent form of chi (cross-check of f/h).
inline double chi_two_branch(const FinslerEval& e) {
  const double h = e.h, G = e.G, b = e.b_scalar, L = e.L_scalar;
  if (b == 0.0) return (-std::atan(0.5 * G) + 0.5 * std::numbers::pi * (L > 0 ? 1.0 : -1.0)) / h;
  const double t = std::atan(L / (h * b));
  if (b > 0.0) return (-std::atan(0.5 * G) + t) / h;
  return (std::numbers::pi - std::atan(0.5 * G) + t) / h;
}

inline void fill_metric(FinslerEval& e) {
  const int n = e.dim;
  const double b = e.b_scalar, q = e.q, g = e.g, B = e.B, K2 = e.K * e.K;
  const Vec& bl = e.b_low;
  const Vec& bu = e.b_up;
  const Vec& vl = e.v_low;
  const Vec& vu = e.v;
  e.y_low = (vl + (b + g * q) * bl) * (K2 / B);
  e.g_low.resize(n, n);
  e.g_up.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double corr =
          q * (b + g * q) * bl[i] * bl[j] + q * (bl[i] * vl[j] + bl[j] * vl[i]) - b * vl[i] * vl[j] / q;
      e.g_low(i, j) = (e.a(i, j) + g / B * corr) * (K2 / B);
      const double corr_up =
          -b * q * bu[i] * bu[j] - q * (bu[i] * vu[j] + bu[j] * vu[i]) + (b + g * q) * vu[i] * vu[j] / q;
      e.g_up(i, j) = (e.a_inv(i, j) + g / B * corr_up) * (B / K2);
    }
  e.hang = e.g_low - e.y_low * e.y_low.transpose() / K2;
  e.has_metric = true;
}

inline void fill_cartan(FinslerEval& e) {
  const int n = e.dim;
  const double b = e.b_scalar, q = e.q, g = e.g, B = e.B, K = e.K;
  const double N = n;
  e.A_hat = (0.5 * N * K / (q * B)) * (q * q * e.b_low - b * e.v_low);
  e.A_vec = g * e.A_hat;
  e.A_up = (0.5 * N * g / (q * K)) * (q * q * e.b_up - (b + g * q) * e.v);
  e.cartan = Tensor3(n);
  const double c3 = 4.0 * g / (N * N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Vec& A = e.A_vec;
        e.cartan(i, j, k) = (A[i] * e.hang(j, k) + A[j] * e.hang(i, k) + A[k] * e.hang(i, j) -
                             c3 * e.A_hat[i] * e.A_hat[j] * e.A_hat[k]) /
                            N;
      }
  e.has_cartan = true;
}

inline void eval_aux_tensors(FinslerEval& e) {
  if (!e.has_cartan) throw std::logic_error("auxiliary tensors need the Cartan tensor");
  const int n = e.dim;
  const double b = e.b_scalar, q = e.q, g = e.g, B = e.B, K = e.K, K2 = K * K;
  e.m_vec_low = (K / q) * (e.b_low - (b / K2) * e.y_low);
  e.m_vec_up = (1.0 / (q * K)) * (q * q * e.b_up - (b + g * q) * e.v);
  e.eta.resize(n, n);
  e.eta_mixed.resize(n, n);
  e.eta_up.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      e.eta(i, j) = e.a(i, j) - e.b_low[i] * e.b_low[j] - e.v_low[i] * e.v_low[j] / (q * q);
      e.eta_mixed(i, j) = kronecker(i, j) - e.b_up[i] * e.b_low[j] - e.v[i] * e.v_low[j] / (q * q);
      e.eta_up(i, j) = e.a_inv(i, j) - e.b_up[i] * e.b_up[j] - e.v[i] * e.v[j] / (q * q);
    }
  e.Hcal = e.eta * (K2 / B);
  const double ct = g * (2.0 * b + g * q) / q;
  e.tau = (-0.25 * n * ct) * e.Hcal;
  e.tau4 = Tensor4(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m)
        for (int p = 0; p < n; ++p) {
          const Mat& H = e.Hcal;
          e.tau4(i, j, m, p) =
              -0.25 * ct * (H(i, j) * H(m, p) + H(i, m) * H(j, p) + H(i, p) * H(j, m));
        }
  e.has_aux = true;
}

inline FinslerEval eval_metric(const PointFrame& fr, const Vec& y, double q_min = kDefaultQMin) {
  FinslerEval e = eval_scalars(fr, y, q_min);
  fill_metric(e);
  return e;
}

inline FinslerEval eval_cartan(const PointFrame& fr, const Vec& y, double q_min = kDefaultQMin) {
  FinslerEval e = eval_metric(fr, y, q_min);
  fill_cartan(e);
  return e;
}

// Everything: scalars, metric, Cartan family and auxiliary tensors.
inline FinslerEval evaluate(const PointFrame& fr, const Vec& y, double q_min = kDefaultQMin) {
  FinslerEval e = eval_cartan(fr, y, q_min);
  eval_aux_tensors(e);
  return e;
}

// Analytic values on the axis y = s*gamma*b (s = +1 or -1), where q = 0.
struct AxisEval {
  Vec y;
  double b_scalar = 0.0, B = 0.0, A_scalar = 0.0, f = 0.0, chi = 0.0, J = 1.0, K = 0.0;
};

inline AxisEval axis_limit(const PointFrame& fr, int sign, double gamma = 1.0) {
  AxisEval r;
  r.y = (sign >= 0 ? gamma : -gamma) * fr.b_up;
  r.b_scalar = sign >= 0 ? gamma : -gamma;
  r.B = gamma * gamma;
  r.A_scalar = r.b_scalar;
  r.f = sign >= 0 ? 0.0 : std::numbers::pi;
  r.chi = r.f / fr.h;
  r.J = std::exp(-0.5 * fr.g * r.chi);
  r.K = gamma * r.J;
  return r;
}

// Unit vector along -b: K(b_minus) = 1.
inline Vec opposed_axis(const PointFrame& fr) {
  return -fr.b_up * std::exp(0.5 * fr.g * std::numbers::pi / fr.h);
}

// ---------------------------------------------------------------------------
// Orthonormal frame with the last covector equal to b_i.

struct FrameEval {
  Mat H;      // H(p, i) = h^p_i, a = H^T H
  Mat H_inv;  // columns h_p^i
  Vec R;      // R^p = h^p_i y^i
  Vec R_low;
  Mat g_pq;       // closed form in frame components
  Mat g_pq_up;
  Mat g_pullback;  // h_p^i h_q^j g_ij
  double J = 1.0;
};

inline Mat orthonormal_coframe(const PointFrame& fr) {
  const int n = fr.dim;
  // Gram-Schmidt in the a^{-1} inner product on covectors, b first.
  std::vector<Vec> cov;
  cov.push_back(fr.b_low);
  for (int k = 0; k < n && static_cast<int>(cov.size()) < n; ++k) {
    Vec c = fr.a.col(k);  // covector a_ik, independent set
    for (const Vec& w : cov) c -= w * (w.dot(fr.a_inv * c));
    double nn = c.dot(fr.a_inv * c);
    if (nn < 1e-14) continue;
    cov.push_back(c / std::sqrt(nn));
  }
  if (static_cast<int>(cov.size()) != n) throw EvalError("frame construction failed");
  Mat H(n, n);
  for (int p = 0; p < n - 1; ++p) H.row(p) = cov[p + 1].transpose();
  H.row(n - 1) = cov[0].transpose();
  return H;
}

inline FrameEval eval_frame(const PointFrame& fr, const Vec& y, double q_min = kDefaultQMin) {
  const int n = fr.dim;
  FinslerEval e = eval_metric(fr, y, q_min);
  FrameEval r;
  r.H = orthonormal_coframe(fr);
  r.H_inv = r.H.inverse();
  r.R = r.H * y;
  r.J = e.J;
  const double z = r.R[n - 1], q = e.q, g = e.g, B = e.B, J2 = e.J * e.J, K2 = e.K * e.K;
  r.R_low.resize(n);
  for (int a = 0; a < n - 1; ++a) r.R_low[a] = r.R[a] * J2;
  r.R_low[n - 1] = (z + g * q) * J2;
  r.g_pq.resize(n, n);
  r.g_pq_up.resize(n, n);
  const int N1 = n - 1;
  r.g_pq(N1, N1) = ((z + g * q) * (z + g * q) + q * q) * J2 / B;
  r.g_pq_up(N1, N1) = (z * z + q * q) / K2;
  for (int a = 0; a < N1; ++a) {
    r.g_pq(N1, a) = r.g_pq(a, N1) = g * q * r.R[a] * J2 / B;
    r.g_pq_up(N1, a) = r.g_pq_up(a, N1) = -g * q * r.R[a] / K2;
    for (int c = 0; c < N1; ++c) {
      r.g_pq(a, c) = (kronecker(a, c) - g * r.R[a] * r.R[c] * z / (q * B)) * J2;
      r.g_pq_up(a, c) = B / K2 * kronecker(a, c) + g * (z + g * q) * r.R[a] * r.R[c] / (q * K2);
    }
  }
  r.g_pullback = r.H_inv.transpose() * e.g_low * r.H_inv;
  return r;
}

// ---------------------------------------------------------------------------
// Tangent-space conformal flatness: k_ij = exp(2 psi) g_ij with
// exp(psi) = c1 K^c2. Returns max |L_i^n_mj| where L is the curvature of
// the y-Christoffel symbols of k, differentiated by 5-point stencils.

namespace detail {

// dk_ij/dy^m analytic: exp(2psi) (2 psi' K_m g_ij + 2 C_ijm), C = A/K
inline Tensor3 conformal_dk(const FinslerEval& e, double c1, double c2, Mat* k_out) {
  const int n = e.dim;
  const double w = c1 * c1 * std::pow(e.K, 2.0 * c2);
  const Vec l = e.y_low / e.K;
  Tensor3 dk(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m)
        dk(i, j, m) = w * (2.0 * c2 / e.K * l[m] * e.g_low(i, j) + 2.0 * e.cartan(i, j, m) / e.K);
  if (k_out) *k_out = w * e.g_low;
  return dk;
}

// kc(n, i, j) = k^n_ij
inline Tensor3 conformal_christoffel(const PointFrame& fr, const Vec& y, double c1, double c2) {
  const int n = fr.dim;
  FinslerEval e = eval_cartan(fr, y);
  Mat k;
  Tensor3 dk = conformal_dk(e, c1, c2, &k);
  Mat ki = k.inverse();
  Tensor3 c(n);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += ki(p, l) * (dk(l, i, j) + dk(l, j, i) - dk(i, j, l));
        c(p, i, j) = 0.5 * s;
      }
  return c;
}

}  // namespace detail

// L(i, n, m, j) = L_i^n_mj
inline Tensor4 conformal_L_tensor(const PointFrame& fr, const Vec& y, double c1, double c2, double rel_step = 1e-4) {
  const int n = fr.dim;
  const double step = rel_step * std::sqrt(y.dot(fr.a * y));
  Tensor3 c0 = detail::conformal_christoffel(fr, y, c1, c2);
  std::vector<Tensor3> dc;  // dc[m](p,i,j) = d k^p_ij / dy^m
  for (int m = 0; m < n; ++m) {
    Tensor3 d(n);
    const double w[4] = {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12};
    const int off[4] = {-2, -1, 1, 2};
    for (int s = 0; s < 4; ++s) {
      Vec ys = y;
      ys[m] += off[s] * step;
      Tensor3 cs = detail::conformal_christoffel(fr, ys, c1, c2);
      cs *= w[s] / step;
      d += cs;
    }
    dc.push_back(d);
  }
  Tensor4 L(n);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < n; ++p)
      for (int m = 0; m < n; ++m)
        for (int j = 0; j < n; ++j) {
          double s = dc[m](p, i, j) - dc[j](p, i, m);
          for (int t = 0; t < n; ++t) s += c0(t, i, j) * c0(p, t, m) - c0(t, i, m) * c0(p, t, j);
          L(i, p, m, j) = s;
        }
  return L;
}

inline double conformal_flatness_residual(const PointFrame& fr, const Vec& y, double c2, double rel_step = 1e-4) {
  return conformal_L_tensor(fr, y, fr.h, c2, rel_step).max_abs();
}

inline double conformal_flatness_residual(const PointFrame& fr, const Vec& y) {
  return conformal_flatness_residual(fr, y, fr.h - 1.0);
}

// Indicatrix curvature tensor R^_inmj = g_nk (C^k_tm C^t_ij - C^k_tj C^t_im), C^k_ij = g^kl A_lij / K.
inline Tensor4 indicatrix_curvature_tensor(const FinslerEval& e) {
  const int n = e.dim;
  Tensor3 cu(n);  // C^k_ij
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += e.g_up(k, l) * e.cartan(l, i, j);
        cu(k, i, j) = s / e.K;
      }
  Tensor4 r(n);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < n; ++p)
      for (int m = 0; m < n; ++m)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int t = 0; t < n; ++t) {
            // g_pk C^k_tm = C_ptm
            s += e.cartan(p, t, m) / e.K * cu(t, i, j) - e.cartan(p, t, j) / e.K * cu(t, i, m);
          }
          r(i, p, m, j) = s;
        }
  return r;
}

}  // namespace finsler
