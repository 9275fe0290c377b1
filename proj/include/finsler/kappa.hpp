#pragma once
// The kappa transformation y -> zeta(x, y) onto the associated Riemannian
// tangent space, its inverse and first and second y-derivatives.

#include "finsler/finsleroid.hpp"

#include <cmath>

namespace finsler {

struct KappaJet {
  Vec zeta;
  double kappa = 1.0;  // K^(1-h) / h
  double S = 0.0;      // sqrt(a zeta zeta)
  Mat dzeta;           // dzeta(i, m) = zeta^i_m
  Mat dy;              // dy(i, j) = y^i_j = d y^i / d zeta^j
  Tensor3 d2zeta;      // d2zeta(h, k, m) = zeta^h_km
  Mat E;               // E^m_n
};

inline KappaJet kappa_forward(const FinslerEval& e) {
  KappaJet k;
  k.kappa = std::pow(e.K, 1.0 - e.h) / e.h;
  const double c = e.J / (k.kappa * e.h);
  k.zeta = (e.h * e.v + e.A_scalar * e.b_up) * c;
  k.S = std::sqrt(k.zeta.dot(e.a * k.zeta));
  return k;
}

// zeta from the angle form (v/q sin f + b cos f) K^h.
inline Vec kappa_forward_angle_form(const FinslerEval& e) {
  return (e.v / e.q * std::sin(e.f) + e.b_up * std::cos(e.f)) * std::pow(e.K, e.h);
}

// y from zeta; the axis slit applies in zeta-space too.
inline Vec kappa_inverse(const PointFrame& fr, const Vec& zeta, double q_min = kDefaultQMin) {
  const double S2 = zeta.dot(fr.a * zeta);
  if (!(S2 > 0.0)) throw EvalError("null vector");
  const double zb = fr.b_low.dot(zeta);
  const Vec zt = zeta - zb * fr.b_up;
  const double rzz = std::max(0.0, zt.dot(fr.a * zt));
  if (std::sqrt(rzz) <= q_min * std::sqrt(S2)) throw EvalError("on the Finsleroid axis slit");
  const double h = fr.h, g = fr.g;
  const double hk = std::pow(S2, (1.0 - h) / (2.0 * h));  // h kappa
  const double chi = std::acos(std::clamp(zb / std::sqrt(S2), -1.0, 1.0)) / h;
  const double J = std::exp(-0.5 * g * chi);
  const double c = J / hk;  // J / (kappa h)
  const double b = (zb - g / (2.0 * h) * std::sqrt(rzz)) / c;
  return b * fr.b_up + zt / (h * c);
}

// Jacobians. Needs the Cartan vector (C_n = A_n / K).
inline KappaJet kappa_jacobians(const FinslerEval& e) {
  if (!e.has_cartan) throw std::logic_error("kappa jacobians need the Cartan vector");
  const int n = e.dim;
  const double N = n, h = e.h, g = e.g, q = e.q, K = e.K, K2 = K * K, B = e.B, b = e.b_scalar;
  KappaJet k = kappa_forward(e);
  const double c = e.J / (k.kappa * h);
  const Vec C = e.A_vec / K;
  const Vec& yl = e.y_low;
  // zeta^m_n = E^m_n + zeta^m C_n / N - (kappa_n / kappa) zeta^m
  k.E.resize(n, n);
  k.dzeta.resize(n, n);
  for (int m = 0; m < n; ++m)
    for (int p = 0; p < n; ++p) {
      k.E(m, p) = (h * (kronecker(m, p) - e.b_low[p] * e.b_up[m]) + (e.b_low[p] + g * e.v_low[p] / (2 * q)) * e.b_up[m]) * c;
      k.dzeta(m, p) = k.E(m, p) + k.zeta[m] * C[p] / N - (1.0 - h) * yl[p] / K2 * k.zeta[m];
    }
  // y^i_j with T = 1 / sqrt(r zeta zeta)
  const Vec zl = e.a * k.zeta;
  const double S2 = k.S * k.S;
  const double zb = e.b_low.dot(k.zeta);
  const Vec rz = zl - zb * e.b_low;  // r_jk zeta^k
  const double T = 1.0 / std::sqrt(std::max(0.0, rz.dot(Vec(k.zeta - zb * e.b_up))));
  const double hk_over_J = 1.0 / c;
  k.dy.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double first = ((e.b_low[j] - g * T / (2 * h) * rz[j]) * e.b_up[i] +
                            (kronecker(i, j) - e.b_low[j] * e.b_up[i]) / h) *
                           hk_over_J;
      const double second = ((1.0 - h) / (h * S2) * zl[j] + g * T / (2 * h) * (zb / S2 * zl[j] - e.b_low[j])) * e.y[i];
      k.dy(i, j) = first + second;
    }
  // zeta^m_nj = Phi_j zeta^m_n + Phi_n zeta^m_j + (g/2q) eta_nj b^m J/(kappa h) + zeta^m W_nj
  Vec Phi = C / N - (1.0 - h) / K2 * yl;
  Mat eta(n, n), hang = e.hang;
  for (int p = 0; p < n; ++p)
    for (int j = 0; j < n; ++j)
      eta(p, j) = e.a(p, j) - e.b_low[p] * e.b_low[j] - e.v_low[p] * e.v_low[j] / (q * q);
  k.d2zeta = Tensor3(n);
  for (int m = 0; m < n; ++m)
    for (int p = 0; p < n; ++p)
      for (int j = 0; j < n; ++j) {
        const double W = C[p] * C[j] / (N * N) - h / (N * K2) * (yl[p] * C[j] + yl[j] * C[p]) +
                         h * (1.0 - h) * yl[p] * yl[j] / (K2 * K2) - g * b / (2 * q * B) * eta(p, j) -
                         (1.0 - h) * hang(p, j) / K2;
        k.d2zeta(m, p, j) = Phi[j] * k.dzeta(m, p) + Phi[p] * k.dzeta(m, j) +
                            g / (2 * q) * eta(p, j) * e.b_up[m] * c + k.zeta[m] * W;
      }
  return k;
}

// zeta on the axis y = s*gamma*b, where the generic formula has q = 0.
inline Vec kappa_axis_limit(const PointFrame& fr, int sign, double gamma = 1.0) {
  const AxisEval ax = axis_limit(fr, sign, gamma);
  return (sign >= 0 ? 1.0 : -1.0) * std::pow(ax.K, fr.h) * fr.b_up;
}

inline double homogeneity_check(const PointFrame& fr, const Vec& y, double gamma) {
  Vec z1 = kappa_forward(eval_scalars(fr, y)).zeta;
  Vec z2 = kappa_forward(eval_scalars(fr, Vec(gamma * y))).zeta;
  return max_abs(Vec(z2 - std::pow(gamma, fr.h) * z1));
}

}  // namespace finsler
