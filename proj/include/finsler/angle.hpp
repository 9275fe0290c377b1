#pragma once
// Two-vector angle, scalar product and the lambda-scalar derivatives.

#include "finsler/kappa.hpp"

#include <cmath>
#include <numbers>

namespace finsler {

inline constexpr double kLambdaSlack = 1e-12;
inline constexpr double kAxisSnap = 1e-12;  // q/|y|_a below this counts as on the axis

// Scalars entering lambda. No slit guard: q = 0 is fine for lambda itself.
struct AngleArg {
  Vec y, v_low;
  double b = 0.0, q = 0.0, A = 0.0, B = 0.0, K = 0.0;
  bool on_axis = false;
};

inline AngleArg angle_arg(const PointFrame& fr, const Vec& y) {
  if (y.size() != fr.dim) throw EvalError("vector dimension mismatch");
  AngleArg r;
  r.y = y;
  const Vec u = fr.a * y;
  const double s2 = y.dot(u);
  if (!(s2 > 0.0)) throw EvalError("null vector");
  r.b = fr.b_low.dot(y);
  r.v_low = u - r.b * fr.b_low;
  r.q = std::sqrt(std::max(0.0, r.v_low.dot(Vec(y - r.b * fr.b_up))));
  if (r.q <= kAxisSnap * std::sqrt(s2)) {
    r.on_axis = true;
    r.q = 0.0;
    r.v_low.setZero();
  }
  r.A = r.b + 0.5 * fr.g * r.q;
  r.B = r.b * r.b + fr.g * r.b * r.q + r.q * r.q;
  const double f = std::acos(std::clamp(r.A / std::sqrt(r.B), -1.0, 1.0));
  r.K = std::sqrt(r.B) * std::exp(-0.5 * fr.g * f / fr.h);
  return r;
}

struct AnglePair {
  Vec y1, y2;
  double lambda = 1.0;
  double alpha = 0.0;
  double v12 = 0.0;  // r_mn y1^m y2^n
  double K1 = 0.0, K2 = 0.0;
  bool has_gradients = false;  // false when an argument sits on the axis
  Vec dlam_dy1, dlam_dy2;
  double dlam_dg = 0.0;
};

// Clamp within the slack, abort beyond it.
inline double clamp_lambda(double lam) {
  if (std::abs(lam) > 1.0 + kLambdaSlack) throw EvalError("angle cosine outside [-1, 1]");
  return std::clamp(lam, -1.0, 1.0);
}

inline double lambda_value(const PointFrame& fr, const AngleArg& p1, const AngleArg& p2, double* v12 = nullptr) {
  const double v = p1.v_low.dot(p2.y);
  if (v12) *v12 = v;
  return (p1.A * p2.A + fr.h * fr.h * v) / (std::sqrt(p1.B) * std::sqrt(p2.B));
}

// d lambda / d y1 for the ordered pair (p1, p2).
inline Vec dlambda_dy_first(const PointFrame& fr, const AngleArg& p1, const AngleArg& p2, double v12) {
  const double h2 = fr.h * fr.h, g = fr.g;
  const double den = p1.B * std::sqrt(p1.B) * std::sqrt(p2.B);
  Vec r = p1.B * p2.v_low + p1.q * p1.q * p2.A * fr.b_low - p1.b * p2.A * p1.v_low -
          v12 * (h2 * p1.v_low + p1.A * (fr.b_low + (0.5 * g / p1.q) * p1.v_low));
  return h2 * r / den;
}

inline double dlambda_dg_direct(const PointFrame& fr, const AngleArg& p1, const AngleArg& p2, double lam, double v12) {
  return -0.5 * (p1.b * p1.q / p1.B + p2.b * p2.q / p2.B) * lam +
         (p1.q * p2.A + p2.q * p1.A - fr.g * v12) / (2.0 * std::sqrt(p1.B) * std::sqrt(p2.B));
}

inline double sigma_of(const PointFrame& fr, const AngleArg& p) { return p.q + 0.5 * fr.g * p.b; }

inline AnglePair angle(const PointFrame& fr, const Vec& y1, const Vec& y2, double q_min = kDefaultQMin) {
  AnglePair r;
  r.y1 = y1;
  r.y2 = y2;
  const AngleArg p1 = angle_arg(fr, y1), p2 = angle_arg(fr, y2);
  r.K1 = p1.K;
  r.K2 = p2.K;
  double raw = lambda_value(fr, p1, p2, &r.v12);
  // both on the axis: exactly parallel or opposed
  if (p1.on_axis && p2.on_axis) raw = (p1.b * p2.b > 0) ? 1.0 : -1.0;
  r.lambda = clamp_lambda(raw);
  r.alpha = std::acos(r.lambda) / fr.h;
  r.has_gradients = p1.q > q_min * std::sqrt(p1.B) && p2.q > q_min * std::sqrt(p2.B);
  r.dlam_dg = dlambda_dg_direct(fr, p1, p2, raw, r.v12);
  if (r.has_gradients) {
    r.dlam_dy1 = dlambda_dy_first(fr, p1, p2, r.v12);
    r.dlam_dy2 = dlambda_dy_first(fr, p2, p1, r.v12);
  }
  return r;
}

inline double scalar_product(const PointFrame& fr, const Vec& y1, const Vec& y2) {
  const AnglePair p = angle(fr, y1, y2);
  return p.K1 * p.K2 * p.alpha;
}

// dlambda/dg through b^k dlambda/dy^k weighted by sigma.
inline double dlambda_dg_sigma(const PointFrame& fr, const AnglePair& p) {
  if (!p.has_gradients) throw EvalError("on the Finsleroid axis slit");
  const AngleArg p1 = angle_arg(fr, p.y1), p2 = angle_arg(fr, p.y2);
  return (sigma_of(fr, p1) * fr.b_up.dot(p.dlam_dy1) + sigma_of(fr, p2) * fr.b_up.dot(p.dlam_dy2)) /
         (2.0 * fr.h * fr.h);
}

// The same through the Cartan vectors C^k = A^k / K; undefined at g = 0.
inline double dlambda_dg_mu(const PointFrame& fr, const AnglePair& p) {
  if (fr.g == 0.0) throw EvalError("mu weights need g != 0");
  const FinslerEval e1 = eval_cartan(fr, p.y1), e2 = eval_cartan(fr, p.y2);
  const double N = fr.dim;
  const AngleArg p1 = angle_arg(fr, p.y1), p2 = angle_arg(fr, p.y2);
  const double mu1 = p1.q * e1.K * e1.K / (N * fr.g * p1.B) * sigma_of(fr, p1);
  const double mu2 = p2.q * e2.K * e2.K / (N * fr.g * p2.B) * sigma_of(fr, p2);
  return (mu1 * (e1.A_up / e1.K).dot(p.dlam_dy1) + mu2 * (e2.A_up / e2.K).dot(p.dlam_dy2)) / (fr.h * fr.h);
}

// kappa image of y, with the axis handled by its analytic limit.
inline Vec zeta_any(const PointFrame& fr, const Vec& y, double q_min = kDefaultQMin) {
  const AngleArg p = angle_arg(fr, y);
  if (p.q > q_min * std::sqrt(p.B)) return kappa_forward(eval_scalars(fr, y, 0.0)).zeta;
  const int sign = p.b >= 0 ? 1 : -1;
  return kappa_axis_limit(fr, sign, std::abs(p.b));
}

// Angle as (1/h) times the Riemannian angle between the kappa images.
inline double angle_via_zeta(const PointFrame& fr, const Vec& y1, const Vec& y2) {
  const Vec z1 = zeta_any(fr, y1), z2 = zeta_any(fr, y2);
  const double c = z1.dot(fr.a * z2) / std::sqrt(z1.dot(fr.a * z1) * z2.dot(fr.a * z2));
  return std::acos(clamp_lambda(c)) / fr.h;
}

// Copy of a frame with a different charge; used by the g-derivative oracle.
inline PointFrame with_charge(PointFrame fr, double g) {
  fr.g = g;
  fr.h = charge_h(g);
  fr.G = g / fr.h;
  return fr;
}

}  // namespace finsler
