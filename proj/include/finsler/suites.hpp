#pragma once
// Named identity suites over randomized samples, and their reports.

#include "finsler/curvature.hpp"
#include "finsler/indicatrix.hpp"

#include <json.hpp>

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace finsler {

struct CheckRow {
  std::string check_id, paper_ref;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  std::string reason;  // first evaluation error, or "not applicable"
};

struct SuiteReport {
  std::string suite_name, spec_digest;
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<CheckRow> per_check;
  double wall_time = 0.0;
  bool pass() const {
    for (const auto& r : per_check)
      if (!r.pass) return false;
    return true;
  }
};

struct RunOptions {
  int trials = 50;
  std::uint64_t seed = 1;
  std::map<std::string, double> tol_overrides;
  bool fail_fast = false;
  bool chart_minus = false;     // sample directions in the south chart (b < 0)
  std::string break_check;      // check run with the sign of D reversed
};

// One randomized sample point with lazily computed heavy data.
class Trial {
 public:
  Trial(const ManifoldSpec& spec, int index, std::uint64_t seed, std::uint64_t salt, int level, bool minus)
      : spec_(&spec), index_(index), rng_(SampleRng::for_trial(seed, index, salt)), minus_(minus) {
    x = sample_point(rng_, spec);
    f = eval_point(spec, x, level);
    y1 = direction();
    y2 = direction();
  }

  const ManifoldSpec& spec() const { return *spec_; }
  int index() const { return index_; }
  SampleRng& rng() { return rng_; }

  Vec x;
  PointFrame f;
  Vec y1, y2;
  bool broken = false;

  Vec direction() {
    Vec y = sample_vector(rng_, f, 1e-3);
    const double b = f.b_low.dot(y);
    if (minus_ && b > 0) y -= 2 * b * f.b_up;  // reflect through the equator
    return y;
  }
  Probe probe(int level) const { return Probe{spec_, x, y1, level}; }

  const FinslerEval& eval() {
    if (!e_) e_ = evaluate(f, y1);
    return *e_;
  }
  const CurvatureEval& curvature() {
    if (!ce_) ce_ = curvature_tensors(eval(), f);
    return *ce_;
  }
  ConnectionEval connection() { return connection_coeffs(eval(), f, broken); }

  // unit pair at moderate angle for boundary-value arcs
  const std::pair<Vec, Vec>& arc_pair() {
    if (!pair_) {
      const double top = 0.8 * std::numbers::pi / f.h;
      for (int k = 0;; ++k) {
        Vec l1 = direction(), l2 = direction();
        if (f.dim == 2) {
          // the arc must not cross the axis slit: keep both on one side
          auto side = [&](const Vec& y) { return f.b_up[0] * y[1] - f.b_up[1] * y[0]; };
          if (side(l1) * side(l2) < 0) l2 = 2 * f.b_low.dot(l2) * f.b_up - l2;
        }
        l1 /= eval_scalars(f, l1).K;
        l2 /= eval_scalars(f, l2).K;
        const double a = angle(f, l1, l2).alpha;
        // arcs grazing the axis slit make the ODE stiff
        if ((a > 0.05 && a < top && arc_axis_clearance(f, l1, l2) > 0.2) || k == 200) {
          pair_ = {l1, l2};
          break;
        }
      }
    }
    return *pair_;
  }
  const GeodesicArc& arc() {
    if (!arc_) arc_ = geodesic_numeric(f, arc_pair().first, arc_pair().second);
    return *arc_;
  }
  const AreaVolume& area_volume() {
    if (!av_) av_ = area_volume_ratios(f, 400);
    return *av_;
  }
  const TransportResult& transport() {
    if (!tr_) {
      const int n = f.dim;
      Vec v(n), w(n);
      for (int i = 0; i < n; ++i) {
        v[i] = rng_.uniform(-0.4, 0.4) * spec_->box();
        w[i] = rng_.uniform(-0.1, 0.1) * spec_->box();
      }
      const Vec x0 = 0.5 * x;
      const PointFrame f0 = eval_point(*spec_, x0, 1);
      Vec a = sample_vector(rng_, f0, 1e-2, false), b = sample_vector(rng_, f0, 1e-2, false);
      tr_ = transport_pair(*spec_, quadratic_curve(x0, v, w), a, b, 1.0, 400);
    }
    return *tr_;
  }

 private:
  const ManifoldSpec* spec_;
  int index_;
  SampleRng rng_;
  bool minus_;
  std::optional<FinslerEval> e_;
  std::optional<CurvatureEval> ce_;
  std::optional<std::pair<Vec, Vec>> pair_;
  std::optional<GeodesicArc> arc_;
  std::optional<AreaVolume> av_;
  std::optional<TransportResult> tr_;
};

// A check maps a trial to a residual; nullopt means not applicable here.
struct Check {
  std::string id, ref;
  double tol = 0.0;
  int max_trials = 0;  // 0: every trial
  std::function<std::optional<double>(Trial&)> fn;
  bool min_over_trials = false;  // row residual is the smallest trial value
};

struct Suite {
  std::string name;
  int level = 0;  // eval_point level the trials need
  std::vector<Check> checks;
};

namespace suite_detail {

using R = std::optional<double>;

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

// K from the two-branch arctangent form, independent of the library path.
inline double oracle_K(const PointFrame& f, const Vec& y) {
  const double g = f.g, h = std::sqrt(1 - g * g / 4), G = g / h;
  const double b = f.b_low.dot(y);
  const double q = std::sqrt(std::max(0.0, y.dot(f.a * y) - b * b));
  const double B = b * b + g * b * q + q * q;
  const double L = q + g * b / 2;
  double chi;
  if (b > 0) chi = (-std::atan(G / 2) + std::atan(L / (h * b))) / h;
  else if (b < 0) chi = (std::numbers::pi - std::atan(G / 2) + std::atan(L / (h * b))) / h;
  else chi = (-std::atan(G / 2) + std::numbers::pi / 2) / h;
  return std::sqrt(B) * std::exp(-g * chi / 2);
}

inline Mat fd_hessian_half_K2(const PointFrame& f, const Vec& y) {
  const int n = f.dim;
  const double s = 1e-4 * std::sqrt(y.dot(f.a * y));
  auto F = [&](const Vec& z) {
    const double k = oracle_K(f, z);
    return 0.5 * k * k;
  };
  Mat H(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec pp = y, pm = y, mp = y, mm = y;
      pp[i] += s;
      pp[j] += s;
      pm[i] += s;
      pm[j] -= s;
      mp[i] -= s;
      mp[j] += s;
      mm[i] -= s;
      mm[j] -= s;
      H(i, j) = (F(pp) - F(pm) - F(mp) + F(mm)) / (4 * s * s);
    }
  return H;
}

inline Tensor3 fd_cartan(const PointFrame& f, const FinslerEval& e) {
  const int n = e.dim;
  auto d = fd_gradient([&](const Vec& z) { return to_std(eval_metric(f, z).g_low); }, e.y, 1e-3 * std::sqrt(e.S2));
  Tensor3 c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) c(i, j, k) = 0.5 * e.K * d[k][i * n + j];
  return c;
}

// residuals of y-contractions and symmetrization of E and M
struct AlgebraicResiduals {
  double yM = 0, yE = 0, Ey = 0, sym = 0, skew = 0;
};

inline AlgebraicResiduals algebraic_residuals(const FinslerEval& e, const CurvatureEval& ce) {
  AlgebraicResiduals r;
  const int n = e.dim;
  const double sc = std::max(1.0, ce.E.max_abs() * e.K);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        double b = 0, c = 0;
        for (int p = 0; p < n; ++p) {
          b += e.y[p] * ce.E(p, k, i, j);
          c += e.y_low[p] * ce.E(k, p, i, j);
        }
        r.yE = std::max(r.yE, std::abs(b + ce.M(k, i, j)));
        r.Ey = std::max(r.Ey, std::abs(c - ce.M_low(k, i, j)));
        for (int m = 0; m < n; ++m) {
          double el = 0, er = 0;
          for (int p = 0; p < n; ++p) {
            el += e.g_low(k, p) * ce.E(m, p, i, j) + e.g_low(m, p) * ce.E(k, p, i, j);
            er += 2 * e.cartan(m, k, p) / e.K * ce.M(p, i, j);
          }
          r.sym = std::max(r.sym, std::abs(el - er));
          r.skew = std::max(r.skew, std::abs(ce.rho_low(m, k, i, j) + ce.rho_low(k, m, i, j)));
        }
      }
      double a = 0;
      for (int p = 0; p < n; ++p) a += e.y_low[p] * ce.M(p, i, j);
      r.yM = std::max(r.yM, std::abs(a));
    }
  r.yM /= sc;
  r.yE /= sc;
  r.Ey /= sc;
  r.sym /= sc;
  r.skew /= sc;
  return r;
}

inline double flat_rel(const Tensor3& a, const Tensor3& b) { return rel_diff(a, b, 1e-12); }

inline std::vector<Suite> build_catalog() {
  std::vector<Suite> cat;
  constexpr double kPi = std::numbers::pi;

  cat.push_back({"core-identities", 0, {
    {"metric-hessian", "metric-tensor", 1e-5, 0, [](Trial& t) -> R {
       const FinslerEval e = eval_metric(t.f, t.y1);
       return rel_diff(e.g_low, fd_hessian_half_K2(t.f, t.y1));
     }},
    {"metric-determinant", "metric-determinant", 1e-9, 0, [](Trial& t) -> R {
       const FinslerEval e = eval_metric(t.f, t.y1);
       const double ratio = e.g_low.determinant() / t.f.a.determinant();
       return std::abs(ratio / std::pow(e.K * e.K / e.B, e.dim) - 1.0);
     }},
    {"metric-inverse", "metric-reciprocal", 1e-9, 0, [](Trial& t) -> R {
       const FinslerEval e = eval_metric(t.f, t.y1);
       return max_abs_diff(Mat(e.g_low * e.g_up), Mat(Mat::Identity(e.dim, e.dim)));
     }},
    {"metric-euler", "metric-homogeneity", 1e-10, 0, [](Trial& t) -> R {
       const FinslerEval e = eval_metric(t.f, t.y1);
       return std::abs(t.y1.dot(e.g_low * t.y1) / (e.K * e.K) - 1.0);
     }},
    {"cartan-contraction", "cartan-vector-norm", 1e-10, 0, [](Trial& t) -> R {
       const FinslerEval e = eval_cartan(t.f, t.y1);
       const double n = e.dim;
       return std::abs(e.A_vec.dot(e.A_up) - n * n * e.g * e.g / 4);
     }},
    {"cartan-finite-difference", "cartan-tensor", 1e-4, 0, [](Trial& t) -> R {
       const FinslerEval e = eval_cartan(t.f, t.y1);
       return rel_diff(e.cartan, fd_cartan(t.f, e), 1e-6);
     }},
    {"indicatrix-curvature-tensor", "indicatrix-curvature", 1e-8, 0, [](Trial& t) -> R {
       const FinslerEval& e = t.eval();
       const Tensor4 Rt = indicatrix_curvature_tensor(e);
       const Mat& hh = e.hang;
       const int n = e.dim;
       double err = 0;
       for (int i = 0; i < n; ++i)
         for (int p = 0; p < n; ++p)
           for (int m = 0; m < n; ++m)
             for (int j = 0; j < n; ++j)
               err = std::max(err, std::abs(e.K * e.K * Rt(i, p, m, j) -
                                            (1 - e.h * e.h) * (hh(i, j) * hh(p, m) - hh(i, m) * hh(p, j))));
       return err;
     }},
  }});

  cat.push_back({"kappa", 0, {
    {"kappa-isometry", "kappa-pullback", 1e-9, 0, [](Trial& t) -> R {
       const FinslerEval& e = t.eval();
       const KappaJet k = kappa_jacobians(e);
       const Mat pull = k.kappa * k.kappa * k.dzeta.transpose() * t.f.a * k.dzeta;
       return max_abs_diff(pull, e.g_low) / std::max(1.0, max_abs(e.g_low));
     }},
    {"kappa-norm", "kappa-norm-power", 1e-10, 0, [](Trial& t) -> R {
       const FinslerEval& e = t.eval();
       return std::abs(kappa_forward(e).S / std::pow(e.K, e.h) - 1.0);
     }},
    {"kappa-roundtrip", "kappa-inverse", 1e-10, 0, [](Trial& t) -> R {
       const Vec z = kappa_forward(t.eval()).zeta;
       return max_abs_diff(kappa_inverse(t.f, z), t.y1) / max_abs(t.y1);
     }},
    {"kappa-determinant", "kappa-jacobian-determinant", 1e-9, 0, [](Trial& t) -> R {
       const FinslerEval& e = t.eval();
       const KappaJet k = kappa_jacobians(e);
       return std::abs(k.dzeta.determinant() / std::pow(e.J / k.kappa, e.dim) - 1.0);
     }},
    {"kappa-jacobian-fd", "kappa-jacobian", 1e-5, 0, [](Trial& t) -> R {
       const FinslerEval& e = t.eval();
       const KappaJet k = kappa_jacobians(e);
       const int n = e.dim;
       auto d = fd_gradient([&](const Vec& z) { return to_std(kappa_forward(eval_scalars(t.f, z)).zeta); }, t.y1,
                            1e-5 * std::sqrt(e.S2));
       Mat fd(n, n);
       for (int i = 0; i < n; ++i)
         for (int m = 0; m < n; ++m) fd(i, m) = d[m][i];
       return rel_diff(k.dzeta, fd);
     }},
    {"kappa-homogeneity", "kappa-homogeneity", 1e-10, 0, [](Trial& t) -> R {
       const double zn = max_abs(kappa_forward(evaluate(t.f, Vec(2.0 * t.y1))).zeta);
       return homogeneity_check(t.f, t.y1, 2.0) / zn;
     }},
  }});

  cat.push_back({"angle", 0, {
    {"angle-to-axis", "angle-axis", 1e-10, 0, [](Trial& t) -> R {
       return std::abs(angle(t.f, t.y1, t.f.b_up).alpha - eval_scalars(t.f, t.y1).chi);
     }},
    {"angle-opposed-axes", "angle-axis-opposed", 1e-10, 0, [](Trial& t) -> R {
       return std::abs(angle(t.f, t.f.b_up, opposed_axis(t.f)).alpha - kPi / t.f.h);
     }},
    {"angle-kappa-image", "angle-riemannian-image", 1e-10, 0, [](Trial& t) -> R {
       return std::abs(angle(t.f, t.y1, t.y2).alpha - angle_via_zeta(t.f, t.y1, t.y2));
     }},
    {"angle-symmetry", "angle-definition", 1e-12, 0, [](Trial& t) -> R {
       return std::abs(angle(t.f, t.y1, t.y2).alpha - angle(t.f, t.y2, t.y1).alpha);
     }},
    {"angle-infinitesimal", "angle-infinitesimal", 1e-8, 0, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       Vec dy(3);
       for (int i = 0; i < 3; ++i) dy[i] = t.rng().normal();
       dy *= 1e-3 * std::sqrt(t.y1.dot(t.f.a * t.y1) / dy.dot(t.f.a * dy));
       return infinitesimal_angle_residual(t.f, t.y1, dy) * dy.dot(t.f.a * dy);
     }},
    {"angle-arc-length", "angle-as-arc-length", 1e-5, 20, [](Trial& t) -> R {
       const auto& [l1, l2] = t.arc_pair();
       return std::abs(t.arc().length() - angle(t.f, l1, l2).alpha);
     }},
  }});

  cat.push_back({"connection-metricity", 1, {
    {"metricity-metric", "connection-metricity", 1e-7, 0, [](Trial& t) -> R {
       const ConnectionEval c = t.connection();
       return max_abs(covariant_derivative(t.probe(1), t.f, c, fields::g_low, Rank::DownDown)) /
              max_abs(t.eval().g_low);
     }},
    {"metricity-norm", "connection-metricity", 1e-7, 0, [](Trial& t) -> R {
       const ConnectionEval c = t.connection();
       return max_abs(covariant_derivative(t.probe(1), t.f, c, fields::K, Rank::Scalar)) / t.eval().K;
     }},
    {"metricity-support", "connection-metricity", 1e-7, 0, [](Trial& t) -> R {
       const ConnectionEval c = t.connection();
       return max_abs(covariant_derivative(t.probe(1), t.f, c, fields::y_up, Rank::Up)) / max_abs(t.y1);
     }},
    {"metricity-lowered-support", "connection-metricity", 1e-7, 0, [](Trial& t) -> R {
       const ConnectionEval c = t.connection();
       return max_abs(covariant_derivative(t.probe(1), t.f, c, fields::y_low, Rank::Down)) /
              max_abs(t.eval().y_low);
     }},
    {"parallel-axis-limit", "connection-riemannian-limit", 1e-9, 0, [](Trial& t) -> R {
       if (max_abs(t.f.nabla_b) > 1e-12) return std::nullopt;
       const Tensor3 D = t.connection().D;
       return max_abs_diff(D, t.f.christoffel);
     }},
    {"two-dim-linearity", "connection-two-dimensional", 1e-9, 0, [](Trial& t) -> R {
       if (t.f.dim != 2) return std::nullopt;
       // the slit plane has two halves; D is constant on each
       auto side = [&](const Vec& y) { return t.f.b_up[0] * y[1] - t.f.b_up[1] * y[0]; };
       Vec y2 = t.y2;
       if (side(t.y1) * side(y2) < 0) y2 = 2 * t.f.b_low.dot(y2) * t.f.b_up - y2;
       const Tensor3 d1 = connection_coeffs(evaluate(t.f, t.y1), t.f, t.broken).D;
       const Tensor3 d2 = connection_coeffs(evaluate(t.f, y2), t.f, t.broken).D;
       return max_abs_diff(d1, d2);
     }},
  }});

  cat.push_back({"angle-transport", 1, {
    {"transport-analytic", "angle-transport", 1e-6, 0, [](Trial& t) -> R {
       return max_abs(angle_transport_residual(t.spec(), t.x, t.y1, t.y2));
     }},
    {"transport-rk4-angle", "angle-preservation", 1e-5, 5, [](Trial& t) -> R {
       const TransportResult& r = t.transport();
       return r.alpha_change / std::max(1.0, r.length);
     }},
    {"transport-rk4-norm", "norm-preservation", 1e-6, 5, [](Trial& t) -> R {
       const TransportResult& r = t.transport();
       return std::max(r.K1_change, r.K2_change);
     }},
    {"transitivity-norm", "connection-transitivity", 1e-7, 0, [](Trial& t) -> R {
       return max_abs(transitivity_residual(t.probe(1), fields::K, zeta_fields::K_image));
     }},
    {"transitivity-axis", "connection-transitivity", 1e-7, 0, [](Trial& t) -> R {
       return max_abs(transitivity_residual(t.probe(1), fields::b, zeta_fields::b_image));
     }},
  }});

  cat.push_back({"curvature", 3, {
    {"rho-commutator", "curvature-commutator", 1e-6, 20, [](Trial& t) -> R {
       return rel_diff(rho_from_commutator(t.probe(1), t.f, t.curvature()), t.curvature().rho, 1e-9);
     }},
    {"rho-contraction", "curvature-contraction", 1e-7, 0, [](Trial& t) -> R {
       const Contractions k = curvature_contractions(t.curvature(), t.eval(), t.f);
       return std::max({rel(k.rho2, k.rho2_rhs), rel(k.rho2, k.rho2_bv_rhs), rel(k.rho2_mixed, k.rho2_mixed_rhs)});
     }},
    {"M-contraction", "curvature-contraction", 1e-7, 0, [](Trial& t) -> R {
       const Contractions k = curvature_contractions(t.curvature(), t.eval(), t.f);
       return rel(k.M2, k.M2_rhs);
     }},
    {"E-contraction", "curvature-contraction", 1e-7, 0, [](Trial& t) -> R {
       const Contractions k = curvature_contractions(t.curvature(), t.eval(), t.f);
       return rel(k.E2, k.E2_rhs);
     }},
    {"M-form-equivalence", "curvature-M-forms", 1e-9, 0, [](Trial& t) -> R {
       const CurvatureEval& ce = t.curvature();
       return std::max({flat_rel(M_via_kappa(t.f, ce.kj), ce.M), flat_rel(M_projector_form(t.eval(), t.f), ce.M),
                        flat_rel(M_low_projector_form(t.eval(), t.f), ce.M_low)});
     }},
    {"rho-form-equivalence", "curvature-rho-forms", 1e-8, 0, [](Trial& t) -> R {
       const CurvatureEval& ce = t.curvature();
       return std::max({rel_diff(E_via_kappa(t.f, ce.kj, ce.M), ce.E, 1e-12),
                        rel_diff(rho_low_closed(t.eval(), t.f, ce.M_low, ce.P), ce.rho_low, 1e-12),
                        rel_diff(rho_low_via_T(t.f, ce.T), ce.rho_low, 1e-12)});
     }},
    {"M-support-contraction", "curvature-algebraic", 1e-8, 0, [](Trial& t) -> R {
       return algebraic_residuals(t.eval(), t.curvature()).yM;
     }},
    {"E-support-contraction", "curvature-algebraic", 1e-8, 0, [](Trial& t) -> R {
       const auto r = algebraic_residuals(t.eval(), t.curvature());
       return std::max(r.yE, r.Ey);
     }},
    {"E-symmetrization", "curvature-algebraic", 1e-8, 0, [](Trial& t) -> R {
       return algebraic_residuals(t.eval(), t.curvature()).sym;
     }},
    {"rho-skew", "curvature-algebraic", 1e-9, 0, [](Trial& t) -> R {
       return algebraic_residuals(t.eval(), t.curvature()).skew;
     }},
    {"auxiliary-identities", "curvature-auxiliary", 1e-7, 0, [](Trial& t) -> R {
       double worst = 0;
       for (const auto& r : auxiliary_identities(t.eval(), t.f, t.curvature()))
         worst = std::max(worst, r.residual / r.scale);
       return worst;
     }},
    {"cyclic-M", "curvature-cyclic", 1e-6, 0, [](Trial& t) -> R {
       const ConnectionEval c = t.connection();
       return cyclic_M_residual(DM_definitional(t.probe(2), t.f, c, t.curvature().M));
     }},
    {"cyclic-rho", "curvature-cyclic", 1e-6, 0, [](Trial& t) -> R {
       const ConnectionEval c = t.connection();
       return cyclic_rho_residual(Drho_definitional(t.probe(2), t.f, c, t.curvature().rho_low));
     }},
  }});

  cat.push_back({"geodesics", 1, {
    {"closed-form-ode", "indicatrix-geodesic-equations", 1e-8, 0, [](Trial& t) -> R {
       const double h = t.f.h;
       const ArcConstants k{t.rng().uniform(-0.9, 0.9) / h, t.rng().uniform(-1, 1), t.rng().uniform(-3, 3)};
       return arc_ode_residual(h, k, k.s_tilde + t.rng().uniform(0.05, 0.95) * kPi / h).max();
     }},
    {"arc-fit", "indicatrix-geodesic-solution", 1e-10, 0, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       const auto& [l1, l2] = t.arc_pair();
       const ArcFit fit = fit_arc(t.f, l1, l2);
       const AdaptedFrame af(t.f);
       return std::max(max_abs_diff(Vec(af.to_y(arc_R(t.f, fit.k, fit.s1))), l1),
                       max_abs_diff(Vec(af.to_y(arc_R(t.f, fit.k, fit.s2))), l2));
     }},
    {"expansion-reconstruction", "indicatrix-geodesic-expansion", 1e-9, 0, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       const auto& [l1, l2] = t.arc_pair();
       const ArcFit fit = fit_arc(t.f, l1, l2);
       if (std::abs(std::sin(t.f.h * (fit.s2 - fit.s1))) < 1e-3) return std::nullopt;
       const double s = fit.s1 + t.rng().uniform() * (fit.s2 - fit.s1);
       return expansion_reconstruction_error(t.f, fit.k, fit.s1, fit.s2, s);
     }},
    {"meridian-expansion", "indicatrix-geodesic-expansion", 1e-12, 0, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       const double h = t.f.h;
       const ArcConstants k{0.0, 0.0, t.rng().uniform(-3, 3)};
       const double s1 = t.rng().uniform(0.05, 0.3) * kPi / h, s2 = t.rng().uniform(0.6, 0.95) * kPi / h;
       return std::abs(arc_expansion_coeffs(t.f, k, s1, s2, t.rng().uniform(s1, s2)).Y);
     }},
    {"bvp-length", "indicatrix-geodesic-length", 1e-5, 20, [](Trial& t) -> R {
       const auto& [l1, l2] = t.arc_pair();
       return std::abs(t.arc().length() - angle(t.f, l1, l2).alpha);
     }},
    {"bvp-closed-form", "indicatrix-geodesic-solution", 1e-6, 20, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       const GeodesicArc& arc = t.arc();
       const ArcConstants k{arc.C_tilde, arc.s_tilde, arc.phi_tilde};
       const AdaptedFrame af(t.f);
       double dev = 0;
       for (const auto& smp : arc.samples) dev = std::max(dev, max_abs_diff(Vec(af.to_y(arc_R(t.f, k, smp.s))), smp.l));
       return dev;
     }},
    {"bvp-unit-speed", "indicatrix-geodesic-equations", 1e-6, 20, [](Trial& t) -> R {
       return arc_invariants(t.f, t.arc()).unit_speed;
     }},
    {"bvp-clairaut", "indicatrix-geodesic-clairaut", 1e-8, 20, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       return arc_invariants(t.f, t.arc()).clairaut;
     }},
  }});

  cat.push_back({"ratios", 0, {
    {"gauss-curvature", "indicatrix-constant-curvature", 1e-3, 20, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       const double chi = t.rng().uniform(0.15, 0.85) * kPi / t.f.h, phi = t.rng().uniform(-kPi, kPi);
       return std::abs(indicatrix_curvature(t.f, chi, phi) - t.f.h * t.f.h);
     }},
    {"area-ratio", "indicatrix-area", 1e-3, 1, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       return std::abs(t.area_volume().area_ratio * t.f.h * t.f.h - 1.0);
     }},
    {"volume-ratio", "finsleroid-volume", 1e-3, 1, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       return std::abs(t.area_volume().volume_ratio * t.f.h * t.f.h - 1.0);
     }},
    {"area-over-volume", "area-volume-relation", 1e-3, 1, [](Trial& t) -> R {
       if (t.f.dim != 3 && t.f.dim != 2) return std::nullopt;
       if (t.f.dim == 2) return std::abs(area_volume_ratios(t.f, 4000).area_over_volume / 2.0 - 1.0);
       return std::abs(t.area_volume().area_over_volume / 3.0 - 1.0);
     }},
  }});

  cat.push_back({"conformal-flatness", 0, {
    {"l-tensor", "conformal-flatness", 1e-4, 0, [](Trial& t) -> R {
       const Vec y = t.y1 / eval_scalars(t.f, t.y1).K;
       return conformal_flatness_residual(t.f, y);
     }},
    // reported as 1e-2 / max|L| over the trials so that pass still means residual <= tolerance
    {"l-tensor-negative-control", "conformal-flatness", 1.0, 0, [](Trial& t) -> R {
       if (t.f.g == 0.0 || t.f.dim != 3) return std::nullopt;
       const Vec y = t.y1 / eval_scalars(t.f, t.y1).K;
       return 1e-2 / std::max(conformal_flatness_residual(t.f, y, 0.0), 1e-300);
     }, true},
    {"conformal-cylinder", "conformal-cylinder", 1e-8, 0, [](Trial& t) -> R {
       if (t.f.dim != 3) return std::nullopt;
       const double h = t.f.h, sg = t.rng().uniform(-1, 1), chi = t.rng().uniform(0.2, 0.8) * kPi / h;
       return conformal_cylinder_residual(t.f, std::exp(h * sg) * std::sin(h * chi), std::exp(h * sg) * std::cos(h * chi),
                                          t.rng().uniform(-3, 3));
     }},
  }});
  return cat;
}

}  // namespace suite_detail

inline const std::vector<Suite>& suite_catalog() {
  static const std::vector<Suite> cat = suite_detail::build_catalog();
  return cat;
}

inline const Suite* find_suite(const std::string& name) {
  for (const auto& s : suite_catalog())
    if (s.name == name) return &s;
  return nullptr;
}

inline bool known_check(const std::string& id) {
  for (const auto& s : suite_catalog())
    for (const auto& c : s.checks)
      if (c.id == id) return true;
  return false;
}

// Runs one suite; evaluation errors become failed rows. Sets *stop when
// fail_fast is on and a row fails.
inline SuiteReport run_suite(const ManifoldSpec& spec, const Suite& suite, const RunOptions& opt,
                             const std::string& digest, bool* stop = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport rep;
  rep.suite_name = suite.name;
  rep.spec_digest = digest;
  rep.seed = opt.seed;
  rep.trials = opt.trials;
  const std::size_t nc = suite.checks.size();
  std::vector<CheckRow> rows(nc);
  std::vector<int> applied(nc, 0);
  for (std::size_t c = 0; c < nc; ++c) {
    const Check& ch = suite.checks[c];
    rows[c].check_id = ch.id;
    rows[c].paper_ref = ch.ref;
    auto it = opt.tol_overrides.find(ch.id);
    rows[c].tolerance = it != opt.tol_overrides.end() ? it->second : ch.tol;
  }
  const std::uint64_t salt = name_salt(suite.name);
  for (int i = 0; i < opt.trials; ++i) {
    std::optional<Trial> trial;
    std::string setup_error;
    try {
      trial.emplace(spec, i, opt.seed, salt, suite.level, opt.chart_minus);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t c = 0; c < nc; ++c) {
      const Check& ch = suite.checks[c];
      if (ch.max_trials > 0 && i >= ch.max_trials) continue;
      CheckRow& row = rows[c];
      if (!trial) {
        if (row.reason.empty()) row.reason = "trial " + std::to_string(i) + ": " + setup_error;
        row.pass = false;
        continue;
      }
      trial->broken = (ch.id == opt.break_check);
      try {
        const auto r = ch.fn(*trial);
        if (!r) continue;
        ++applied[c];
        if (ch.min_over_trials) {
          row.max_residual = applied[c] == 1 ? *r : std::min(row.max_residual, *r);
          continue;
        }
        if (!(*r <= row.tolerance) && row.pass) {
          row.pass = false;
          if (row.reason.empty()) row.reason = "trial " + std::to_string(i) + " above tolerance";
        }
        if (!std::isfinite(*r)) {
          row.pass = false;
          row.max_residual = std::numeric_limits<double>::infinity();
        } else {
          row.max_residual = std::max(row.max_residual, *r);
        }
      } catch (const std::exception& e) {
        row.pass = false;
        if (row.reason.empty() || row.reason.find("above tolerance") != std::string::npos)
          row.reason = "trial " + std::to_string(i) + ": " + e.what();
      }
      trial->broken = false;
    }
  }
  for (std::size_t c = 0; c < nc; ++c) {
    CheckRow& row = rows[c];
    if (!suite.checks[c].min_over_trials || applied[c] == 0) continue;
    if (!std::isfinite(row.max_residual)) row.max_residual = std::numeric_limits<double>::infinity();
    if (!(row.max_residual <= row.tolerance) && row.pass) {
      row.pass = false;
      if (row.reason.empty()) row.reason = "above tolerance";
    }
  }
  for (std::size_t c = 0; c < nc; ++c)
    if (applied[c] == 0 && rows[c].pass && rows[c].reason.empty()) rows[c].reason = "not applicable";
  for (auto& r : rows) {
    rep.per_check.push_back(r);
    if (!r.pass && opt.fail_fast) {
      if (stop) *stop = true;
      break;
    }
  }
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline std::vector<SuiteReport> run_suites(const ManifoldSpec& spec, const std::vector<std::string>& names,
                                           const RunOptions& opt, const std::string& digest) {
  std::vector<SuiteReport> out;
  for (const auto& n : names) {
    const Suite* s = find_suite(n);
    if (!s) throw SpecError("unknown suite '" + n + "'");
    bool stop = false;
    out.push_back(run_suite(spec, *s, opt, digest, &stop));
    if (stop) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report output. wall_time is the only field that varies between reruns.

inline std::string format_residual(double r) {
  if (std::isinf(r)) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << r;
  return os.str();
}

inline void write_delimited(std::ostream& os, const std::vector<SuiteReport>& reps, char sep = '\t') {
  os << "suite" << sep << "check_id" << sep << "paper_ref" << sep << "max_residual" << sep << "tolerance" << sep
     << "pass" << sep << "reason" << sep << "spec_digest" << sep << "seed" << sep << "trials" << sep << "wall_time\n";
  for (const auto& r : reps)
    for (const auto& c : r.per_check)
      os << r.suite_name << sep << c.check_id << sep << c.paper_ref << sep << format_residual(c.max_residual) << sep
         << format_residual(c.tolerance) << sep << (c.pass ? "pass" : "FAIL") << sep << c.reason << sep
         << r.spec_digest << sep << r.seed << sep << r.trials << sep << r.wall_time << '\n';
}

inline nlohmann::json to_json(const std::vector<SuiteReport>& reps) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reps) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : r.per_check)
      rows.push_back({{"check_id", c.check_id},
                      {"paper_ref", c.paper_ref},
                      {"max_residual", std::isinf(c.max_residual) ? nlohmann::json("inf") : nlohmann::json(c.max_residual)},
                      {"tolerance", c.tolerance},
                      {"pass", c.pass},
                      {"reason", c.reason}});
    out.push_back({{"suite_name", r.suite_name},
                   {"spec_digest", r.spec_digest},
                   {"seed", r.seed},
                   {"trials", r.trials},
                   {"per_check", rows},
                   {"wall_time", r.wall_time}});
  }
  return out;
}

}  // namespace finsler
