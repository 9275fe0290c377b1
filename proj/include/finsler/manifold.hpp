#pragma once
// Associated Riemannian space: analytic metric families a_ij(x), unit
// 1-form b_i(x), Christoffel symbols, covariant derivative of b and the
// Riemannian curvature tensor with its covariant derivative.

#include "finsler/jet.hpp"
#include "finsler/tensor.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MetricKind { Flat, DiagonalExp, PolynomialPerturbation, ConstantCurvature };
enum class BKind { ConstantAxis, GradientOfScalar, RawVector };
enum class DerivativeMode { Analytic, FiniteDifference };

inline const char* to_string(MetricKind k) {
  switch (k) {
    case MetricKind::Flat: return "flat";
    case MetricKind::DiagonalExp: return "diagonal-exp";
    case MetricKind::PolynomialPerturbation: return "polynomial-perturbation";
    case MetricKind::ConstantCurvature: return "constant-curvature";
  }
  return "?";
}
inline const char* to_string(BKind k) {
  switch (k) {
    case BKind::ConstantAxis: return "constant-axis";
    case BKind::GradientOfScalar: return "gradient-of-scalar";
    case BKind::RawVector: return "raw-vector";
  }
  return "?";
}

// Metric families. Row-major N*N output.
//   flat:                    a = M (constant SPD matrix, identity by default)
//   diagonal-exp:            a_ii = exp(2 phi_i), phi_i = sum_j C_ij x_j + 1/2 sum_j Q_ij x_j^2
//   polynomial-perturbation: a_ij = d_ij + eps (x_i x_j + (x_i + x_j)^3 / 6 + d_ij |x|^2)
//   constant-curvature:      a_ij = d_ij 4 / (1 + c |x|^2)^2   (sectional curvature c)
struct MetricFamily {
  MetricKind kind = MetricKind::Flat;
  int n = 3;
  std::vector<double> matrix;     // flat
  std::vector<double> lin, quad;  // diagonal-exp (N*N each)
  double eps = 0.0;               // polynomial-perturbation
  double curvature = 0.0;         // constant-curvature

  static MetricFamily flat(int n) {
    MetricFamily m;
    m.kind = MetricKind::Flat;
    m.n = n;
    m.matrix.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) m.matrix[i * n + i] = 1.0;
    return m;
  }
  static MetricFamily diagonal_exp(int n, std::vector<double> c, std::vector<double> q) {
    MetricFamily m;
    m.kind = MetricKind::DiagonalExp;
    m.n = n;
    m.lin = std::move(c);
    m.quad = q.empty() ? std::vector<double>(n * n, 0.0) : std::move(q);
    return m;
  }
  static MetricFamily polynomial(int n, double eps) {
    MetricFamily m;
    m.kind = MetricKind::PolynomialPerturbation;
    m.n = n;
    m.eps = eps;
    return m;
  }
  static MetricFamily constant_curvature(int n, double c) {
    MetricFamily m;
    m.kind = MetricKind::ConstantCurvature;
    m.n = n;
    m.curvature = c;
    return m;
  }

  double box() const {
    switch (kind) {
      case MetricKind::Flat: return 10.0;
      case MetricKind::DiagonalExp: return 1.0;
      case MetricKind::PolynomialPerturbation: return 1.0;
      case MetricKind::ConstantCurvature:
        return curvature < 0 ? std::min(0.5, 0.5 / std::sqrt(n * -curvature)) : 0.5;
    }
    return 1.0;
  }

  template <class T>
  std::vector<T> eval(const std::vector<T>& x) const {
    using std::exp;
    const T zero = x[0] * 0.0;
    std::vector<T> a(n * n, zero);
    switch (kind) {
      case MetricKind::Flat:
        for (int k = 0; k < n * n; ++k) a[k] = zero + matrix[k];
        break;
      case MetricKind::DiagonalExp:
        for (int i = 0; i < n; ++i) {
          T phi = zero;
          for (int j = 0; j < n; ++j) phi = phi + lin[i * n + j] * x[j] + 0.5 * quad[i * n + j] * x[j] * x[j];
          a[i * n + i] = exp(2.0 * phi);
        }
        break;
      case MetricKind::PolynomialPerturbation: {
        T r2 = zero;
        for (int j = 0; j < n; ++j) r2 = r2 + x[j] * x[j];
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            T s = x[i] + x[j];
            T p = x[i] * x[j] + s * s * s / 6.0;
            if (i == j) p = p + r2;
            a[i * n + j] = eps * p + kronecker(i, j);
          }
        break;
      }
      case MetricKind::ConstantCurvature: {
        T r2 = zero;
        for (int j = 0; j < n; ++j) r2 = r2 + x[j] * x[j];
        T d = 1.0 + curvature * r2;
        T f = 4.0 / (d * d);
        for (int i = 0; i < n; ++i) a[i * n + i] = f;
        break;
      }
    }
    return a;
  }
};

// Raw 1-form fields before normalization.
//   constant-axis:      beta_i = c_i (covariant components)
//   gradient-of-scalar: beta_i = d_i (c.x + 1/2 x^T Q x) = c_i + sum_j Qs_ij x_j
//   raw-vector:         beta^i = c^i + sum_j D_ij x_j (contravariant), lowered with a
struct BField {
  BKind kind = BKind::ConstantAxis;
  int n = 3;
  std::vector<double> c;   // axis / linear / constant
  std::vector<double> m;   // N*N quadratic or linear part

  static BField constant_axis(std::vector<double> axis) {
    BField b;
    b.kind = BKind::ConstantAxis;
    b.n = static_cast<int>(axis.size());
    b.c = std::move(axis);
    b.m.assign(b.n * b.n, 0.0);
    return b;
  }
  static BField gradient(std::vector<double> lin, std::vector<double> quad) {
    BField b;
    b.kind = BKind::GradientOfScalar;
    b.n = static_cast<int>(lin.size());
    b.c = std::move(lin);
    b.m = quad.empty() ? std::vector<double>(b.n * b.n, 0.0) : std::move(quad);
    for (int i = 0; i < b.n; ++i)
      for (int j = i + 1; j < b.n; ++j) {
        double s = 0.5 * (b.m[i * b.n + j] + b.m[j * b.n + i]);
        b.m[i * b.n + j] = b.m[j * b.n + i] = s;
      }
    return b;
  }
  static BField raw_vector(std::vector<double> c0, std::vector<double> lin) {
    BField b;
    b.kind = BKind::RawVector;
    b.n = static_cast<int>(c0.size());
    b.c = std::move(c0);
    b.m = lin.empty() ? std::vector<double>(b.n * b.n, 0.0) : std::move(lin);
    return b;
  }

  template <class T>
  std::vector<T> eval(const std::vector<T>& x, const std::vector<T>& a) const {
    const T zero = x[0] * 0.0;
    std::vector<T> beta(n, zero);
    for (int i = 0; i < n; ++i) {
      T s = zero + c[i];
      if (kind != BKind::ConstantAxis)
        for (int j = 0; j < n; ++j) s = s + m[i * n + j] * x[j];
      beta[i] = s;
    }
    if (kind == BKind::RawVector) {
      std::vector<T> low(n, zero);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) low[i] = low[i] + a[i * n + j] * beta[j];
      return low;
    }
    return beta;
  }
};

struct ManifoldSpec {
  int dim = 3;
  double g = 0.0;
  double h = 1.0;        // sqrt(1 - g^2/4)
  double G = 0.0;        // g/h
  MetricFamily metric;
  BField bfield;
  DerivativeMode mode = DerivativeMode::Analytic;
  double fd_step = 1e-5;
  double b_norm_factor = 1.0;  // 1/|beta|_a at the box center

  double box() const { return metric.box(); }
  bool in_box(const Vec& x) const {
    for (int i = 0; i < x.size(); ++i)
      if (std::abs(x[i]) > box() + 1e-12) return false;
    return true;
  }
};

inline double charge_h(double g) { return std::sqrt(1.0 - 0.25 * g * g); }

// Symmetric Gauss-Jordan inverse without pivoting (SPD input).
template <class T>
std::vector<T> spd_inverse(const std::vector<T>& a, int n) {
  std::vector<T> m = a;
  const T zero = a[0] * 0.0;
  std::vector<T> inv(n * n, zero);
  for (int i = 0; i < n; ++i) inv[i * n + i] = zero + 1.0;
  for (int p = 0; p < n; ++p) {
    const double piv = value_of(m[p * n + p]);
    if (!(piv > 0.0)) throw EvalError("metric not positive definite at x");
    T r = 1.0 / m[p * n + p];
    for (int j = 0; j < n; ++j) { m[p * n + j] = m[p * n + j] * r; inv[p * n + j] = inv[p * n + j] * r; }
    for (int i = 0; i < n; ++i) {
      if (i == p) continue;
      T f = m[i * n + p];
      for (int j = 0; j < n; ++j) {
        m[i * n + j] = m[i * n + j] - f * m[p * n + j];
        inv[i * n + j] = inv[i * n + j] - f * inv[p * n + j];
      }
    }
  }
  return inv;
}

inline bool is_spd(const Mat& a) {
  if (!a.isApprox(a.transpose(), 1e-12)) return false;
  Eigen::LLT<Mat> llt(a);
  return llt.info() == Eigen::Success;
}

// All x-dependent quantities at one point. Index conventions:
//   da(i,m,n)          = d a_mn / d x^i
//   christoffel(k,i,j) = a^k_ij
//   nabla_b(n,j)       = nabla_n b_j
//   riem(n,i,k,m)      = a_n^i_km
//   riem_low(n,i,k,m)  = a_{n i k m} = a_ip a_n^p_km
//   d_riem(k,h,t,i,j)  = nabla_k a_h^t_ij
struct PointFrame {
  int dim = 0;
  int level = 0;
  double g = 0.0, h = 1.0, G = 0.0;
  Vec x;
  Mat a, a_inv;
  Tensor3 da;
  Tensor3 christoffel;
  Vec b_low, b_up;
  double b_norm_factor = 1.0;
  Mat db;        // db(n,j) = d b_j / d x^n
  Mat nabla_b;
  Tensor4 riem, riem_low;
  Tensor5 d_riem;
};

// d b_j/dx^n - b_k a^k_nj
inline Mat covariant_db(const PointFrame& f) {
  const int n = f.dim;
  Mat r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = f.db(i, j);
      for (int k = 0; k < n; ++k) s -= f.b_low[k] * f.christoffel(k, i, j);
      r(i, j) = s;
    }
  return r;
}

namespace detail {

struct FieldJets {
  std::vector<Jet> a, beta;
};

inline FieldJets analytic_jets(const ManifoldSpec& s, const Vec& x, int order) {
  const int n = s.dim;
  std::vector<Jet> xs;
  for (int v = 0; v < n; ++v) xs.push_back(Jet::variable(n, order, v, x[v]));
  FieldJets fj;
  fj.a = s.metric.eval(xs);
  fj.beta = s.bfield.eval(xs, fj.a);
  return fj;
}

// Mixed central differences; the step grows with the derivative order
// (fd_step, 10 fd_step, 100 fd_step for orders 1, 2, 3).
inline FieldJets fd_jets(const ManifoldSpec& s, const Vec& x, int order) {
  const int n = s.dim;
  auto values = [&](const std::vector<double>& xv) {
    std::vector<double> a = s.metric.eval(xv);
    std::vector<double> b = s.bfield.eval(xv, a);
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  struct Stencil { std::vector<int> off; std::vector<double> w; };
  const std::array<Stencil, 4> st = {Stencil{{0}, {1.0}}, Stencil{{-1, 1}, {-0.5, 0.5}},
                                     Stencil{{-1, 0, 1}, {1.0, -2.0, 1.0}},
                                     Stencil{{-2, -1, 1, 2}, {-0.5, 1.0, -1.0, 0.5}}};
  const JetTable& tab = jet_table(n);
  const int ncoef = tab.count[order];
  std::vector<double> x0(x.data(), x.data() + n);
  const std::size_t nout = static_cast<std::size_t>(n * n + n);
  std::vector<std::vector<double>> coef(nout, std::vector<double>(ncoef, 0.0));
  for (int k = 0; k < ncoef; ++k) {
    const auto& al = tab.mono[k];
    const int deg = tab.degree[k];
    const double hstep = deg == 0 ? 0.0 : s.fd_step * std::pow(10.0, deg - 1);
    std::vector<int> vars;
    for (int v = 0; v < n; ++v)
      if (al[v] > 0) vars.push_back(v);
    std::vector<double> acc(nout, 0.0);
    std::function<void(std::size_t, std::vector<double>&, double)> rec =
        [&](std::size_t vi, std::vector<double>& pt, double w) {
          if (vi == vars.size()) {
            auto val = values(pt);
            for (std::size_t o = 0; o < nout; ++o) acc[o] += w * val[o];
            return;
          }
          const int v = vars[vi];
          const Stencil& sc = st[al[v]];
          for (std::size_t q = 0; q < sc.off.size(); ++q) {
            const double old = pt[v];
            pt[v] = old + sc.off[q] * hstep;
            rec(vi + 1, pt, w * sc.w[q] / std::pow(hstep, al[v]));
            pt[v] = old;
          }
        };
    std::vector<double> pt = x0;
    rec(0, pt, 1.0);
    double fact = 1.0;
    for (int v = 0; v < n; ++v)
      for (int e = 2; e <= al[v]; ++e) fact *= e;
    for (std::size_t o = 0; o < nout; ++o) coef[o][k] = acc[o] / fact;
  }
  FieldJets fj;
  for (std::size_t o = 0; o < nout; ++o) {
    Jet j(n, order);
    j.coeffs() = coef[o];
    if (o < static_cast<std::size_t>(n * n)) fj.a.push_back(j); else fj.beta.push_back(j);
  }
  return fj;
}

}  // namespace detail

// level 0: a, b; 1: + christoffel, nabla_b; 2: + riem; 3: + d_riem
inline PointFrame eval_point(const ManifoldSpec& s, const Vec& x, int level = 3) {
  const int n = s.dim;
  if (x.size() != n) throw EvalError("point dimension mismatch");
  if (!s.in_box(x)) throw EvalError("point outside the family validity region");
  const int order = level;
  detail::FieldJets fj = s.mode == DerivativeMode::Analytic ? detail::analytic_jets(s, x, order)
                                                          : detail::fd_jets(s, x, order);
  std::vector<Jet> ai = spd_inverse(fj.a, n);
  Jet nrm2(n, order);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) nrm2 += fj.beta[i] * ai[i * n + j] * fj.beta[j];
  if (!(nrm2.value() > 1e-24)) throw EvalError("b field vanishes at x");
  Jet sc = 1.0 / sqrt(nrm2);
  std::vector<Jet> b(n);
  for (int i = 0; i < n; ++i) b[i] = fj.beta[i] * sc;

  PointFrame f;
  f.dim = n;
  f.level = level;
  f.g = s.g;
  f.h = s.h;
  f.G = s.G;
  f.x = x;
  f.a.resize(n, n);
  f.a_inv.resize(n, n);
  f.b_low.resize(n);
  for (int i = 0; i < n; ++i) {
    f.b_low[i] = b[i].value();
    for (int j = 0; j < n; ++j) {
      f.a(i, j) = fj.a[i * n + j].value();
      f.a_inv(i, j) = ai[i * n + j].value();
    }
  }
  f.a = 0.5 * (f.a + f.a.transpose());
  f.a_inv = 0.5 * (f.a_inv + f.a_inv.transpose());
  if (!is_spd(f.a)) throw EvalError("metric not positive definite at x");
  f.b_up = f.a_inv * f.b_low;
  f.b_norm_factor = sc.value();
  if (level < 1) return f;

  f.da = Tensor3(n);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) f.da(i, p, q) = fj.a[p * n + q].d1(i);

  // christoffel jets (order level-1)
  const int o1 = level - 1;
  std::vector<std::vector<Jet>> dA(n);
  for (int l = 0; l < n; ++l) {
    dA[l].resize(n * n);
    for (int k = 0; k < n * n; ++k) dA[l][k] = fj.a[k].diff(l);
  }
  std::vector<Jet> ai1(n * n);
  for (int k = 0; k < n * n; ++k) ai1[k] = ai[k].truncated(o1);
  auto gidx = [n](int k, int i, int j) { return (k * n + i) * n + j; };
  std::vector<Jet> gam(n * n * n, Jet(n, o1));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Jet s2(n, o1);
        for (int l = 0; l < n; ++l)
          s2 += ai1[k * n + l] * (dA[i][l * n + j] + dA[j][l * n + i] - dA[l][i * n + j]);
        s2 *= 0.5;
        gam[gidx(k, i, j)] = s2;
        gam[gidx(k, j, i)] = s2;
      }
  f.christoffel = Tensor3(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f.christoffel(k, i, j) = gam[gidx(k, i, j)].value();
  f.db.resize(n, n);
  for (int p = 0; p < n; ++p)
    for (int j = 0; j < n; ++j) f.db(p, j) = b[j].d1(p);
  f.nabla_b = covariant_db(f);
  if (level < 2) return f;

  const int o2 = level - 2;
  auto ridx = [n](int a, int b2, int c, int d) { return ((a * n + b2) * n + c) * n + d; };
  std::vector<Jet> rj(n * n * n * n, Jet(n, o2));
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int m = k + 1; m < n; ++m) {
          Jet r = gam[gidx(i, p, m)].diff(k) - gam[gidx(i, p, k)].diff(m);
          for (int u = 0; u < n; ++u)
            r += gam[gidx(u, p, m)].truncated(o2) * gam[gidx(i, u, k)].truncated(o2) -
                 gam[gidx(u, p, k)].truncated(o2) * gam[gidx(i, u, m)].truncated(o2);
          rj[ridx(p, i, k, m)] = r;
          rj[ridx(p, i, m, k)] = -r;
        }
  f.riem = Tensor4(n);
  f.riem_low = Tensor4(n);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) f.riem(p, i, k, m) = rj[ridx(p, i, k, m)].value();
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          double s2 = 0.0;
          for (int q = 0; q < n; ++q) s2 += f.a(i, q) * f.riem(p, q, k, m);
          f.riem_low(p, i, k, m) = s2;
        }
  if (level < 3) return f;

  f.d_riem = Tensor5(n);
  const Tensor3& G3 = f.christoffel;
  const Tensor4& R = f.riem;
  for (int k = 0; k < n; ++k)
    for (int hh = 0; hh < n; ++hh)
      for (int t = 0; t < n; ++t)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double s2 = rj[ridx(hh, t, i, j)].d1(k);
            for (int u = 0; u < n; ++u)
              s2 += G3(t, k, u) * R(hh, u, i, j) - G3(u, k, hh) * R(u, t, i, j) -
                    G3(u, k, i) * R(hh, t, u, j) - G3(u, k, j) * R(hh, t, i, u);
            f.d_riem(k, hh, t, i, j) = s2;
          }
  return f;
}

// Validates family parameters on probe points and records the b normalization.
inline ManifoldSpec make_spec(int dim, double g, MetricFamily metric, BField bfield,
                              DerivativeMode mode = DerivativeMode::Analytic, double fd_step = 1e-5) {
  if (dim < 2) throw SpecError("dim must be at least 2");
  if (dim > kJetMaxVars) throw SpecError("dim too large");
  if (!(std::abs(g) < 2.0)) throw SpecError("charge out of range");
  if (metric.n != dim || bfield.n != dim) throw SpecError("family dimension mismatch");
  if (!(fd_step > 0.0)) throw SpecError("fd_step must be positive");
  ManifoldSpec s;
  s.dim = dim;
  s.g = g;
  s.h = charge_h(g);
  s.G = g / s.h;
  s.metric = std::move(metric);
  s.bfield = std::move(bfield);
  s.mode = mode;
  s.fd_step = fd_step;
  // probe points: center, +-0.9 box along each axis, scaled corners
  std::vector<Vec> probes;
  probes.push_back(Vec::Zero(dim));
  const double w = 0.9 * s.box();
  for (int i = 0; i < dim; ++i)
    for (double sg : {-1.0, 1.0}) {
      Vec p = Vec::Zero(dim);
      p[i] = sg * w;
      probes.push_back(p);
    }
  for (int c = 0; c < (1 << dim); ++c) {
    Vec p(dim);
    for (int i = 0; i < dim; ++i) p[i] = ((c >> i) & 1 ? w : -w);
    probes.push_back(p);
  }
  for (const Vec& p : probes) {
    std::vector<double> xv(p.data(), p.data() + dim);
    std::vector<double> a = s.metric.eval(xv);
    Mat am = Eigen::Map<Mat>(a.data(), dim, dim);
    bool ok = true;
    for (double v : a) ok = ok && std::isfinite(v);
    if (!ok || !is_spd(am)) throw SpecError("metric not positive definite at probe points");
    std::vector<double> beta = s.bfield.eval(xv, a);
    Vec bv = Eigen::Map<Vec>(beta.data(), dim);
    double nn = bv.dot(am.inverse() * bv);
    if (!(nn > 1e-16)) throw SpecError("b field vanishes at probe points");
    if (p.norm() == 0.0) s.b_norm_factor = 1.0 / std::sqrt(nn);
  }
  return s;
}

}  // namespace finsler
