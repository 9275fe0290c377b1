#pragma once
// Truncated multivariate Taylor polynomials (order <= 3).
// A Jet in nv variables stores c[alpha] = (1/alpha!) d^alpha f at the
// expansion point, monomials graded by total degree so that the
// coefficients of a lower-order jet form a prefix of a higher-order one.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace finsler {

inline constexpr int kJetMaxOrder = 3;
inline constexpr int kJetMaxVars = 6;

struct JetTable {
  int nv = 0;
  std::vector<std::array<int, kJetMaxVars>> mono;  // exponents
  std::vector<int> degree;
  std::array<int, kJetMaxOrder + 2> count{};  // number of monomials with degree <= o
  struct Pair { int i, j, k; };
  std::vector<Pair> pairs;                         // sorted by k
  // deriv[v][k] = index of mono[k] - e_v (or -1); factor alpha_v
  std::vector<std::vector<int>> deriv;
  std::vector<int> unit;  // unit[v] = index of e_v

  int find(const std::array<int, kJetMaxVars>& a) const {
    for (std::size_t k = 0; k < mono.size(); ++k)
      if (mono[k] == a) return static_cast<int>(k);
    return -1;
  }

  explicit JetTable(int n) : nv(n) {
    for (int d = 0; d <= kJetMaxOrder; ++d) {
      std::array<int, kJetMaxVars> a{};
      enumerate(a, 0, d);
      count[d] = static_cast<int>(mono.size());
    }
    count[kJetMaxOrder + 1] = count[kJetMaxOrder];
    for (auto& m : mono) {
      int s = 0;
      for (int v = 0; v < nv; ++v) s += m[v];
      degree.push_back(s);
    }
    for (int i = 0; i < static_cast<int>(mono.size()); ++i)
      for (int j = 0; j < static_cast<int>(mono.size()); ++j) {
        if (degree[i] + degree[j] > kJetMaxOrder) continue;
        std::array<int, kJetMaxVars> s{};
        for (int v = 0; v < nv; ++v) s[v] = mono[i][v] + mono[j][v];
        pairs.push_back({i, j, find(s)});
      }
    deriv.assign(nv, std::vector<int>(mono.size(), -1));
    unit.assign(nv, -1);
    for (int v = 0; v < nv; ++v) {
      for (std::size_t k = 0; k < mono.size(); ++k) {
        if (mono[k][v] == 0) continue;
        auto a = mono[k];
        a[v] -= 1;
        deriv[v][k] = find(a);
      }
      std::array<int, kJetMaxVars> e{};
      e[v] = 1;
      unit[v] = find(e);
    }
  }

 private:
  void enumerate(std::array<int, kJetMaxVars>& a, int v, int left) {
    if (v == nv - 1) {
      a[v] = left;
      mono.push_back(a);
      a[v] = 0;
      return;
    }
    for (int e = left; e >= 0; --e) {
      a[v] = e;
      enumerate(a, v + 1, left - e);
    }
    a[v] = 0;
  }
};

inline const JetTable& jet_table(int nv) {
  static const std::array<JetTable, kJetMaxVars> tables = [] {
    return std::array<JetTable, kJetMaxVars>{JetTable(1), JetTable(2), JetTable(3),
                                             JetTable(4), JetTable(5), JetTable(6)};
  }();
  if (nv < 1 || nv > kJetMaxVars) throw std::invalid_argument("jet: unsupported variable count");
  return tables[nv - 1];
}

class Jet {
 public:
  Jet() = default;
  Jet(int nv, int order, double value = 0.0)
      : tab_(&jet_table(nv)), ord_(order), c_(tab_->count[order], 0.0) {
    c_[0] = value;
  }
  static Jet variable(int nv, int order, int v, double x0) {
    Jet j(nv, order, x0);
    if (order >= 1) j.c_[j.tab_->unit[v]] = 1.0;
    return j;
  }

  int order() const { return ord_; }
  int nvars() const { return tab_->nv; }
  double value() const { return c_[0]; }
  const std::vector<double>& coeffs() const { return c_; }
  std::vector<double>& coeffs() { return c_; }
  const JetTable& table() const { return *tab_; }

  // first partial derivative at the expansion point
  double d1(int v) const { return ord_ >= 1 ? c_[tab_->unit[v]] : 0.0; }

  Jet truncated(int o) const {
    if (o >= ord_) return *this;
    Jet r(*this);
    r.ord_ = o;
    r.c_.resize(tab_->count[o]);
    return r;
  }

  // partial derivative as a jet of one lower order
  Jet diff(int v) const {
    if (ord_ == 0) throw std::logic_error("jet: derivative of an order-0 jet");
    Jet r(tab_->nv, ord_ - 1);
    const int n = static_cast<int>(c_.size());
    for (int k = 0; k < n; ++k) {
      int p = tab_->deriv[v][k];
      if (p < 0 || p >= static_cast<int>(r.c_.size())) continue;
      r.c_[p] += tab_->mono[k][v] * c_[k];
    }
    return r;
  }

  Jet& operator+=(const Jet& o) { align(o); for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k]; return *this; }
  Jet& operator-=(const Jet& o) { align(o); for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k]; return *this; }
  Jet& operator+=(double s) { c_[0] += s; return *this; }
  Jet& operator-=(double s) { c_[0] -= s; return *this; }
  Jet& operator*=(double s) { for (auto& x : c_) x *= s; return *this; }
  Jet& operator/=(double s) { for (auto& x : c_) x /= s; return *this; }
  Jet& operator*=(const Jet& o) { *this = mul(*this, o); return *this; }
  Jet& operator/=(const Jet& o) { *this = mul(*this, o.reciprocal()); return *this; }

  Jet operator-() const { Jet r(*this); for (auto& x : r.c_) x = -x; return r; }

  static Jet mul(const Jet& a, const Jet& b) {
    const int o = a.ord_ < b.ord_ ? a.ord_ : b.ord_;
    Jet r(a.tab_->nv, o);
    const int n = static_cast<int>(r.c_.size());
    for (const auto& p : a.tab_->pairs) {
      if (p.k >= n) continue;
      r.c_[p.k] += a.c_[p.i] * b.c_[p.j];
    }
    return r;
  }

  // f(x0 + d) = sum_k f^(k)(x0) d^k / k!, with f^(k) supplied in fk
  Jet compose(const std::array<double, kJetMaxOrder + 1>& fk) const {
    Jet d(*this);
    d.c_[0] = 0.0;
    Jet r(tab_->nv, ord_, fk[0]);
    Jet p(tab_->nv, ord_, 1.0);
    double fact = 1.0;
    for (int k = 1; k <= ord_; ++k) {
      p = mul(p, d);
      fact *= k;
      const double w = fk[k] / fact;
      for (std::size_t i = 0; i < r.c_.size(); ++i) r.c_[i] += w * p.c_[i];
    }
    return r;
  }

  Jet reciprocal() const {
    const double x = c_[0];
    if (x == 0.0) throw std::domain_error("jet: division by zero");
    return compose({1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x), -6.0 / (x * x * x * x)});
  }

 private:
  void align(const Jet& o) {
    if (o.ord_ < ord_) { ord_ = o.ord_; c_.resize(tab_->count[ord_]); }
  }
  const JetTable* tab_ = nullptr;
  int ord_ = 0;
  std::vector<double> c_;
};

inline Jet operator+(Jet a, const Jet& b) { a += b; return a; }
inline Jet operator-(Jet a, const Jet& b) { a -= b; return a; }
inline Jet operator*(const Jet& a, const Jet& b) { return Jet::mul(a, b); }
inline Jet operator/(const Jet& a, const Jet& b) { return Jet::mul(a, b.reciprocal()); }
inline Jet operator+(Jet a, double s) { a += s; return a; }
inline Jet operator+(double s, Jet a) { a += s; return a; }
inline Jet operator-(Jet a, double s) { a -= s; return a; }
inline Jet operator-(double s, const Jet& a) { Jet r = -a; r += s; return r; }
inline Jet operator*(Jet a, double s) { a *= s; return a; }
inline Jet operator*(double s, Jet a) { a *= s; return a; }
inline Jet operator/(Jet a, double s) { a /= s; return a; }
inline Jet operator/(double s, const Jet& a) { Jet r = a.reciprocal(); r *= s; return r; }

inline Jet exp(const Jet& a) {
  const double e = std::exp(a.value());
  return a.compose({e, e, e, e});
}
inline Jet log(const Jet& a) {
  const double x = a.value();
  return a.compose({std::log(x), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)});
}
inline Jet sin(const Jet& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.compose({s, c, -s, -c});
}
inline Jet cos(const Jet& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.compose({c, -s, -c, s});
}
inline Jet sqrt(const Jet& a) {
  const double x = a.value();
  const double r = std::sqrt(x);
  return a.compose({r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x)});
}
inline Jet pow(const Jet& a, double p) {
  const double x = a.value();
  return a.compose({std::pow(x, p), p * std::pow(x, p - 1), p * (p - 1) * std::pow(x, p - 2),
                    p * (p - 1) * (p - 2) * std::pow(x, p - 3)});
}

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }

}  // namespace finsler
