#pragma once
// Dense small tensors of dimension N (no symmetry compression).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace finsler {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

template <int R>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(int n, double fill = 0.0) : n_(n), d_(ipow(n, R), fill) {}

  int dim() const { return n_; }
  static constexpr int rank() { return R; }
  std::size_t size() const { return d_.size(); }

  template <typename... I>
  double& operator()(I... idx) {
    static_assert(sizeof...(I) == R, "wrong number of indices");
    return d_[offset(idx...)];
  }
  template <typename... I>
  double operator()(I... idx) const {
    static_assert(sizeof...(I) == R, "wrong number of indices");
    return d_[offset(idx...)];
  }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }
  const std::vector<double>& flat() const { return d_; }

  Tensor& operator+=(const Tensor& o) { for (std::size_t k = 0; k < d_.size(); ++k) d_[k] += o.d_[k]; return *this; }
  Tensor& operator-=(const Tensor& o) { for (std::size_t k = 0; k < d_.size(); ++k) d_[k] -= o.d_[k]; return *this; }
  Tensor& operator*=(double s) { for (auto& x : d_) x *= s; return *this; }
  friend Tensor operator+(Tensor a, const Tensor& b) { a += b; return a; }
  friend Tensor operator-(Tensor a, const Tensor& b) { a -= b; return a; }
  friend Tensor operator*(Tensor a, double s) { a *= s; return a; }
  friend Tensor operator*(double s, Tensor a) { a *= s; return a; }

  double max_abs() const {
    double m = 0.0;
    for (double x : d_) m = std::max(m, std::abs(x));
    return m;
  }
  void set_zero() { std::fill(d_.begin(), d_.end(), 0.0); }

 private:
  static std::size_t ipow(int n, int r) {
    std::size_t s = 1;
    for (int k = 0; k < r; ++k) s *= static_cast<std::size_t>(n);
    return s;
  }
  template <typename... I>
  std::size_t offset(I... idx) const {
    std::size_t off = 0;
    ((off = off * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx)), ...);
    return off;
  }
  int n_ = 0;
  std::vector<double> d_;
};

using Tensor3 = Tensor<3>;
using Tensor4 = Tensor<4>;
using Tensor5 = Tensor<5>;

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
template <int R>
double max_abs(const Tensor<R>& t) { return t.max_abs(); }

template <int R>
double max_abs_diff(const Tensor<R>& a, const Tensor<R>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.flat()[k] - b.flat()[k]));
  return m;
}
inline double max_abs_diff(const Mat& a, const Mat& b) { return max_abs(Mat(a - b)); }
inline double max_abs_diff(const Vec& a, const Vec& b) { return max_abs(Vec(a - b)); }

// max |a-b| / max(|b|, floor)
template <class T>
double rel_diff(const T& a, const T& b, double floor = 1e-300) {
  return max_abs_diff(a, b) / std::max(max_abs(b), floor);
}

inline double kronecker(int i, int j) { return i == j ? 1.0 : 0.0; }

}  // namespace finsler
