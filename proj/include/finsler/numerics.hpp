#pragma once
// Finite-difference helpers, the sample generator and random sampling of
// points and vectors.

#include "finsler/manifold.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace finsler {

// 5-point central first derivative of a vector-valued function of a scalar.
template <class F>
std::vector<double> fd5(F&& fn, double step) {
  static constexpr double w[4] = {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12};
  static constexpr int off[4] = {-2, -1, 1, 2};
  std::vector<double> acc;
  for (int s = 0; s < 4; ++s) {
    std::vector<double> v = fn(off[s] * step);
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) acc[k] += w[s] * v[k] / step;
  }
  return acc;
}

// d/dp^i of fn at p, returned as out[i][k].
template <class F>
std::vector<std::vector<double>> fd_gradient(F&& fn, const Vec& p, double step) {
  std::vector<std::vector<double>> r;
  for (int i = 0; i < p.size(); ++i)
    r.push_back(fd5(
        [&](double d) {
          Vec ps = p;
          ps[i] += d;
          return fn(ps);
        },
        step));
  return r;
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }
inline std::vector<double> to_std(const Mat& m) {
  std::vector<double> r;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
  return r;
}
template <int R>
std::vector<double> to_std(const Tensor<R>& t) { return t.flat(); }

inline constexpr double kXStep = 1e-3;  // x finite-difference step
inline constexpr double kYStep = 1e-3;  // relative y finite-difference step

// ---------------------------------------------------------------------------
// Sample generator: std::mt19937_64 (fixed by the C++ standard), uniform
// doubles from the top 53 bits, normals by Box-Muller (cosine branch).

class SampleRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit SampleRng(std::uint64_t seed) : eng_(seed) {}
  // independent stream for one trial of one suite
  static SampleRng for_trial(std::uint64_t seed, std::uint64_t trial, std::uint64_t salt) {
    return SampleRng(seed + kGolden * (trial + 1) + salt);
  }

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// FNV-1a of a suite name, used as a per-suite salt.
inline std::uint64_t name_salt(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// x uniform in 0.8 times the validity box.
inline Vec sample_point(SampleRng& rng, const ManifoldSpec& s) {
  Vec x(s.dim);
  const double w = 0.8 * s.box();
  for (int i = 0; i < s.dim; ++i) x[i] = rng.uniform(-w, w);
  return x;
}

// Uniform direction on the unit a-sphere scaled by a log-uniform magnitude
// in [0.1, 10]; resampled while q/|y|_a < q_min.
inline Vec sample_vector(SampleRng& rng, const PointFrame& fr, double q_min = 1e-6, bool log_scale = true) {
  const int n = fr.dim;
  Eigen::LLT<Mat> llt(fr.a);
  Mat U = llt.matrixU();  // a = U^T U
  for (;;) {
    Vec z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    const double zn = z.norm();
    if (zn < 1e-12) continue;
    Vec y = U.triangularView<Eigen::Upper>().solve(z / zn);
    const double mag = log_scale ? std::exp(rng.uniform(std::log(0.1), std::log(10.0))) : 1.0;
    y *= mag;
    const double s2 = y.dot(fr.a * y);
    const double b = fr.b_low.dot(y);
    const double q = std::sqrt(std::max(0.0, s2 - b * b));
    if (q > q_min * std::sqrt(s2)) return y;
  }
}

}  // namespace finsler
