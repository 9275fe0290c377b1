#pragma once
// Shared manifold fixtures for the unit tests.

#include "finsler/manifold.hpp"
#include "finsler/numerics.hpp"

#include <vector>

namespace fx {

using namespace finsler;

inline ManifoldSpec flat(int n, double g, std::vector<double> axis = {}) {
  if (axis.empty()) {
    axis.assign(n, 0.0);
    axis[n - 1] = 1.0;
  }
  return make_spec(n, g, MetricFamily::flat(n), BField::constant_axis(axis));
}

// diagonal-exp metric, b the normalized gradient of a quadratic scalar
inline ManifoldSpec curved(int n, double g, DerivativeMode mode = DerivativeMode::Analytic) {
  std::vector<double> lin(n * n), quad(n * n, 0.0), bl(n), bq(n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) lin[i * n + j] = 0.15 * std::sin(1.0 + 3 * i + 2 * j);
    quad[i * n + i] = 0.2 * std::cos(1.0 + i);
    bl[i] = i == n - 1 ? 1.0 : 0.3 * (i + 1) / n;
    for (int j = 0; j < n; ++j) bq[i * n + j] = 0.25 * std::cos(2.0 + i + 2 * j);
  }
  return make_spec(n, g, MetricFamily::diagonal_exp(n, lin, quad), BField::gradient(bl, bq), mode);
}

// polynomial perturbation with a raw contravariant vector field
inline ManifoldSpec poly(int n, double g, double eps = 0.05) {
  std::vector<double> c(n, 0.0), d(n * n, 0.0);
  c[n - 1] = 2.0;
  c[0] = 0.3;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d[i * n + j] = 0.2 * std::sin(0.5 + i - 2 * j);
  return make_spec(n, g, MetricFamily::polynomial(n, eps), BField::raw_vector(c, d));
}

inline ManifoldSpec sphere(int n, double g, double c = 1.0) {
  std::vector<double> bl(n, 0.1), bq(n * n, 0.0);
  bl[n - 1] = 1.0;
  for (int i = 0; i < n; ++i) bq[i * n + i] = 0.3;
  return make_spec(n, g, MetricFamily::constant_curvature(n, c), BField::gradient(bl, bq));
}

// curved metric with a parallel axis: a_NN = 1 and nothing depends on x^N
inline ManifoldSpec parallel_axis(int n, double g) {
  std::vector<double> lin(n * n, 0.0), quad(n * n, 0.0);
  for (int i = 0; i + 1 < n; ++i)
    for (int j = 0; j + 1 < n; ++j) {
      lin[i * n + j] = 0.2 * std::sin(1.0 + 2 * i + j);
      quad[i * n + j] = 0.3 * std::cos(0.5 + i + j);
    }
  std::vector<double> axis(n, 0.0);
  axis[n - 1] = 1.0;
  return make_spec(n, g, MetricFamily::diagonal_exp(n, lin, quad), BField::constant_axis(axis));
}

inline Vec vec(std::initializer_list<double> v) {
  Vec r(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

}  // namespace fx
