#pragma once
// JSON manifold configuration. Unknown keys are rejected.
//
// {
//   "dim": 3,
//   "g": 1.0,
//   "metric_family": {"tag": "diagonal-exp", "params": {"linear": [[...]], "quadratic": [[...]]}},
//   "b_family": {"tag": "gradient-of-scalar", "params": {"linear": [...], "quadratic": [[...]]}},
//   "derivative_mode": "analytic",
//   "fd_step": 1e-5
// }

#include "finsler/manifold.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace finsler {

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw SpecError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw SpecError(where + ": unknown key '" + it.key() + "'");
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw SpecError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SpecError(where + ": expected a number");
  return j.get<double>();
}

inline std::vector<double> get_vector(const json& j, int n, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw SpecError(where + ": expected an array of length " + std::to_string(n));
  std::vector<double> r;
  for (const auto& x : j) r.push_back(get_number(x, where));
  return r;
}

// row-major n*n
inline std::vector<double> get_matrix(const json& j, int n, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw SpecError(where + ": expected " + std::to_string(n) + " rows");
  std::vector<double> r;
  for (const auto& row : j) {
    auto v = get_vector(row, n, where);
    r.insert(r.end(), v.begin(), v.end());
  }
  return r;
}

inline MetricFamily parse_metric(const json& j, int n) {
  check_keys(j, {"tag", "params"}, "metric_family");
  const std::string tag = require(j, "tag", "metric_family").get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  if (tag == "flat") {
    check_keys(params, {"matrix"}, "metric_family.params");
    MetricFamily m = MetricFamily::flat(n);
    if (params.contains("matrix")) m.matrix = get_matrix(params.at("matrix"), n, "metric_family.params.matrix");
    return m;
  }
  if (tag == "diagonal-exp") {
    check_keys(params, {"linear", "quadratic"}, "metric_family.params");
    auto lin = get_matrix(require(params, "linear", "metric_family.params"), n, "metric_family.params.linear");
    std::vector<double> quad;
    if (params.contains("quadratic")) quad = get_matrix(params.at("quadratic"), n, "metric_family.params.quadratic");
    return MetricFamily::diagonal_exp(n, lin, quad);
  }
  if (tag == "polynomial-perturbation") {
    check_keys(params, {"epsilon"}, "metric_family.params");
    return MetricFamily::polynomial(n, get_number(require(params, "epsilon", "metric_family.params"), "epsilon"));
  }
  if (tag == "constant-curvature") {
    check_keys(params, {"curvature"}, "metric_family.params");
    return MetricFamily::constant_curvature(
        n, get_number(require(params, "curvature", "metric_family.params"), "curvature"));
  }
  throw SpecError("metric_family: unknown tag '" + tag + "'");
}

inline BField parse_b(const json& j, int n) {
  check_keys(j, {"tag", "params"}, "b_family");
  const std::string tag = require(j, "tag", "b_family").get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  if (tag == "constant-axis") {
    check_keys(params, {"axis"}, "b_family.params");
    return BField::constant_axis(get_vector(require(params, "axis", "b_family.params"), n, "b_family.params.axis"));
  }
  if (tag == "gradient-of-scalar") {
    check_keys(params, {"linear", "quadratic"}, "b_family.params");
    auto lin = get_vector(require(params, "linear", "b_family.params"), n, "b_family.params.linear");
    std::vector<double> quad;
    if (params.contains("quadratic")) quad = get_matrix(params.at("quadratic"), n, "b_family.params.quadratic");
    return BField::gradient(lin, quad);
  }
  if (tag == "raw-vector") {
    check_keys(params, {"vector", "linear"}, "b_family.params");
    auto c = get_vector(require(params, "vector", "b_family.params"), n, "b_family.params.vector");
    std::vector<double> lin;
    if (params.contains("linear")) lin = get_matrix(params.at("linear"), n, "b_family.params.linear");
    return BField::raw_vector(c, lin);
  }
  throw SpecError("b_family: unknown tag '" + tag + "'");
}

}  // namespace detail

inline ManifoldSpec load_spec_text(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError(std::string("config parse failure: ") + e.what());
  }
  try {
    detail::check_keys(j, {"dim", "g", "metric_family", "b_family", "derivative_mode", "fd_step"}, "config");
    const json& jd = detail::require(j, "dim", "config");
    if (!jd.is_number_integer()) throw SpecError("config: dim must be an integer");
    const int dim = jd.get<int>();
    if (dim < 2) throw SpecError("dim must be at least 2");
    if (dim > kJetMaxVars) throw SpecError("dim too large");
    const double g = detail::get_number(detail::require(j, "g", "config"), "g");
    MetricFamily m = detail::parse_metric(detail::require(j, "metric_family", "config"), dim);
    BField b = detail::parse_b(detail::require(j, "b_family", "config"), dim);
    DerivativeMode mode = DerivativeMode::Analytic;
    if (j.contains("derivative_mode")) {
      const std::string s = j.at("derivative_mode").get<std::string>();
      if (s == "analytic") mode = DerivativeMode::Analytic;
      else if (s == "finite-difference") mode = DerivativeMode::FiniteDifference;
      else throw SpecError("derivative_mode: unknown value '" + s + "'");
    }
    double step = 1e-5;
    if (j.contains("fd_step")) step = detail::get_number(j.at("fd_step"), "fd_step");
    return make_spec(dim, g, m, b, mode, step);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("config type error: ") + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ManifoldSpec load_spec(const std::string& path) { return load_spec_text(read_file(path)); }

}  // namespace finsler
