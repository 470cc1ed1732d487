#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fss/error.hpp"
#include "fss/kernel.hpp"

namespace fss {

/// Nodal values on the interior nodes of a grid; collar values are 0.
using Field = std::vector<double>;

/// Nonnegative weight omega on the interior nodes, with its L^1 and L^r norms.
class WeightField {
public:
  WeightField(std::vector<double> values, double cell_measure, double r)
      : values_(std::move(values)), m_(cell_measure), r_(r) {
    detail::require(cell_measure > 0.0, "weight: cell measure must be positive");
    detail::require(r >= 1.0, "weight.r must be >= 1");
    bool nonzero = false;
    for (double w : values_) {
      detail::require(std::isfinite(w) && w >= 0.0, "weight: values must be finite and nonnegative");
      nonzero = nonzero || w > 0.0;
    }
    detail::require(nonzero, "weight: omega must not vanish identically");
    norm1_ = 0.0;
    for (double w : values_) norm1_ += m_ * w;
    norm_r_ = norm(r_);
  }

  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }
  double cell_measure() const noexcept { return m_; }
  double r() const noexcept { return r_; }
  double norm1() const noexcept { return norm1_; }
  double norm_r() const noexcept { return norm_r_; }
  double max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

  /// Discrete L^q norm of omega for any q >= 1 (q = inf gives the max).
  double norm(double q) const {
    if (std::isinf(q)) return max();
    double acc = 0.0;
    for (double w : values_) acc += m_ * std::pow(w, q);
    return std::pow(acc, 1.0 / q);
  }

  /// Same weight with a different integrability exponent.
  WeightField with_r(double r) const { return WeightField(values_, m_, r); }

private:
  std::vector<double> values_;
  double m_;
  double r_;
  double norm1_ = 0.0;
  double norm_r_ = 0.0;
};

namespace detail {

/// |t|^{q-2} t, extended by 0 at t = 0.
inline double signed_power(double t, double q) {
  if (t == 0.0) return 0.0;
  if (q == 2.0) return t;
  return std::copysign(std::pow(std::abs(t), q - 1.0), t);
}

inline double abs_power(double t, double p) {
  if (p == 2.0) return t * t;
  return std::pow(std::abs(t), p);
}

inline void check_size(std::size_t n, const Kernel& kernel, const char* what) {
  if (n != kernel.size())
    throw InvalidArgument(std::string(what) + ": field does not match the kernel's grid (size " +
                          std::to_string(n) + " vs " + std::to_string(kernel.size()) + ")");
}

} // namespace detail

/// Discrete Gagliardo seminorm to the p-th power:
/// [u]^p = 2 sum_{i<j} w_ij |u_i - u_j|^p + 2 sum_i (collar_i + m tau_i) |u_i|^p.
inline double seminorm_p(std::span<const double> u, const Kernel& kernel) {
  detail::check_size(u.size(), kernel, "seminorm_p");
  const double p = kernel.params().p();
  const std::size_t M = u.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    auto row = kernel.row(i);
    double local = 0.0;
    for (std::size_t j = i + 1; j < M; ++j) local += row[j] * detail::abs_power(u[i] - u[j], p);
    acc += local + kernel.exterior_coefficient(i) * detail::abs_power(u[i], p);
  }
  return 2.0 * acc;
}

/// [u]_{s,p}, the p-th root of seminorm_p.
inline double seminorm(std::span<const double> u, const Kernel& kernel) {
  return std::pow(seminorm_p(u, kernel), 1.0 / kernel.params().p());
}

/// Duality pairing <(-Delta_p)^s u, v>.
inline double pairing(std::span<const double> u, std::span<const double> v, const Kernel& kernel) {
  detail::check_size(u.size(), kernel, "pairing");
  detail::check_size(v.size(), kernel, "pairing");
  const double p = kernel.params().p();
  const std::size_t M = u.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    auto row = kernel.row(i);
    double local = 0.0;
    for (std::size_t j = i + 1; j < M; ++j)
      local += row[j] * detail::signed_power(u[i] - u[j], p) * (v[i] - v[j]);
    acc += local + kernel.exterior_coefficient(i) * detail::signed_power(u[i], p) * v[i];
  }
  return 2.0 * acc;
}

/// Nodal gradient of (1/p)[u]^p, i.e. the discrete operator: g . v = pairing(u, v).
inline Field apply_operator(std::span<const double> u, const Kernel& kernel) {
  detail::check_size(u.size(), kernel, "apply_operator");
  const double p = kernel.params().p();
  const std::size_t M = u.size();
  Field g(M, 0.0);
  parallel_for(M, [&](std::size_t i) {
    auto row = kernel.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < M; ++j)
      if (j != i) acc += row[j] * detail::signed_power(u[i] - u[j], p);
    g[i] = 2.0 * (acc + kernel.exterior_coefficient(i) * detail::signed_power(u[i], p));
  });
  return g;
}

/// Weighted power mean ((1/|omega|_1) sum m omega |v|^q)^(1/q), q > 0.
/// Evaluated through log1p/expm1 when v has no zero on the support of omega,
/// which keeps small q accurate.
inline double weighted_qmean(std::span<const double> v, const WeightField& omega, double q) {
  if (!(q > 0.0)) throw InvalidArgument("weighted_qmean: q must be positive");
  detail::require(v.size() == omega.size(), "weighted_qmean: size mismatch");
  const double m = omega.cell_measure();
  bool zero_on_support = false;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (omega[i] > 0.0 && v[i] == 0.0) zero_on_support = true;
  if (zero_on_support) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (omega[i] > 0.0) acc += m * omega[i] * std::pow(std::abs(v[i]), q);
    return std::pow(acc / omega.norm1(), 1.0 / q);
  }
  // Factor out the geometric scale so expm1 sees moderate arguments.
  double log_scale = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (omega[i] > 0.0) log_scale += m * omega[i] * std::log(std::abs(v[i]));
  log_scale /= omega.norm1();
  double excess = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (omega[i] > 0.0) excess += m * omega[i] * std::expm1(q * (std::log(std::abs(v[i])) - log_scale));
  excess /= omega.norm1();
  return std::exp(log_scale + std::log1p(excess) / q);
}

/// sum m omega log|v|, or -inf when v vanishes somewhere on the support of omega.
inline double log_functional(std::span<const double> v, const WeightField& omega) {
  detail::require(v.size() == omega.size(), "log_functional: size mismatch");
  const double m = omega.cell_measure();
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (omega[i] == 0.0) continue;
    if (v[i] == 0.0) return -std::numeric_limits<double>::infinity();
    acc += m * omega[i] * std::log(std::abs(v[i]));
  }
  return acc;
}

/// Discrete L^r norm (sum m |u_i|^r)^(1/r); r = inf gives max |u_i|.
inline double norm_r(std::span<const double> u, double cell_measure, double r) {
  if (!(r >= 1.0)) throw InvalidArgument("norm_r: r must be >= 1");
  if (std::isinf(r)) {
    double mx = 0.0;
    for (double x : u) mx = std::max(mx, std::abs(x));
    return mx;
  }
  double acc = 0.0;
  for (double x : u) acc += cell_measure * std::pow(std::abs(x), r);
  return std::pow(acc, 1.0 / r);
}

inline double norm_r(const WeightField& omega, double r) {
  if (!(r >= 1.0)) throw InvalidArgument("norm_r: r must be >= 1");
  return omega.norm(r);
}

inline double max_abs(std::span<const double> u) { return norm_r(u, 1.0, std::numeric_limits<double>::infinity()); }

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "max_abs_diff: size mismatch");
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
  return mx;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// sum_i m w_i v_i, the discrete integral of a product.
inline double weighted_sum(std::span<const double> w, std::span<const double> v, double cell_measure) {
  return cell_measure * dot(w, v);
}

} // namespace fss
