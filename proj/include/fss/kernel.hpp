#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "fss/error.hpp"
#include "fss/grid.hpp"
#include "fss/parallel.hpp"

namespace fss {

/// Discrete Gagliardo kernel on a Grid.
///
/// Pair weights are w_ij = m^2 / |x_i - x_j|^(N+sp) for distinct nodes. Since
/// every field vanishes on the collar, an interior-collar pair only ever
/// contributes w_ij |u_i|^p, so those weights are stored aggregated per
/// interior node (`collar_weight(i)`). The optional tail tau_i bounds the
/// kernel mass outside the collar box by the ball of radius R_i inscribed in it.
class Kernel {
public:
  Kernel(Grid grid, FracParams params, bool tail_enabled)
      : grid_(std::move(grid)), params_(params), tail_enabled_(tail_enabled) {
    detail::require(params_.dimension() == grid_.dimension(), "kernel: params/grid dimension mismatch");
    assemble();
  }

  /// Kernel with explicitly supplied weights, for small model systems.
  /// `interior_weights` is a dense symmetric M x M table with zero diagonal.
  static Kernel from_weights(Grid grid, FracParams params, std::vector<double> interior_weights,
                             std::vector<double> collar_weights, std::vector<double> tail) {
    Kernel k(std::move(grid), params);
    std::size_t M = k.grid_.size();
    detail::require(interior_weights.size() == M * M, "kernel: weight table must be M x M");
    detail::require(collar_weights.size() == M && tail.size() == M, "kernel: per-node vectors must have M entries");
    for (std::size_t i = 0; i < M; ++i) {
      detail::require(interior_weights[i * M + i] == 0.0, "kernel: self pairs are excluded");
      for (std::size_t j = 0; j < M; ++j)
        detail::require(interior_weights[i * M + j] == interior_weights[j * M + i], "kernel: weights must be symmetric");
    }
    k.weights_ = std::move(interior_weights);
    k.collar_ = std::move(collar_weights);
    k.tail_ = std::move(tail);
    k.tail_enabled_ = false;
    for (double t : k.tail_) k.tail_enabled_ = k.tail_enabled_ || t != 0.0;
    k.finish();
    return k;
  }

  const Grid& grid() const noexcept { return grid_; }
  const FracParams& params() const noexcept { return params_; }
  bool tail_enabled() const noexcept { return tail_enabled_; }
  std::size_t size() const noexcept { return grid_.size(); }
  double cell_measure() const noexcept { return grid_.cell_measure(); }

  /// Interior-interior weight (zero on the diagonal).
  double weight(std::size_t i, std::size_t j) const noexcept { return weights_[i * size() + j]; }
  std::span<const double> row(std::size_t i) const noexcept { return {weights_.data() + i * size(), size()}; }

  /// Weight between two nodes in global numbering: interior nodes first,
  /// then collar nodes. Evaluated from the closed form.
  double pair_weight(std::size_t a, std::size_t b) const {
    detail::require(a != b, "kernel: self pairs are excluded");
    return weight_formula(global_point(a), global_point(b));
  }

  std::size_t node_count() const noexcept { return grid_.interior.size() + grid_.collar.size(); }

  /// Sum of weights from interior node i to all collar nodes.
  double collar_weight(std::size_t i) const noexcept { return collar_[i]; }
  /// Tail integral tau_i (zero when disabled).
  double tail(std::size_t i) const noexcept { return tail_[i]; }
  /// Coefficient of |u_i|^p coming from the exterior: collar weight + m tau_i.
  double exterior_coefficient(std::size_t i) const noexcept { return exterior_[i]; }
  /// Sum over all pairs touching node i, plus the tail term.
  double total_weight(std::size_t i) const noexcept { return total_[i]; }

  // (x - y)^2 == (y - x)^2 in floating point, so w_ij == w_ji bitwise.
  double weight_formula(const Point& x, const Point& y) const {
    double r2 = 0.0;
    for (int d = 0; d < grid_.dimension(); ++d) r2 += (x[d] - y[d]) * (x[d] - y[d]);
    double m = cell_measure();
    return m * m / std::pow(std::sqrt(r2), params_.kernel_exponent());
  }

  /// Closed-form exterior integral sigma_{N-1} R^{-sp} / sp.
  static double tail_integral(double radius, const FracParams& params) {
    double sigma = params.dimension() == 1 ? 2.0 : 2.0 * std::numbers::pi;
    return sigma * std::pow(radius, -params.sp()) / params.sp();
  }

private:
  Kernel(Grid grid, FracParams params) : grid_(std::move(grid)), params_(params), tail_enabled_(false) {}

  const Point& global_point(std::size_t a) const {
    if (a < grid_.interior.size()) return grid_.interior[a];
    detail::require(a < node_count(), "kernel: node index out of range");
    return grid_.collar[a - grid_.interior.size()];
  }

  void assemble() {
    std::size_t M = grid_.size();
    weights_.assign(M * M, 0.0);
    collar_.assign(M, 0.0);
    tail_.assign(M, 0.0);
    parallel_for(M, [&](std::size_t i) {
      for (std::size_t j = 0; j < M; ++j)
        if (j != i) weights_[i * M + j] = weight_formula(grid_.interior[i], grid_.interior[j]);
      double acc = 0.0;
      for (const Point& y : grid_.collar) acc += weight_formula(grid_.interior[i], y);
      collar_[i] = acc;
      if (tail_enabled_) tail_[i] = tail_integral(grid_.collar_distance(i), params_);
    });
    finish();
  }

  void finish() {
    std::size_t M = grid_.size();
    double m = cell_measure();
    exterior_.assign(M, 0.0);
    total_.assign(M, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
      exterior_[i] = collar_[i] + m * tail_[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < M; ++j) acc += weights_[i * M + j];
      total_[i] = acc + exterior_[i];
    }
  }

  Grid grid_;
  FracParams params_;
  bool tail_enabled_;
  std::vector<double> weights_;
  std::vector<double> collar_;
  std::vector<double> tail_;
  std::vector<double> exterior_;
  std::vector<double> total_;
};

/// Assembles the kernel for `grid`; see Kernel.
inline Kernel build_kernel(const Grid& grid, const FracParams& params, bool tail_enabled) {
  return Kernel(grid, params, tail_enabled);
}

} // namespace fss
