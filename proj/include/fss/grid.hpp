#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fss/error.hpp"

namespace fss {

using Point = std::array<double, 2>;

/// Open interval (dimension 1) or axis-aligned open rectangle (dimension 2).
struct Box {
  int dimension = 1;
  Point lo{0.0, 0.0};
  Point hi{1.0, 1.0};

  static Box interval(double a, double b) { return Box{1, {a, 0.0}, {b, 0.0}}; }
  static Box rectangle(Point lo, Point hi) { return Box{2, lo, hi}; }

  double measure() const {
    double v = 1.0;
    for (int d = 0; d < dimension; ++d) v *= hi[d] - lo[d];
    return v;
  }
  bool operator==(const Box&) const = default;
};

/// Fractional order s and integrability exponent p, with the derived
/// critical exponent p_star = Np/(N - sp) (infinite when sp >= N).
class FracParams {
public:
  FracParams(double s, double p, int dimension) : s_(s), p_(p), dimension_(dimension) {
    detail::require(s > 0.0 && s < 1.0, "params.s must lie in (0,1)");
    detail::require(p > 1.0 && std::isfinite(p), "params.p must lie in (1,inf)");
    detail::require(dimension == 1 || dimension == 2, "dimension must be 1 or 2");
  }

  double s() const noexcept { return s_; }
  double p() const noexcept { return p_; }
  int dimension() const noexcept { return dimension_; }
  double sp() const noexcept { return s_ * p_; }
  /// Exponent N + sp of the Gagliardo kernel.
  double kernel_exponent() const noexcept { return dimension_ + sp(); }
  bool subcritical() const noexcept { return sp() < dimension_; }
  double p_star() const noexcept {
    if (!subcritical()) return std::numeric_limits<double>::infinity();
    return dimension_ * p_ / (dimension_ - sp());
  }

private:
  double s_;
  double p_;
  int dimension_;
};

/// Uniform Cartesian grid over a box plus a zero-valued exterior collar.
/// Interior nodes are lattice points strictly inside the box; collar nodes are
/// the remaining lattice points of the enlarged box [lo - c, hi + c].
/// Both lists are sorted lexicographically (x first, then y).
struct Grid {
  Box box;
  double h = 0.0;
  double collar_width = 0.0;
  std::vector<Point> interior;
  std::vector<Point> collar;
  /// Interior lattice extent per axis (ny = 1 in 1D).
  std::array<std::size_t, 2> shape{0, 1};

  int dimension() const noexcept { return box.dimension; }
  std::size_t size() const noexcept { return interior.size(); }
  /// Cell measure h^N shared by every node.
  double cell_measure() const noexcept { return dimension() == 1 ? h : h * h; }
  /// Measure of the discrete domain, |Omega_h| = M h^N.
  double discrete_measure() const noexcept { return static_cast<double>(size()) * cell_measure(); }

  Box collar_box() const {
    Box b = box;
    for (int d = 0; d < dimension(); ++d) {
      b.lo[d] -= collar_width;
      b.hi[d] += collar_width;
    }
    return b;
  }

  /// Distance from interior node i to the boundary of the collar box.
  double collar_distance(std::size_t i) const {
    Box cb = collar_box();
    double r = std::numeric_limits<double>::infinity();
    for (int d = 0; d < dimension(); ++d) {
      r = std::min(r, interior[i][d] - cb.lo[d]);
      r = std::min(r, cb.hi[d] - interior[i][d]);
    }
    return r;
  }

  /// Distance from interior node i to the boundary of the domain box.
  double boundary_distance(std::size_t i) const {
    double r = std::numeric_limits<double>::infinity();
    for (int d = 0; d < dimension(); ++d) {
      r = std::min(r, interior[i][d] - box.lo[d]);
      r = std::min(r, box.hi[d] - interior[i][d]);
    }
    return r;
  }

  bool same_shape(const Grid& other) const {
    return box == other.box && h == other.h && shape == other.shape && size() == other.size();
  }
};

namespace detail {

// Lattice indices k with lo_ext <= lo + k h <= hi_ext (up to a relative slack).
inline std::vector<double> lattice_axis(double lo, double lo_ext, double hi_ext, double h) {
  double slack = 1e-12 * std::max({1.0, std::abs(lo_ext), std::abs(hi_ext)});
  auto kmin = static_cast<long long>(std::ceil((lo_ext - lo - slack) / h));
  auto kmax = static_cast<long long>(std::floor((hi_ext - lo + slack) / h));
  std::vector<double> xs;
  for (long long k = kmin; k <= kmax; ++k) xs.push_back(lo + static_cast<double>(k) * h);
  return xs;
}

inline bool strictly_inside(double x, double lo, double hi, double h) {
  double slack = 1e-9 * h;
  return x > lo + slack && x < hi - slack;
}

} // namespace detail

/// Builds the interior/collar node sets for `box` with spacing `h`.
inline Grid build_grid(const Box& box, double h, double collar_width) {
  detail::require(box.dimension == 1 || box.dimension == 2, "grid.box: dimension must be 1 or 2");
  for (int d = 0; d < box.dimension; ++d)
    detail::require(box.hi[d] > box.lo[d], "grid.box: empty box");
  detail::require(h > 0.0 && std::isfinite(h), "grid.h must be positive");
  detail::require(collar_width > 0.0 && std::isfinite(collar_width), "grid.collar_width must be positive");

  Grid g;
  g.box = box;
  g.h = h;
  g.collar_width = collar_width;

  std::array<std::vector<double>, 2> axes;
  for (int d = 0; d < 2; ++d) {
    if (d < box.dimension)
      axes[d] = detail::lattice_axis(box.lo[d], box.lo[d] - collar_width, box.hi[d] + collar_width, h);
    else
      axes[d] = {0.0};
  }

  std::array<std::size_t, 2> counts{0, box.dimension == 2 ? 0u : 1u};
  for (int d = 0; d < box.dimension; ++d)
    for (double x : axes[d])
      if (detail::strictly_inside(x, box.lo[d], box.hi[d], h)) ++counts[d];

  // Nested loops over (x, y) already produce lexicographic order.
  for (double x : axes[0]) {
    for (double y : axes[1]) {
      Point pt{x, y};
      bool inside = detail::strictly_inside(x, box.lo[0], box.hi[0], h);
      if (box.dimension == 2) inside = inside && detail::strictly_inside(y, box.lo[1], box.hi[1], h);
      (inside ? g.interior : g.collar).push_back(pt);
    }
  }
  if (g.interior.empty()) throw InvalidArgument("degenerate grid: no interior node fits (h too large)");
  detail::require(collar_width >= h * (1.0 - 1e-12), "grid.collar_width must be >= h");
  g.shape = counts;
  return g;
}

/// Hölder conjugate r' = r/(r-1), with 1' = inf and inf' = 1.
inline double holder_conjugate(double r) {
  if (std::isinf(r)) return 1.0;
  if (r == 1.0) return std::numeric_limits<double>::infinity();
  return r / (r - 1.0);
}

/// Minimal integrability exponent r_alpha of the weight that guarantees a
/// bounded approximating sequence: 1 for alpha = 1, (p_star/(1-alpha))' when
/// sp < N, and 1/alpha when sp >= N.
inline double r_alpha(double alpha, const FracParams& params) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("r_alpha: alpha must lie in (0,1]");
  if (alpha == 1.0) return 1.0;
  if (params.subcritical()) return holder_conjugate(params.p_star() / (1.0 - alpha));
  return 1.0 / alpha;
}

} // namespace fss
