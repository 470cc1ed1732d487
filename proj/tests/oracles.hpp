#pragma once

// Reference computations that avoid the library's own code paths.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fss/grid.hpp"

namespace oracle {

/// Root of an increasing function on [lo, hi] by plain bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  if (!(f(lo) < 0.0 && f(hi) > 0.0)) throw std::runtime_error("bisect: root not bracketed");
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= A[i][k] * x[k];
    x[i] = acc / A[i][i];
  }
  return x;
}

inline double weight(const fss::Point& x, const fss::Point& y, int dim, double h, double s, double p) {
  double r = dim == 1 ? std::abs(x[0] - y[0]) : std::hypot(x[0] - y[0], x[1] - y[1]);
  double m = dim == 1 ? h : h * h;
  return m * m / std::pow(r, dim + s * p);
}

/// Exterior coefficient of interior node i: collar sum plus m * tail.
inline double exterior(const fss::Grid& g, std::size_t i, double s, double p, bool tail) {
  const int dim = g.dimension();
  double acc = 0.0;
  for (const auto& y : g.collar) acc += weight(g.interior[i], y, dim, g.h, s, p);
  if (tail) {
    double R = std::numeric_limits<double>::infinity();
    for (int d = 0; d < dim; ++d) {
      R = std::min(R, g.interior[i][d] - (g.box.lo[d] - g.collar_width));
      R = std::min(R, g.box.hi[d] + g.collar_width - g.interior[i][d]);
    }
    double sigma = dim == 1 ? 2.0 : 2.0 * std::numbers::pi;
    acc += g.cell_measure() * sigma * std::pow(R, -s * p) / (s * p);
  }
  return acc;
}

/// Matrix of the p = 2 operator: [v]^2 = v^T B v and (-Delta)^s v = B v.
inline std::vector<std::vector<double>> laplacian_matrix(const fss::Grid& g, double s, bool tail) {
  const std::size_t M = g.size();
  std::vector<std::vector<double>> B(M, std::vector<double>(M, 0.0));
  for (std::size_t i = 0; i < M; ++i) {
    double diag = 2.0 * exterior(g, i, s, 2.0, tail);
    for (std::size_t j = 0; j < M; ++j) {
      if (j == i) continue;
      double w = weight(g.interior[i], g.interior[j], g.dimension(), g.h, s, 2.0);
      B[i][j] = -2.0 * w;
      diag += 2.0 * w;
    }
    B[i][i] = diag;
  }
  return B;
}

/// Brute-force seminorm over all ordered pairs of interior and collar nodes
/// (collar values zero), plus the tail term.
inline double seminorm_p(const fss::Grid& g, const std::vector<double>& u, double s, double p, bool tail) {
  const int dim = g.dimension();
  const std::size_t M = g.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < M; ++j)
      if (i != j) acc += weight(g.interior[i], g.interior[j], dim, g.h, s, p) * std::pow(std::abs(u[i] - u[j]), p);
    // Interior-collar pairs appear twice among ordered pairs.
    acc += 2.0 * exterior(g, i, s, p, tail) * std::pow(std::abs(u[i]), p);
  }
  return acc;
}

/// The single-interior-node system on (0,2) with h = 1 and collar width 1:
/// [u]^p = 2 e |u|^p with e the exterior coefficient of the node at x = 1.
struct ScalarSystem {
  double s, p, e;
  ScalarSystem(double s_, double p_) : s(s_), p(p_) {
    // Collar nodes at 0, 2 (distance 1) and -1, 3 (distance 2), tail beyond radius 2.
    e = 2.0 + std::pow(2.0, -s * p) + 2.0 * std::pow(2.0, -s * p) / (s * p);
  }
  double op(double u) const { return 2.0 * e * std::pow(u, p - 1.0); }

  /// u_n: 2e u^{p-1} = min(w, n) (u + 1/n)^-alpha.
  double level(double w, double n, double alpha) const {
    double wn = std::min(w, n);
    return bisect([&](double u) { return op(u) - wn * std::pow(u + 1.0 / n, -alpha); }, 1e-300, 1e6);
  }
  /// u_alpha: 2e u^{p-1} = w u^-alpha.
  double limit(double w, double alpha) const {
    return bisect([&](double u) { return op(u) - w * std::pow(u, -alpha); }, 1e-300, 1e6);
  }
  double lambda(double w, double alpha) const {
    double u = limit(w, alpha);
    return std::pow(2.0 * e * std::pow(u, p), (1.0 - alpha - p) / (1.0 - alpha));
  }
  /// mu: the extremal is V = 1 (log V = 0 at the only node), so mu = [1]^p.
  double mu() const { return 2.0 * e; }
};

} // namespace oracle
