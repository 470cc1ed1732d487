#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fss/error.hpp"
#include "fss/kernel.hpp"
#include "fss/nonlocal_ops.hpp"
#include "fss/parallel.hpp"
#include "fss/random_fields.hpp"

namespace fss {

struct SolveOptions {
  /// Stop once the max-norm of the energy gradient is below this.
  double gradient_tol = 1e-10;
  int max_iterations = 10000;
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  /// Initial guess; empty means the zero field.
  Field warm_start;

  void validate() const {
    detail::require(gradient_tol > 0.0, "solver.gradient_tol must be positive");
    detail::require(max_iterations >= 1, "solver.max_iterations must be >= 1");
    detail::require(backtrack > 0.0 && backtrack < 1.0, "solver.backtrack must lie in (0,1)");
    detail::require(sufficient_decrease > 0.0 && sufficient_decrease < 0.5,
                    "solver.sufficient_decrease must lie in (0,0.5)");
  }

  SolveOptions warm(Field init) const {
    SolveOptions o = *this;
    o.warm_start = std::move(init);
    return o;
  }
};

/// Separable part sum_i P_i(v_i) of an energy (1/p)[v]^p + sum_i P_i(v_i).
/// Every P_i is convex, so the whole energy is strictly convex.
///
///   linear: P_i(t) = -c_i t
///   level:  P_i(t) = -c_i G_n(t),   G_n(t) = ((t + 1/n)^(1-a) - (1/n)^(1-a)) / (1-a)  for t >= 0
///                                   (log(1 + n t) when a = 1), extended linearly for t < 0
///   limit:  P_i(t) = -c_i G(t),     G(t) = t^(1-a) / (1-a)  (log t when a = 1), t > 0
class NodalPotential {
public:
  enum class Kind { linear, level, limit };

  static NodalPotential linear(std::vector<double> coeff) { return NodalPotential(Kind::linear, std::move(coeff), 0.0, 0.0); }

  static NodalPotential level(std::vector<double> coeff, double n, double alpha) {
    detail::require(n >= 1.0, "level potential: n must be >= 1");
    detail::require(alpha > 0.0, "level potential: alpha must be positive");
    return NodalPotential(Kind::level, std::move(coeff), 1.0 / n, alpha);
  }

  static NodalPotential limit(std::vector<double> coeff, double alpha) {
    detail::require(alpha > 0.0, "limit potential: alpha must be positive");
    return NodalPotential(Kind::limit, std::move(coeff), 0.0, alpha);
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return coeff_.size(); }
  double coefficient(std::size_t i) const noexcept { return coeff_[i]; }
  double alpha() const noexcept { return alpha_; }
  double shift() const noexcept { return shift_; }

  bool feasible(std::size_t i, double t) const noexcept {
    if (kind_ != Kind::limit || coeff_[i] == 0.0) return std::isfinite(t);
    return t > 0.0 && std::isfinite(t);
  }

  double value(std::size_t i, double t) const {
    if (coeff_[i] == 0.0) return 0.0;
    return -coeff_[i] * (kind_ == Kind::linear ? t : G(t));
  }
  double slope(std::size_t i, double t) const {
    if (coeff_[i] == 0.0) return 0.0;
    return -coeff_[i] * (kind_ == Kind::linear ? 1.0 : dG(t));
  }
  double curvature(std::size_t i, double t) const {
    if (coeff_[i] == 0.0 || kind_ == Kind::linear) return 0.0;
    return -coeff_[i] * d2G(t);
  }

  double G(double t) const {
    const double a = shift_;
    if (kind_ == Kind::level) {
      if (t < 0.0) return t * std::pow(a, -alpha_);
      double l = std::log1p(t / a);
      if (alpha_ == 1.0) return l;
      double e = 1.0 - alpha_;
      return std::pow(a, e) * std::expm1(e * l) / e;
    }
    if (alpha_ == 1.0) return std::log(t);
    return std::pow(t, 1.0 - alpha_) / (1.0 - alpha_);
  }
  double dG(double t) const {
    if (kind_ == Kind::level && t < 0.0) return std::pow(shift_, -alpha_);
    return std::pow(t + shift_, -alpha_);
  }
  double d2G(double t) const {
    if (kind_ == Kind::level && t < 0.0) return 0.0;
    return -alpha_ * std::pow(t + shift_, -alpha_ - 1.0);
  }

private:
  NodalPotential(Kind kind, std::vector<double> coeff, double shift, double alpha)
      : kind_(kind), coeff_(std::move(coeff)), shift_(shift), alpha_(alpha) {
    for (double c : coeff_) detail::require(std::isfinite(c), "potential coefficients must be finite");
    if (kind_ != Kind::linear)
      for (double c : coeff_) detail::require(c >= 0.0, "potential coefficients must be nonnegative");
  }

  Kind kind_;
  std::vector<double> coeff_;
  double shift_;
  double alpha_;
};

struct SolveResult {
  Field u;
  int iterations = 0;
  /// Max-norm of the energy gradient at u.
  double gradient_norm = 0.0;
  /// Gradient max-norm after discounting pairs whose difference is at the
  /// rounding level (only nonzero for p < 2); this is what the tolerance tests.
  double residual_norm = 0.0;
  std::vector<double> energy_history;
  /// Largest rounding allowance used by the line search.
  double energy_tolerance = 0.0;
};

namespace detail {

// Evaluates the energy, its gradient and a curvature model in one pass over
// the pairs.
class EnergyModel {
public:
  EnergyModel(const Kernel& kernel, const NodalPotential& potential) : kernel_(kernel), pot_(potential) {
    detail::require(potential.size() == kernel.size(), "solver: potential does not match the grid");
  }

  std::size_t size() const noexcept { return kernel_.size(); }

  /// Energy at v (inf if v leaves the potential's domain); `scale` receives
  /// the sum of absolute term values, used to size rounding allowances.
  double energy(std::span<const double> v, double* scale = nullptr) const {
    const std::size_t M = size();
    for (std::size_t i = 0; i < M; ++i)
      if (!pot_.feasible(i, v[i])) return std::numeric_limits<double>::infinity();
    const double p = kernel_.params().p();
    std::vector<double> rows(M, 0.0), pots(M, 0.0), abs_pots(M, 0.0);
    parallel_for(M, [&](std::size_t i) {
      auto row = kernel_.row(i);
      double acc = 0.0;
      for (std::size_t j = i + 1; j < M; ++j) acc += row[j] * abs_power(v[i] - v[j], p);
      rows[i] = acc + kernel_.exterior_coefficient(i) * abs_power(v[i], p);
      pots[i] = pot_.value(i, v[i]);
      abs_pots[i] = std::abs(pots[i]);
    });
    double pair = 0.0, pot = 0.0, abs_pot = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      pair += rows[i];
      pot += pots[i];
      abs_pot += abs_pots[i];
    }
    double e = 2.0 * pair / p + pot;
    if (scale) *scale = 2.0 * pair / p + abs_pot;
    return e;
  }

  /// Gradient g, rounding floor of g, and the curvature matrix H.
  void linearize(std::span<const double> v, Field& g, Field& floor, Eigen::MatrixXd& H) const {
    const std::size_t M = size();
    const double p = kernel_.params().p();
    const double scale = std::max(max_abs(v), std::numeric_limits<double>::min());
    // Steps come from a dense solve, so their absolute error, and the
    // smallest difference the iteration can resolve, scale with max |v|.
    const double ulp = std::numeric_limits<double>::epsilon() * max_abs(v);
    g.assign(M, 0.0);
    floor.assign(M, 0.0);
    H.setZero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    parallel_for(M, [&](std::size_t i) {
      auto row = kernel_.row(i);
      double gi = 0.0, fi = 0.0, hii = 0.0;
      auto col = H.col(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < M; ++j) {
        if (j == i) continue;
        double d = v[i] - v[j];
        double phi, curv;
        pair_terms(d, p, scale, ulp, phi, curv, fi, row[j]);
        gi += row[j] * phi;
        col(static_cast<Eigen::Index>(j)) = -2.0 * row[j] * curv;
        hii += row[j] * curv;
      }
      double e = kernel_.exterior_coefficient(i);
      double phi, curv;
      pair_terms(v[i], p, scale, ulp, phi, curv, fi, e);
      gi += e * phi;
      hii += e * curv;
      g[i] = 2.0 * gi + pot_.slope(i, v[i]);
      floor[i] = 2.0 * fi;
      col(static_cast<Eigen::Index>(i)) = 2.0 * hii + pot_.curvature(i, v[i]);
    });
  }

  /// Hessian of the p = 2 energy (graph Laplacian pattern) plus potential curvature at v.
  Eigen::MatrixXd quadratic_model(std::span<const double> v) const {
    const std::size_t M = size();
    Eigen::MatrixXd H(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    for (std::size_t i = 0; i < M; ++i) {
      auto row = kernel_.row(i);
      double diag = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        if (j == i) continue;
        H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -2.0 * row[j];
        diag += row[j];
      }
      diag += kernel_.exterior_coefficient(i);
      H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 2.0 * diag + pot_.curvature(i, v[i]);
    }
    return H;
  }

  double residual(const Field& g, const Field& floor) const {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r = std::max(r, std::max(0.0, std::abs(g[i]) - floor[i]));
    return r;
  }

private:
  // phi = |d|^{p-2} d and the curvature weight for one pair. For p >= 2 the
  // weight is (p-1) max(|d|, delta)^{p-2}. For p < 2 the true weight blows up
  // at d = 0, so near-coincident pairs use the secant weight |d|^{p-2}, which
  // majorizes the pair energy and sends d to 0 instead of oscillating.
  static void pair_terms(double d, double p, double scale, double ulp, double& phi, double& curv, double& floor,
                         double weight) {
    double ad = std::abs(d);
    if (p == 2.0) {
      phi = d;
      curv = 1.0;
      return;
    }
    if (p > 2.0) {
      double pw = std::pow(std::max(ad, 1e-6 * scale), p - 2.0);
      phi = ad == 0.0 ? 0.0 : std::pow(ad, p - 2.0) * d;
      curv = (p - 1.0) * pw;
      return;
    }
    phi = ad == 0.0 ? 0.0 : std::copysign(std::pow(ad, p - 1.0), d);
    if (ad >= 1e-6 * scale) {
      curv = (p - 1.0) * std::pow(ad, p - 2.0);
    } else {
      curv = std::pow(std::max({ad, 1e-14 * scale, std::numeric_limits<double>::min()}), p - 2.0);
    }
    // A difference within a few ulps of zero cannot be resolved further;
    // its Holder-continuous contribution |d|^{p-1} is rounding noise. Just
    // above that, a few ulps of error in d still move phi by about
    // (p-1)|d|^{p-2} ulp, which is not small either.
    if (ad <= 16.0 * ulp)
      floor += weight * std::abs(phi);
    else if (ulp > 0.0)
      floor += weight * (std::pow(ad + 4.0 * ulp, p - 1.0) - std::pow(ad, p - 1.0));
  }

  const Kernel& kernel_;
  const NodalPotential& pot_;
};

inline Field solve_spd(Eigen::MatrixXd H, const Field& rhs) {
  const auto M = static_cast<Eigen::Index>(rhs.size());
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), M);
  double diag_max = H.diagonal().cwiseAbs().maxCoeff();
  double ridge = 1e-14 * std::max(diag_max, std::numeric_limits<double>::min());
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(H + ridge * Eigen::MatrixXd::Identity(M, M));
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd x = llt.solve(b);
      if (x.allFinite()) return Field(x.data(), x.data() + M);
    }
    ridge *= 100.0;
  }
  Field x(rhs.size());
  for (Eigen::Index i = 0; i < M; ++i) x[i] = rhs[i] / std::max(H(i, i), std::numeric_limits<double>::min());
  return x;
}

} // namespace detail

/// Minimizes (1/p)[v]^p + sum_i P_i(v_i) by a safeguarded Newton-type descent:
/// the direction comes from a positive definite curvature model and the step
/// from Armijo backtracking, so every accepted step decreases the energy.
inline SolveResult minimize(const Kernel& kernel, const NodalPotential& potential, const SolveOptions& opts) {
  opts.validate();
  detail::EnergyModel model(kernel, potential);
  const std::size_t M = kernel.size();
  const double p = kernel.params().p();
  const double eps = std::numeric_limits<double>::epsilon();

  SolveResult out;
  Field v = opts.warm_start.empty() ? Field(M, 0.0) : opts.warm_start;
  detail::require(v.size() == M, "solver: initial guess does not match the grid");
  for (double x : v) detail::require(std::isfinite(x), "solver: initial guess must be finite");

  double scale = 0.0;
  double E = model.energy(v, &scale);
  if (!std::isfinite(E)) throw InvalidArgument("solver: initial guess lies outside the energy's domain");
  out.energy_history.push_back(E);

  Field g, floor;
  Eigen::MatrixXd H;
  auto allowance = [&](double s) { return 4.0 * eps * (static_cast<double>(M) + 16.0) * s; };

  // From the zero field with p != 2 the curvature model degenerates, so pick
  // the best multiple of the p = 2 direction first.
  if (p != 2.0 && max_abs(v) == 0.0) {
    model.linearize(v, g, floor, H);
    if (model.residual(g, floor) > opts.gradient_tol) {
      Field rhs(M);
      for (std::size_t i = 0; i < M; ++i) rhs[i] = -g[i];
      Field dir = detail::solve_spd(model.quadratic_model(v), rhs);
      double best_t = 0.0, best_E = E;
      Field trial(M);
      for (int k = -40; k <= 40; ++k) {
        double t = std::ldexp(1.0, k);
        for (std::size_t i = 0; i < M; ++i) trial[i] = t * dir[i];
        double Et = model.energy(trial);
        if (Et < best_E) {
          best_E = Et;
          best_t = t;
        }
      }
      if (best_t > 0.0) {
        for (std::size_t i = 0; i < M; ++i) v[i] = best_t * dir[i];
        E = model.energy(v, &scale);
        out.energy_history.push_back(E);
      }
    }
  }

  Field trial(M), dir(M), rhs(M);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    model.linearize(v, g, floor, H);
    double r = model.residual(g, floor);
    if (r <= opts.gradient_tol) {
      // Two more full Newton steps while they keep shrinking the residual;
      // they cost little and push the iterate to rounding accuracy.
      for (int polish = 0; polish < 2 && r > 0.0; ++polish) {
        for (std::size_t i = 0; i < M; ++i) rhs[i] = -g[i];
        dir = detail::solve_spd(H, rhs);
        for (std::size_t i = 0; i < M; ++i) trial[i] = v[i] + dir[i];
        double s2 = 0.0;
        double Et = model.energy(trial, &s2);
        if (!(Et <= E + allowance(scale))) break;
        Field g2, f2;
        Eigen::MatrixXd H2;
        model.linearize(trial, g2, f2, H2);
        double r2 = model.residual(g2, f2);
        if (!(r2 < 0.5 * r)) break;
        out.energy_tolerance = std::max(out.energy_tolerance, allowance(scale));
        v = trial;
        E = Et;
        scale = s2;
        g = std::move(g2);
        floor = std::move(f2);
        H = std::move(H2);
        r = r2;
        out.energy_history.push_back(E);
      }
      out.u = std::move(v);
      out.iterations = iter;
      out.gradient_norm = max_abs(g);
      out.residual_norm = r;
      return out;
    }

    for (std::size_t i = 0; i < M; ++i) rhs[i] = -g[i];
    dir = detail::solve_spd(H, rhs);
    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      dir = rhs;
      slope = dot(g, dir);
    }

    const double allow = allowance(scale);
    double t = 1.0;
    bool accepted = false;
    double Et = E, st = scale;
    for (int k = 0; k < 200 && t > 1e-20; ++k, t *= opts.backtrack) {
      for (std::size_t i = 0; i < M; ++i) trial[i] = v[i] + t * dir[i];
      Et = model.energy(trial, &st);
      if (Et <= E + opts.sufficient_decrease * t * slope + allow) {
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw ConvergenceError("solver: line search failed (gradient norm " + std::to_string(max_abs(g)) + ")", v, r);
    out.energy_tolerance = std::max(out.energy_tolerance, allow);
    v = trial;
    E = Et;
    scale = st;
    out.energy_history.push_back(E);
  }
  model.linearize(v, g, floor, H);
  double r = model.residual(g, floor);
  throw ConvergenceError("solver: no convergence within " + std::to_string(opts.max_iterations) +
                             " iterations (gradient norm " + std::to_string(r) + ")",
                         v, r);
}

/// Weak solution of (-Delta_p)^s u = f with zero exterior values, i.e. the
/// minimizer of (1/p)[v]^p - sum_i m f_i v_i. Nonnegative when f >= 0.
inline SolveResult solve_nonsingular_detailed(std::span<const double> f, const Kernel& kernel, const SolveOptions& opts) {
  detail::check_size(f.size(), kernel, "solve_nonsingular");
  std::vector<double> coeff(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    detail::require(std::isfinite(f[i]), "solve_nonsingular: datum must be finite");
    coeff[i] = kernel.cell_measure() * f[i];
  }
  return minimize(kernel, NodalPotential::linear(std::move(coeff)), opts);
}

inline Field solve_nonsingular(std::span<const double> f, const Kernel& kernel, const SolveOptions& opts = {}) {
  return solve_nonsingular_detailed(f, kernel, opts).u;
}

/// psi with (-Delta_p)^s psi = min(omega, 1).
inline Field solve_psi(const WeightField& omega, const Kernel& kernel, const SolveOptions& opts = {}) {
  std::vector<double> f(omega.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::min(omega[i], 1.0);
  return solve_nonsingular(f, kernel, opts);
}

struct EmbeddingConstant {
  double theta = 0.0;
  /// S_theta = max ||v||_theta^p / [v]^p.
  double value = 0.0;
  Field extremizer;
  std::uint64_t seed = 0;
  int iterations = 0;
  /// Best value from each start, in start order.
  std::vector<double> start_values;
};

struct EmbeddingOptions {
  int starts = 8;
  std::uint64_t seed = 20240611;
  int max_iterations = 5000;
  /// Relative change of the quotient that ends an inverse-iteration run.
  double tol = 1e-13;
  SolveOptions solve{};
};

/// Best discrete constant in ||v||_theta^p <= S [v]^p.
///
/// Each start runs the normalized inverse iteration
///   (-Delta_p)^s w = |v|^{theta-2} v,   v <- w / ||w||_theta,
/// which never increases [v]^p / ||v||_theta^p. The best of `starts` random
/// positive starts is returned.
inline EmbeddingConstant embedding_constant(double theta, const Kernel& kernel, const EmbeddingOptions& eo = {}) {
  const auto& params = kernel.params();
  detail::require(theta >= 1.0, "embedding constant: theta must be >= 1");
  detail::require(theta <= params.p_star() || !params.subcritical(),
                  "embedding constant: theta must not exceed p_star");
  detail::require(eo.starts >= 1, "embedding constant: need at least one start");
  const double m = kernel.cell_measure();
  const double p = params.p();
  const std::size_t M = kernel.size();

  auto quotient = [&](const Field& v) { return std::pow(norm_r(v, m, theta), p) / seminorm_p(v, kernel); };

  EmbeddingConstant best;
  best.theta = theta;
  best.value = -1.0;
  for (int s = 0; s < eo.starts; ++s) {
    Field v = random_positive_field(M, eo.seed, static_cast<std::uint64_t>(s));
    double nv = norm_r(v, m, theta);
    for (double& x : v) x /= nv;
    double q_old = 1.0 / quotient(v);
    Field w;
    Field f(M);
    int it = 0;
    for (; it < eo.max_iterations; ++it) {
      for (std::size_t i = 0; i < M; ++i) f[i] = detail::signed_power(v[i], theta);
      w = solve_nonsingular(f, kernel, eo.solve.warm(std::move(w)));
      double nw = norm_r(w, m, theta);
      if (!(nw > 0.0)) throw ConvergenceError("embedding constant: iteration collapsed to zero", v, 0.0);
      Field v_new(M);
      for (std::size_t i = 0; i < M; ++i) v_new[i] = w[i] / nw;
      double q = 1.0 / quotient(v_new);
      double change = std::abs(q_old - q);
      v = std::move(v_new);
      q_old = q;
      if (change <= eo.tol * q && it > 0) break;
    }
    if (it == eo.max_iterations)
      throw ConvergenceError("embedding constant: inverse iteration did not settle", v, 0.0);
    double value = quotient(v);
    best.start_values.push_back(value);
    if (value > best.value) {
      best.value = value;
      best.extremizer = v;
      best.seed = static_cast<std::uint64_t>(s);
      best.iterations = it + 1;
    }
  }
  return best;
}

} // namespace fss
