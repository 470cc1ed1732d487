#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fss/convex_solver.hpp"
#include "fss/error.hpp"
#include "fss/grid.hpp"
#include "fss/kernel.hpp"
#include "fss/nonlocal_ops.hpp"
#include "fss/random_fields.hpp"

namespace fss {

/// omega_n = min(omega, n), same exponent r.
inline WeightField truncate_weight(const WeightField& omega, double n) {
  detail::require(n >= 1.0, "truncate_weight: n must be >= 1");
  std::vector<double> v(omega.values().begin(), omega.values().end());
  for (double& x : v) x = std::min(x, n);
  return WeightField(std::move(v), omega.cell_measure(), omega.r());
}

/// Level n of the approximation: (-Delta_p)^s u = omega_n / (u + 1/n)^alpha.
struct RegularizedProblem {
  double n;
  WeightField omega_n;
  double alpha;

  RegularizedProblem(const WeightField& omega, double level, double alpha_)
      : n(level), omega_n(truncate_weight(omega, level)), alpha(alpha_) {
    detail::require(alpha_ > 0.0, "problem.alpha must be positive");
  }
  double shift() const noexcept { return 1.0 / n; }

  /// Right-hand side omega_n / (|w| + 1/n)^alpha at node i.
  double datum(std::size_t i, double w) const { return omega_n[i] * std::pow(std::abs(w) + shift(), -alpha); }
};

/// One application of T: the solution of (-Delta_p)^s u = omega_n / (|w| + 1/n)^alpha.
inline Field fixed_point_T(const RegularizedProblem& problem, const Kernel& kernel, std::span<const double> w,
                           const SolveOptions& opts = {}) {
  detail::check_size(w.size(), kernel, "fixed_point_T");
  Field f(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    detail::require(std::isfinite(w[i]), "fixed_point_T: w must be finite");
    f[i] = problem.datum(i, w[i]);
  }
  return solve_nonsingular(f, kernel, opts);
}

/// max over seeded test fields phi of |<(-Delta_p)^s u, phi> - sum m rhs_i phi_i| / (1 + [phi]).
inline double dual_residual(std::span<const double> u, std::span<const double> rhs, const Kernel& kernel,
                            int trials, std::uint64_t seed) {
  Field Au = apply_operator(u, kernel);
  const double m = kernel.cell_measure();
  Field r(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) r[i] = Au[i] - m * rhs[i];
  std::vector<double> per(static_cast<std::size_t>(std::max(trials, 0)), 0.0);
  parallel_for(per.size(), [&](std::size_t t) {
    Field phi = random_test_field(kernel.grid(), seed, t);
    per[t] = std::abs(dot(r, phi)) / (1.0 + seminorm(phi, kernel));
  }, 1);
  double worst = 0.0;
  for (double x : per) worst = std::max(worst, x);
  return worst;
}

struct LevelOptions {
  /// Certificate: ||T(u_n) - u_n||_inf must end up below this.
  double fp_tol = 1e-9;
  int max_sweeps = 1000;
  /// Iterate w <- T(w) instead of minimizing the level energy directly.
  bool picard = false;
  int residual_trials = 100;
  std::uint64_t residual_seed = 7;
  double residual_tol = 1e-7;
  SolveOptions solve{};
};

struct LevelResult {
  double n = 0.0;
  Field u;
  double seminorm_p = 0.0;
  /// Applications of T (one certificate step unless Picard mode is used).
  int fp_iters = 0;
  int solver_iters = 0;
  /// ||T(u) - u||_inf at the returned field.
  double fp_residual = 0.0;
  /// Weak-form residual against seeded test fields.
  double residual = 0.0;
  double min_u = 0.0;
  double max_u = 0.0;
};

/// Unique solution u_n of level n.
///
/// By default u_n is found as the minimizer of the strictly convex level energy
///   (1/p)[v]^p - sum_i m omega_n,i G_n(v_i),  G_n' (t) = (t + 1/n)^-alpha,
/// whose critical point is exactly the fixed point of T; one application of T
/// then certifies it. Plain iteration of T is available (`picard`) but it only
/// contracts when alpha/(p-1) < 1.
inline LevelResult solve_level(const RegularizedProblem& problem, const Kernel& kernel, std::span<const double> init,
                               const LevelOptions& lo = {}) {
  detail::check_size(init.size(), kernel, "solve_level");
  for (double x : init) detail::require(x >= 0.0 && std::isfinite(x), "solve_level: init must be finite and >= 0");
  const std::size_t M = kernel.size();
  const double m = kernel.cell_measure();
  LevelResult out;
  out.n = problem.n;

  if (lo.picard) {
    Field w(init.begin(), init.end());
    double diff = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < lo.max_sweeps) {
      Field next = fixed_point_T(problem, kernel, w, lo.solve.warm(w));
      diff = max_abs_diff(next, w);
      w = std::move(next);
      ++it;
      if (diff <= lo.fp_tol) break;
    }
    if (diff > lo.fp_tol)
      throw ConvergenceError("solve_level: fixed-point stagnation after " + std::to_string(it) +
                                 " sweeps (last change " + std::to_string(diff) + ")",
                             w, diff);
    out.u = std::move(w);
    out.fp_iters = it;
    out.fp_residual = diff;
  } else {
    std::vector<double> coeff(M);
    for (std::size_t i = 0; i < M; ++i) coeff[i] = m * problem.omega_n[i];
    auto pot = NodalPotential::level(std::move(coeff), problem.n, problem.alpha);
    SolveResult sr = minimize(kernel, pot, lo.solve.warm(Field(init.begin(), init.end())));
    out.solver_iters = sr.iterations;
    Field t = fixed_point_T(problem, kernel, sr.u, lo.solve.warm(sr.u));
    out.fp_residual = max_abs_diff(t, sr.u);
    out.fp_iters = 1;
    out.u = std::move(sr.u);
    if (out.fp_residual > lo.fp_tol)
      throw ConvergenceError("solve_level: fixed-point certificate failed (||T(u)-u|| = " +
                                 std::to_string(out.fp_residual) + ")",
                             out.u, out.fp_residual);
  }

  out.min_u = *std::min_element(out.u.begin(), out.u.end());
  out.max_u = *std::max_element(out.u.begin(), out.u.end());
  if (!(out.min_u > 0.0)) throw AssertionFailure("solve_level: u_n is not positive at every interior node");
  out.seminorm_p = seminorm_p(out.u, kernel);
  Field rhs(M);
  for (std::size_t i = 0; i < M; ++i) rhs[i] = problem.datum(i, out.u[i]);
  out.residual = dual_residual(out.u, rhs, kernel, lo.residual_trials, lo.residual_seed);
  if (out.residual > lo.residual_tol)
    throw AssertionFailure("solve_level: weak residual " + std::to_string(out.residual) + " exceeds tolerance");
  return out;
}

/// Checks that omega vanishes on every interior node within one cell of the
/// boundary; required for alpha > 1.
inline bool compactly_supported(const WeightField& omega, const Grid& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (omega[i] != 0.0 && grid.boundary_distance(i) <= grid.h * (1.0 + 1e-9)) return false;
  return true;
}

inline void validate_alpha(double alpha, const WeightField& omega, const Grid& grid) {
  detail::require(alpha > 0.0 && std::isfinite(alpha), "problem.alpha must be positive");
  if (alpha > 1.0 && !compactly_supported(omega, grid))
    throw InvalidArgument(
        "problem.alpha: alpha>1 requires a compactly supported weight (omega must vanish on every node within one "
        "cell of the boundary); otherwise the singular problem might have no weak solution");
}

struct ChainOptions {
  /// Levels n; empty means n = 2^k, k = 0 .. max_levels-1. Level 1 is always solved.
  std::vector<double> schedule;
  int max_levels = 64;
  double chain_tol = 1e-7;
  /// After the chain settles, solve the n = infinity problem from the last
  /// level. This removes the O(1/n) truncation error from u_alpha.
  bool polish = true;
  /// Compute the a-priori seminorm bound (needs one embedding constant).
  bool apriori_bound = false;
  EmbeddingOptions embedding{};
  LevelOptions level{};
  /// Initial guess for the first level; empty means zero.
  Field init;
};

struct AprioriBound {
  double theta = 0.0;
  double S = 0.0;
  /// ||omega||_{r_alpha} S^{(1-alpha)/p}, or ||omega||_1 when alpha = 1.
  double rhs = 0.0;
  /// max over levels of [u_n]^{p-(1-alpha)}.
  double lhs = 0.0;
};

struct ChainResult {
  double alpha = 0.0;
  std::vector<LevelResult> levels;
  Field u_alpha;
  bool converged = false;
  bool polished = false;
  Field psi;
  double m_alpha = 0.0;
  Field barrier;
  /// max_i (u_n - u_{n'}) over consecutive stored levels (should be <= 0).
  double monotone_violation = 0.0;
  /// max relative decrease of [u_n]^p between consecutive levels.
  double seminorm_violation = 0.0;
  /// max_i (m_alpha psi - u_n) over all levels.
  double barrier_violation = 0.0;
  /// max_i (u_{n_last} - u_alpha).
  double limit_violation = 0.0;
  std::optional<AprioriBound> apriori;
  /// [u_n^{(alpha-1+p)/p}]^p per level, reported for alpha > 1 only.
  std::vector<double> ufinite_seminorm;
};

/// Solution of the singular problem (-Delta_p)^s u = omega / u^alpha.
/// The weak form at n = infinity is the Euler-Lagrange equation of
///   (1/p)[v]^p - sum_i m omega_i G(v_i),  G' (t) = t^-alpha,  v > 0.
inline SolveResult solve_singular_limit(const WeightField& omega, double alpha, const Kernel& kernel,
                                        std::span<const double> init, const SolveOptions& opts = {}) {
  const std::size_t M = kernel.size();
  std::vector<double> coeff(M);
  for (std::size_t i = 0; i < M; ++i) coeff[i] = kernel.cell_measure() * omega[i];
  auto pot = NodalPotential::limit(std::move(coeff), alpha);
  return minimize(kernel, pot, opts.warm(Field(init.begin(), init.end())));
}

inline std::vector<double> default_schedule(int levels) {
  std::vector<double> s;
  for (int k = 0; k < levels; ++k) s.push_back(std::ldexp(1.0, k));
  return s;
}

/// Runs the monotone chain u_1 <= u_2 <= ... toward u_alpha.
inline ChainResult run_chain(const WeightField& omega, double alpha, const Kernel& kernel, const ChainOptions& co = {}) {
  const auto& grid = kernel.grid();
  detail::require(omega.size() == kernel.size(), "run_chain: weight does not match the grid");
  validate_alpha(alpha, omega, grid);
  const double p = kernel.params().p();
  const std::size_t M = kernel.size();

  std::vector<double> schedule = co.schedule.empty() ? default_schedule(co.max_levels) : co.schedule;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    detail::require(schedule[k] >= 1.0, "problem.n_schedule entries must be >= 1");
    if (k > 0) detail::require(schedule[k] > schedule[k - 1], "problem.n_schedule must be strictly increasing");
  }
  if (schedule.empty() || schedule.front() != 1.0) schedule.insert(schedule.begin(), 1.0);

  ChainResult out;
  out.alpha = alpha;
  Field w = co.init.empty() ? Field(M, 0.0) : co.init;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    RegularizedProblem prob(omega, schedule[k], alpha);
    LevelResult lr = solve_level(prob, kernel, w, co.level);
    w = lr.u;
    bool settled = !out.levels.empty() && max_abs_diff(lr.u, out.levels.back().u) <= co.chain_tol;
    out.levels.push_back(std::move(lr));
    if (settled) {
      out.converged = true;
      break;
    }
  }
  out.u_alpha = out.levels.back().u;
  if (out.converged && co.polish) {
    SolveResult sr = solve_singular_limit(omega, alpha, kernel, out.u_alpha, co.level.solve);
    out.u_alpha = std::move(sr.u);
    out.polished = true;
    out.limit_violation = 0.0;
    for (std::size_t i = 0; i < M; ++i)
      out.limit_violation = std::max(out.limit_violation, out.levels.back().u[i] - out.u_alpha[i]);
  }

  out.psi = solve_psi(omega, kernel, co.level.solve);
  out.m_alpha = std::pow(max_abs(out.levels.front().u) + 1.0, -alpha / (p - 1.0));
  out.barrier.resize(M);
  for (std::size_t i = 0; i < M; ++i) out.barrier[i] = out.m_alpha * out.psi[i];

  out.barrier_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < out.levels.size(); ++k) {
    const auto& u = out.levels[k].u;
    for (std::size_t i = 0; i < M; ++i) out.barrier_violation = std::max(out.barrier_violation, out.barrier[i] - u[i]);
    if (k == 0) continue;
    const auto& prev = out.levels[k - 1];
    for (std::size_t i = 0; i < M; ++i)
      out.monotone_violation = std::max(out.monotone_violation, prev.u[i] - u[i]);
    double rel = (prev.seminorm_p - out.levels[k].seminorm_p) / std::max(prev.seminorm_p, 1e-300);
    out.seminorm_violation = std::max(out.seminorm_violation, rel);
  }

  if (alpha > 1.0) {
    double e = (alpha - 1.0 + p) / p;
    for (const auto& lr : out.levels) {
      Field q(M);
      for (std::size_t i = 0; i < M; ++i) q[i] = std::pow(lr.u[i], e);
      out.ufinite_seminorm.push_back(seminorm_p(q, kernel));
    }
  }

  if (co.apriori_bound && alpha <= 1.0) {
    AprioriBound ab;
    double lhs = 0.0;
    for (const auto& lr : out.levels) lhs = std::max(lhs, std::pow(lr.seminorm_p, (p - 1.0 + alpha) / p));
    ab.lhs = lhs;
    if (alpha == 1.0) {
      ab.theta = 1.0;
      ab.rhs = omega.norm1();
    } else {
      double ra = r_alpha(alpha, kernel.params());
      ab.theta = (1.0 - alpha) * holder_conjugate(ra);
      ab.S = embedding_constant(ab.theta, kernel, co.embedding).value;
      ab.rhs = omega.norm(ra) * std::pow(ab.S, (1.0 - alpha) / p);
    }
    out.apriori = ab;
  }
  return out;
}

struct WeakResidualReport {
  /// max |<(-Delta_p)^s u, phi> - sum m omega phi / u^alpha| / (1 + [phi]).
  double max_residual = 0.0;
  /// min over trials of [u]^{p-1}[v] - |sum m omega v / u^alpha|.
  double min_bound_slack = std::numeric_limits<double>::infinity();
  int trials = 0;
};

/// Weak-form residual of the singular equation at u.
inline WeakResidualReport weak_residual(std::span<const double> u, const WeightField& omega, double alpha,
                                        const Kernel& kernel, int trials, std::uint64_t seed) {
  detail::check_size(u.size(), kernel, "weak_residual");
  for (double x : u)
    if (!(x > 0.0)) throw InvalidArgument("weak_residual: not an interior-positive field");
  const std::size_t M = u.size();
  const double m = kernel.cell_measure();
  const double p = kernel.params().p();
  Field Au = apply_operator(u, kernel);
  Field rhs(M);
  for (std::size_t i = 0; i < M; ++i) rhs[i] = m * omega[i] * std::pow(u[i], -alpha);
  const double su = std::pow(seminorm_p(u, kernel), (p - 1.0) / p);

  WeakResidualReport rep;
  rep.trials = trials;
  std::vector<double> res(static_cast<std::size_t>(std::max(trials, 0))), slack(res.size());
  parallel_for(res.size(), [&](std::size_t t) {
    Field phi = random_test_field(kernel.grid(), seed, t);
    double sp = seminorm(phi, kernel);
    double lhs = dot(Au, phi), rhs_int = dot(rhs, phi);
    res[t] = std::abs(lhs - rhs_int) / (1.0 + sp);
    slack[t] = su * sp - std::abs(rhs_int);
  }, 1);
  for (std::size_t t = 0; t < res.size(); ++t) {
    rep.max_residual = std::max(rep.max_residual, res[t]);
    rep.min_bound_slack = std::min(rep.min_bound_slack, slack[t]);
  }
  return rep;
}

struct BoundReport {
  double C_alpha = 0.0;
  double b = 0.0;
  double theta = 0.0;
  double r = 0.0;
  double bound = 0.0;
  double u_max = 0.0;
  bool holds = false;
};

/// C_alpha = (alpha/(p-1))^{(p-1)/(p-1+alpha)} (1 + (p-1)/alpha).
inline double bound_constant(double alpha, double p) {
  return std::pow(alpha / (p - 1.0), (p - 1.0) / (p - 1.0 + alpha)) * (1.0 + (p - 1.0) / alpha);
}

/// b = (theta/r' - 1)/(p-1); must exceed 1.
inline double stampacchia_exponent(double theta, double r, double p) {
  return (theta / holder_conjugate(r) - 1.0) / (p - 1.0);
}

/// L^inf estimate for a positive u with (-Delta_p)^s u <= omega/u^alpha.
/// `S_theta` is the constant in ||v||_theta^p <= S [v]^p, and `measure` is |Omega_h|.
inline BoundReport linfty_bound_report(std::span<const double> u, const WeightField& omega, double alpha,
                                       const FracParams& params, double theta, double S_theta, double measure) {
  const double p = params.p();
  detail::require(alpha > 0.0, "linfty bound: alpha must be positive");
  detail::require(S_theta > 0.0, "linfty bound: S_theta must be positive");
  detail::require(measure > 0.0, "linfty bound: measure must be positive");
  detail::require(!params.subcritical() || theta <= params.p_star(), "linfty bound: theta must not exceed p_star");
  BoundReport rep;
  rep.theta = theta;
  rep.r = omega.r();
  rep.b = stampacchia_exponent(theta, omega.r(), p);
  if (!(rep.b > 1.0)) throw InvalidArgument("linfty bound: theta too small (need theta > p r', got b <= 1)");
  rep.C_alpha = bound_constant(alpha, p);
  const double b = rep.b, q = p - 1.0 + alpha;
  rep.bound = rep.C_alpha * std::pow(omega.norm_r() * S_theta, 1.0 / q) *
              std::pow(2.0, b * (p - 1.0) / ((b - 1.0) * q)) *
              std::pow(measure, (b - 1.0) * (p - 1.0) / (theta * q));
  rep.u_max = max_abs(u);
  rep.holds = rep.u_max <= rep.bound;
  return rep;
}

/// Constants of the level-set recursion g(h) <= C (h-k)^-theta g(k)^b for
/// g(k) = |{u > k}|, with k0 chosen to minimise k0 + d.
struct StampacchiaSetup {
  double k0 = 0.0;
  double C = 0.0;
  double theta = 0.0;
  double b = 0.0;
  /// Upper bound on d using g(k0) <= |Omega_h|.
  double d_max = 0.0;
};

inline StampacchiaSetup stampacchia_setup(const WeightField& omega, double alpha, const FracParams& params,
                                          double theta, double S_theta, double measure) {
  const double p = params.p();
  StampacchiaSetup st;
  st.theta = theta;
  st.b = stampacchia_exponent(theta, omega.r(), p);
  if (!(st.b > 1.0)) throw InvalidArgument("stampacchia: theta too small (need theta > p r', got b <= 1)");
  const double b = st.b;
  const double A = std::pow(omega.norm_r() * S_theta, 1.0 / (p - 1.0)) * std::pow(2.0, b / (b - 1.0)) *
                   std::pow(measure, (b - 1.0) / theta);
  const double beta = alpha / (p - 1.0);
  st.k0 = std::pow(beta * A, 1.0 / (1.0 + beta));
  st.C = std::pow(omega.norm_r() * S_theta / std::pow(st.k0, alpha), theta / (p - 1.0));
  st.d_max = std::pow(st.k0, -beta) * A;
  return st;
}

/// Samples (k, |{u > k}|) of the level-set function, exact as a right-continuous
/// step function: every node value above `from` is a breakpoint, and the extra
/// points are added as-is.
inline std::vector<std::pair<double, double>> level_set_samples(std::span<const double> u, double cell_measure,
                                                                double from, std::vector<double> extra = {}) {
  std::vector<double> ks = std::move(extra);
  ks.push_back(from);
  for (double x : u)
    if (x >= from) ks.push_back(x);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<double> sorted(u.begin(), u.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  for (double k : ks) {
    if (k < from) continue;
    auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), k);
    out.emplace_back(k, cell_measure * static_cast<double>(above));
  }
  return out;
}

} // namespace fss
