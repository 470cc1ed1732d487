#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fss/error.hpp"
#include "fss/kernel.hpp"
#include "fss/nonlocal_ops.hpp"
#include "fss/parallel.hpp"
#include "fss/random_fields.hpp"
#include "fss/singular_chain.hpp"

namespace fss {

struct LemmaReport {
  std::string lemma;
  int trials = 0;
  /// Smallest slack of the inequality with the fitted constant (>= 0 when it holds).
  double worst_slack = std::numeric_limits<double>::infinity();
  /// Inputs of the worst trial.
  std::vector<double> witness;
  double fitted_constant = std::numeric_limits<double>::quiet_NaN();
  /// Named extra diagnostics, in insertion order.
  std::vector<std::pair<std::string, double>> extras;
  bool passed = false;

  double extra(const std::string& key) const {
    for (const auto& [k, v] : extras)
      if (k == key) return v;
    return std::numeric_limits<double>::quiet_NaN();
  }
};

namespace detail {

inline double vnorm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// |X|^{p-2} X.
inline std::vector<double> vphi(const std::vector<double>& x, double p) {
  double n = vnorm(x);
  std::vector<double> out(x.size(), 0.0);
  if (n == 0.0) return out;
  double f = p == 2.0 ? 1.0 : std::pow(n, p - 2.0);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f * x[i];
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Random nonzero vector of dimension 1..3 with magnitudes spread over decades.
inline std::vector<double> random_vector(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> e(-2.0, 2.0);
  std::vector<double> x(static_cast<std::size_t>(dim));
  double scale = std::pow(10.0, e(rng));
  do {
    for (double& v : x) v = scale * u(rng);
  } while (vnorm(x) == 0.0);
  return x;
}

} // namespace detail

struct VectorInequalityReport {
  LemmaReport upper;  ///< |phi(X) - phi(Y)| <= c_p (...)
  LemmaReport lower;  ///< (phi(X) - phi(Y)).(X - Y) >= C_p (...)
  bool passed() const { return upper.passed && lower.passed; }
};

/// Fits c_p (largest observed ratio) and C_p (smallest observed ratio) in
///   |phi(X) - phi(Y)| <= c_p |X-Y|^{p-1}                  (1 < p < 2)
///                     <= c_p (|X|+|Y|)^{p-2} |X-Y|         (p >= 2)
///   (phi(X) - phi(Y)).(X-Y) >= C_p |X-Y|^2 / (|X|+|Y|)^{2-p}   (1 < p < 2)
///                           >= C_p |X-Y|^p                  (p >= 2)
/// with phi(X) = |X|^{p-2} X and X, Y random in dimension 1..3.
inline VectorInequalityReport check_vector_inequalities(double p, int trials, std::uint64_t seed) {
  detail::require(p > 1.0, "check_vector_inequalities: p must exceed 1");
  detail::require(trials >= 1, "check_vector_inequalities: need at least one trial");
  const auto T = static_cast<std::size_t>(trials);
  std::vector<double> up(T), lo(T), upper_lhs(T), upper_base(T), lower_lhs(T), lower_base(T);
  std::vector<std::vector<double>> witness(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto rng = trial_rng(seed, t);
    std::uniform_int_distribution<int> dim(1, 3);
    int N = dim(rng);
    auto X = detail::random_vector(rng, N);
    auto Y = detail::random_vector(rng, N);
    // Every fourth trial puts Y near X or near -X to probe both degenerate regimes.
    if (t % 4 == 1)
      for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] + 1e-3 * Y[i];
    if (t % 4 == 2)
      for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = -X[i] + 1e-3 * Y[i];
    auto fx = detail::vphi(X, p), fy = detail::vphi(Y, p);
    std::vector<double> dphi(X.size()), d(X.size());
    double inner = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      dphi[i] = fx[i] - fy[i];
      d[i] = X[i] - Y[i];
      inner += dphi[i] * d[i];
    }
    double nd = detail::vnorm(d), sum = detail::vnorm(X) + detail::vnorm(Y);
    upper_lhs[t] = detail::vnorm(dphi);
    lower_lhs[t] = inner;
    if (p < 2.0) {
      upper_base[t] = std::pow(nd, p - 1.0);
      lower_base[t] = nd * nd / std::pow(sum, 2.0 - p);
    } else {
      upper_base[t] = (p == 2.0 ? 1.0 : std::pow(sum, p - 2.0)) * nd;
      lower_base[t] = p == 2.0 ? nd * nd : std::pow(nd, p);
    }
    up[t] = upper_lhs[t] / upper_base[t];
    lo[t] = lower_lhs[t] / lower_base[t];
    witness[t] = X;
    witness[t].insert(witness[t].end(), Y.begin(), Y.end());
  }

  VectorInequalityReport rep;
  rep.upper.lemma = "vector-upper";
  rep.lower.lemma = "vector-lower";
  rep.upper.trials = rep.lower.trials = trials;
  double c_p = *std::max_element(up.begin(), up.end());
  double C_p = *std::min_element(lo.begin(), lo.end());
  rep.upper.fitted_constant = c_p;
  rep.lower.fitted_constant = C_p;
  std::size_t wu = 0, wl = 0;
  for (std::size_t t = 0; t < T; ++t) {
    double su = (c_p * upper_base[t] - upper_lhs[t]) / std::max(upper_lhs[t], std::numeric_limits<double>::min());
    double sl = (lower_lhs[t] - C_p * lower_base[t]) / std::max(lower_lhs[t], std::numeric_limits<double>::min());
    if (su < rep.upper.worst_slack) {
      rep.upper.worst_slack = su;
      wu = t;
    }
    if (sl < rep.lower.worst_slack) {
      rep.lower.worst_slack = sl;
      wl = t;
    }
  }
  rep.upper.witness = witness[wu];
  rep.lower.witness = witness[wl];
  double med_up = detail::median(up), med_lo = detail::median(lo);
  rep.upper.extras = {{"median_ratio", med_up}};
  rep.lower.extras = {{"median_ratio", med_lo}};
  rep.upper.passed = std::isfinite(c_p) && c_p <= 10.0 * med_up && rep.upper.worst_slack >= -1e-12;
  rep.lower.passed = std::isfinite(C_p) && C_p > 0.0 && rep.lower.worst_slack >= -1e-12;
  return rep;
}

/// Fits C in the strong monotonicity estimate of the discrete operator A:
///   <A v1 - A v2, v1 - v2> >= C [v1-v2]^2 / ([v1]^p + [v2]^p)^{(2-p)/p}   (1 < p < 2)
///                          >= C [v1-v2]^p                                  (p >= 2)
/// with [.] the seminorm (p-th root).
inline LemmaReport check_strong_monotonicity(const Kernel& kernel, int trials, std::uint64_t seed) {
  detail::require(trials >= 1, "check_strong_monotonicity: need at least one trial");
  const double p = kernel.params().p();
  const auto T = static_cast<std::size_t>(trials);
  std::vector<double> lhs(T), base(T);
  parallel_for(T, [&](std::size_t t) {
    Field v1 = random_test_field(kernel.grid(), seed, 2 * t);
    Field v2 = random_test_field(kernel.grid(), seed, 2 * t + 1);
    Field d(v1.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = v1[i] - v2[i];
    lhs[t] = pairing(v1, d, kernel) - pairing(v2, d, kernel);
    double sd = seminorm_p(d, kernel);
    if (p >= 2.0) {
      base[t] = sd;
    } else {
      double s1 = seminorm_p(v1, kernel), s2 = seminorm_p(v2, kernel);
      base[t] = std::pow(sd, 2.0 / p) / std::pow(s1 + s2, (2.0 - p) / p);
    }
  }, 1);
  LemmaReport rep;
  rep.lemma = "strong-monotonicity";
  rep.trials = trials;
  double C = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < T; ++t) C = std::min(C, lhs[t] / base[t]);
  rep.fitted_constant = C;
  std::size_t worst = 0;
  for (std::size_t t = 0; t < T; ++t) {
    double s = (lhs[t] - C * base[t]) / lhs[t];
    if (s < rep.worst_slack) {
      rep.worst_slack = s;
      worst = t;
    }
  }
  rep.witness = {static_cast<double>(2 * worst), static_cast<double>(2 * worst + 1)};
  rep.passed = C > 0.0 && std::isfinite(C) && rep.worst_slack >= -1e-12;
  return rep;
}

namespace detail {

// int_0^1 |a + t(b-a)|^{p-2} dt by tanh-sinh quadrature, split at the zero of
// the integrand's base so that each piece has at most an endpoint singularity.
// The base is evaluated from the nearest piece endpoint using the
// complement argument, so it stays exact next to the zero.
inline double q_integral(double a, double b, double p, double tol, double* error_estimate) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double slope = b - a;
  double tz = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> cuts{0.0};
  if (a != b) {
    tz = -a / slope;
    if (tz > 0.0 && tz < 1.0) cuts.push_back(tz);
  }
  cuts.push_back(1.0);
  auto base_at = [&](double t) { return t == tz ? 0.0 : a + t * slope; };
  double total = 0.0, err_total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    // Refine by bisecting pieces until the estimate meets the tolerance.
    std::vector<std::pair<double, double>> pieces{{cuts[k], cuts[k + 1]}};
    for (int depth = 0; depth < 12 && !pieces.empty(); ++depth) {
      std::vector<std::pair<double, double>> next;
      for (auto [lo, hi] : pieces) {
        const double x_lo = base_at(lo), x_hi = base_at(hi);
        // xc = lo - t near lo and hi - t near hi.
        auto f = [&, lo, hi](double t, double xc) {
          double x = t < 0.5 * (lo + hi) ? x_lo - xc * slope : x_hi - xc * slope;
          return p == 2.0 ? 1.0 : std::pow(std::abs(x), p - 2.0);
        };
        double err = 0.0, l1 = 0.0;
        double val = integrator.integrate(f, lo, hi, tol, &err, &l1);
        if (err <= tol * std::max(1.0, l1) || hi - lo < 1e-12) {
          total += val;
          err_total += err;
        } else {
          double mid = 0.5 * (lo + hi);
          next.emplace_back(lo, mid);
          next.emplace_back(mid, hi);
        }
      }
      pieces = std::move(next);
    }
    if (!pieces.empty()) throw Error("q_integral: quadrature tolerance unreachable");
  }
  if (error_estimate) *error_estimate = err_total;
  return total;
}

} // namespace detail

/// Checks the scalar identity
///   |b|^{p-2} b - |a|^{p-2} a = (p-1)(b-a) int_0^1 |a + t(b-a)|^{p-2} dt
/// on random (a, b), and, when a kernel is given, the field-level consequence
///   <A v1 - A v2, (v1-v2)_+> >= (p-1) sum_pairs w |v+(x) - v+(y)|^2 Q >= 0.
inline LemmaReport check_q_identity(double p, int trials, std::uint64_t seed, const Kernel* kernel = nullptr) {
  detail::require(p > 1.0, "check_q_identity: p must exceed 1");
  detail::require(trials >= 1, "check_q_identity: need at least one trial");
  if (kernel) detail::require(kernel->params().p() == p, "check_q_identity: kernel exponent differs from p");
  const auto T = static_cast<std::size_t>(trials);
  LemmaReport rep;
  rep.lemma = "q-identity";
  rep.trials = trials;
  double worst_err = 0.0;
  std::size_t worst = 0;
  std::vector<std::pair<double, double>> ab(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto rng = trial_rng(seed, t);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double a = u(rng), b = u(rng);
    if (t % 5 == 3) a = 0.0;
    ab[t] = {a, b};
    double lhs = detail::signed_power(b, p) - detail::signed_power(a, p);
    double rhs = (p - 1.0) * (b - a) * detail::q_integral(a, b, p, 1e-12, nullptr);
    double err = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
    if (err > worst_err) {
      worst_err = err;
      worst = t;
    }
  }
  rep.witness = {ab[worst].first, ab[worst].second};
  rep.extras.emplace_back("max_identity_error", worst_err);
  rep.worst_slack = -worst_err;
  bool ok = worst_err <= 1e-10;

  if (kernel) {
    const std::size_t M = kernel->size();
    std::vector<double> field_lhs(T), field_lower(T);
    parallel_for(T, [&](std::size_t t) {
      Field v1 = random_test_field(kernel->grid(), seed ^ 0x9e3779b97f4a7c15ULL, 2 * t);
      Field v2 = random_test_field(kernel->grid(), seed ^ 0x9e3779b97f4a7c15ULL, 2 * t + 1);
      Field vp(M);
      for (std::size_t i = 0; i < M; ++i) vp[i] = std::max(v1[i] - v2[i], 0.0);
      field_lhs[t] = pairing(v1, vp, *kernel) - pairing(v2, vp, *kernel);
      // Q per pair in closed form: (phi(d1) - phi(d2)) / ((p-1)(d1 - d2)).
      auto q_pair = [&](double d1, double d2) {
        if (d1 == d2) return p == 2.0 ? 1.0 : std::pow(std::abs(d1), p - 2.0);
        return (detail::signed_power(d1, p) - detail::signed_power(d2, p)) / ((p - 1.0) * (d1 - d2));
      };
      double acc = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        auto row = kernel->row(i);
        for (std::size_t j = i + 1; j < M; ++j) {
          double dp = vp[i] - vp[j];
          if (dp == 0.0) continue;
          acc += row[j] * dp * dp * q_pair(v1[i] - v1[j], v2[i] - v2[j]);
        }
        if (vp[i] != 0.0) acc += kernel->exterior_coefficient(i) * vp[i] * vp[i] * q_pair(v1[i], v2[i]);
      }
      field_lower[t] = 2.0 * (p - 1.0) * acc;
    }, 1);
    double min_lhs = std::numeric_limits<double>::infinity(), min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < T; ++t) {
      min_lhs = std::min(min_lhs, field_lhs[t]);
      double scale = std::max(std::abs(field_lhs[t]), 1.0);
      min_gap = std::min(min_gap, (field_lhs[t] - field_lower[t]) / scale);
    }
    rep.extras.emplace_back("min_field_pairing", min_lhs);
    rep.extras.emplace_back("min_field_gap", min_gap);
    ok = ok && min_lhs >= -1e-10 && min_gap >= -1e-10;
  }
  rep.passed = ok;
  return rep;
}

/// Replays the level-set lemma: for g nonnegative, nonincreasing on k >= k0 with
///   g(h) <= C (h-k)^{-theta} g(k)^b   (k0 <= k < h),
/// g vanishes from k0 + d on, d^theta = C g(k0)^{b-1} 2^{theta b/(b-1)}.
/// `samples` are (k, g(k)) pairs, read as a right-continuous step function.
inline LemmaReport check_stampacchia(std::vector<std::pair<double, double>> samples, double k0, double C, double theta,
                                     double b) {
  detail::require(b > 1.0, "check_stampacchia: b must exceed 1");
  detail::require(theta > 0.0, "check_stampacchia: theta must be positive");
  detail::require(C > 0.0, "check_stampacchia: C must be positive");
  std::sort(samples.begin(), samples.end());
  LemmaReport rep;
  rep.lemma = "stampacchia";
  rep.trials = static_cast<int>(samples.size());

  auto g_at = [&](double k) {
    // Value of the last sample at or before k.
    auto it = std::upper_bound(samples.begin(), samples.end(), std::make_pair(k, std::numeric_limits<double>::infinity()));
    if (it == samples.begin()) throw InvalidArgument("check_stampacchia: samples must start at or before k0");
    return std::prev(it)->second;
  };

  for (std::size_t i = 0; i < samples.size(); ++i) {
    detail::require(samples[i].second >= 0.0, "not a Stampacchia family: g must be nonnegative");
    if (i > 0 && samples[i].second > samples[i - 1].second)
      throw InvalidArgument("not a Stampacchia family: g must be nonincreasing");
  }
  const double g0 = g_at(k0);

  // Hypothesis on every sampled pair k0 <= k < h.
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [k, gk] = samples[i];
    if (k < k0) continue;
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      auto [h, gh] = samples[j];
      if (h <= k || gh == 0.0) continue;
      double rhs = C * std::pow(h - k, -theta) * std::pow(gk, b);
      if (gh > rhs * (1.0 + 1e-12))
        throw InvalidArgument("not a Stampacchia family: hypothesis fails at k = " + std::to_string(k) +
                              ", h = " + std::to_string(h));
    }
  }

  const double d = std::pow(C * std::pow(g0, b - 1.0) * std::pow(2.0, theta * b / (b - 1.0)), 1.0 / theta);
  rep.fitted_constant = d;
  rep.extras = {{"d", d}, {"k0", k0}, {"g_k0", g0}};

  // Vanishing beyond k0 + d.
  double worst = 0.0;
  for (auto [k, gk] : samples)
    if (k >= k0 + d && gk > 0.0 && -gk < worst) {
      worst = -gk;
      rep.witness = {k, gk};
    }

  // Induction g(k_n) <= g(k0) 2^{-n theta/(b-1)} with k_n = k0 + d - d/2^n,
  // checked wherever a sample falls in (k_{n-1}, k_n].
  int replayed = 0;
  double prev_k = k0;
  for (int n = 0; n <= 60; ++n) {
    double kn = k0 + (d - std::ldexp(d, -n));
    double bound = g0 * std::exp2(-n * theta / (b - 1.0));
    bool resolved = n == 0;
    for (auto [k, gk] : samples)
      if (k > prev_k && k <= kn) resolved = true;
    if (resolved) {
      double g = g_at(kn);
      ++replayed;
      double s = bound - g;
      if (g > bound * (1.0 + 1e-12) && s < worst) {
        worst = s;
        rep.witness = {kn, g};
      }
    }
    prev_k = kn;
  }
  rep.extras.emplace_back("replayed_steps", static_cast<double>(replayed));
  rep.worst_slack = worst;
  rep.passed = worst >= 0.0;
  return rep;
}

/// Random step families g with values in multiples of a quantum m, built
/// greedily on a k-grid containing every k_n so that the hypothesis holds
/// exactly on the samples:
///   g(h_j) = m floor(x_j min(g(h_{j-1}), min_{i<j} C (h_j - h_i)^-theta g(h_i)^b) / m),
/// with x_j uniform in (0.5, 1]. Each family is replayed with check_stampacchia.
inline LemmaReport check_stampacchia_families(int trials, std::uint64_t seed) {
  detail::require(trials >= 1, "check_stampacchia_families: need at least one trial");
  LemmaReport rep;
  rep.lemma = "stampacchia";
  rep.trials = trials;
  std::vector<LemmaReport> res(static_cast<std::size_t>(trials));
  parallel_for(res.size(), [&](std::size_t t) {
    auto rng = trial_rng(seed, t);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double theta = 0.5 + 3.5 * U(rng);
    double b = 1.1 + 1.9 * U(rng);
    double C = std::exp(4.0 * U(rng) - 2.0);
    double k0 = 2.0 * U(rng);
    double quantum = std::exp2(-2.0 - 8.0 * U(rng));
    double g0 = quantum * std::floor((0.5 + 0.5 * U(rng)) / quantum);
    double d = std::pow(C * std::pow(g0, b - 1.0) * std::pow(2.0, theta * b / (b - 1.0)), 1.0 / theta);
    std::vector<double> ks{k0};
    for (int n = 1; n <= 60; ++n) ks.push_back(k0 + (d - std::ldexp(d, -n)));
    for (int j = 0; j < 40; ++j) ks.push_back(k0 + 1.5 * d * U(rng));
    ks.push_back(k0 + d);
    ks.push_back(k0 + 1.5 * d);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    std::vector<std::pair<double, double>> samples{{ks[0], g0}};
    for (std::size_t j = 1; j < ks.size(); ++j) {
      double cap = samples.back().second;
      for (const auto& [k, gk] : samples) cap = std::min(cap, C * std::pow(ks[j] - k, -theta) * std::pow(gk, b));
      // Rounding slack keeps the quantized value strictly under the cap.
      double g = quantum * std::floor((0.5 + 0.5 * U(rng)) * cap * (1.0 - 1e-13) / quantum);
      samples.emplace_back(ks[j], std::max(g, 0.0));
    }
    res[t] = check_stampacchia(std::move(samples), k0, C, theta, b);
  }, 1);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < res.size(); ++t)
    if (res[t].worst_slack < worst) {
      worst = res[t].worst_slack;
      rep.witness = {static_cast<double>(t)};
    }
  double replayed = 0.0;
  for (const auto& r : res) replayed += r.extra("replayed_steps");
  rep.worst_slack = worst;
  rep.extras = {{"mean_replayed_steps", replayed / static_cast<double>(res.size())}};
  rep.passed = worst >= 0.0;
  return rep;
}

/// Level-set check on a computed solution u of the singular problem: builds
/// C from the embedding constant S_theta, samples g(k) = |{u > k}| at every
/// node value and at the induction levels k_n, and replays the lemma. The
/// start level defaults to the k0 of the global bound; any smaller positive
/// level works with C(k) = (||omega||_r S / k^alpha)^{theta/(p-1)}.
inline LemmaReport check_stampacchia_solution(std::span<const double> u, const WeightField& omega, double alpha,
                                              const Kernel& kernel, double theta, double S_theta,
                                              std::optional<double> start = std::nullopt) {
  const double m = kernel.cell_measure();
  const double p = kernel.params().p();
  StampacchiaSetup st = stampacchia_setup(omega, alpha, kernel.params(), theta, S_theta, kernel.grid().discrete_measure());
  if (start) {
    detail::require(*start > 0.0, "check_stampacchia_solution: start level must be positive");
    st.k0 = *start;
    st.C = std::pow(omega.norm_r() * S_theta / std::pow(st.k0, alpha), theta / (p - 1.0));
  }
  double g0 = 0.0;
  for (double x : u)
    if (x > st.k0) g0 += m;
  const double d = std::pow(st.C * std::pow(g0, st.b - 1.0) * std::pow(2.0, theta * st.b / (st.b - 1.0)), 1.0 / theta);
  std::vector<double> extra;
  for (int n = 0; n <= 60; ++n) extra.push_back(st.k0 + (d - std::ldexp(d, -n)));
  extra.push_back(st.k0 + d);
  auto samples = level_set_samples(u, m, st.k0, std::move(extra));
  LemmaReport rep = check_stampacchia(std::move(samples), st.k0, st.C, theta, st.b);
  rep.extras.emplace_back("b", st.b);
  rep.extras.emplace_back("C", st.C);
  rep.extras.emplace_back("u_max", max_abs(u));
  return rep;
}

} // namespace fss
