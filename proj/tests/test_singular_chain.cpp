#include <catch_amalgamated.hpp>

#include "fss/convex_solver.hpp"
#include "fss/singular_chain.hpp"
#include "oracles.hpp"

using namespace fss;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Kernel kernel_1d(std::size_t nodes, double s, double p) {
  double h = 1.0 / static_cast<double>(nodes + 1);
  return build_kernel(build_grid(Box::interval(0.0, 1.0), h, 4.0 * h), FracParams(s, p, 1), true);
}

WeightField constant_weight(const Kernel& k, double value = 1.0) {
  return WeightField(Field(k.size(), value), k.cell_measure(), std::numeric_limits<double>::infinity());
}

WeightField compact_bump(const Kernel& k, double radius = 0.3) {
  Field w(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    double t = std::pow((k.grid().interior[i][0] - 0.5) / radius, 2);
    w[i] = t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
  }
  return WeightField(std::move(w), k.cell_measure(), std::numeric_limits<double>::infinity());
}

} // namespace

TEST_CASE("single-node chain matches bisection") {
  Grid g = build_grid(Box::interval(0.0, 2.0), 1.0, 1.0);
  REQUIRE(g.size() == 1);
  for (double s : {0.3, 0.5, 0.8}) {
    for (double p : {1.5, 2.0, 3.0}) {
      oracle::ScalarSystem sys(s, p);
      Kernel k(g, FracParams(s, p, 1), true);
      REQUIRE_THAT(k.exterior_coefficient(0), WithinRel(sys.e, 1e-14));
      for (double alpha : {0.5, 1.0}) {
        const double w = 0.7;
        WeightField omega({w}, 1.0, std::numeric_limits<double>::infinity());
        ChainResult r = run_chain(omega, alpha, k);
        REQUIRE(r.converged);
        REQUIRE(r.polished);
        for (const auto& lv : r.levels)
          CHECK_THAT(lv.u[0], WithinRel(sys.level(w, lv.n, alpha), 1e-9));
        CHECK_THAT(r.u_alpha[0], WithinRel(sys.limit(w, alpha), 1e-9));
      }
    }
  }
}

TEST_CASE("monotone chain") {
  for (double p : {1.5, 2.0, 3.0}) {
    for (double alpha : {0.5, 1.0}) {
      Kernel k = kernel_1d(24, 0.5, p);
      auto omega = constant_weight(k);
      ChainResult r = run_chain(omega, alpha, k);
      CHECK(r.converged);
      for (std::size_t l = 1; l < r.levels.size(); ++l) {
        for (std::size_t i = 0; i < k.size(); ++i) CHECK(r.levels[l - 1].u[i] <= r.levels[l].u[i] + 1e-8);
        CHECK(r.levels[l].seminorm_p >= r.levels[l - 1].seminorm_p * (1.0 - 1e-10));
        CHECK(r.levels[l].fp_residual <= 1e-9);
        CHECK(r.levels[l].residual <= 1e-7);
      }
      CHECK(r.monotone_violation <= 1e-8);
      CHECK(r.seminorm_violation <= 1e-10);
      // u_alpha lies above every level.
      for (std::size_t i = 0; i < k.size(); ++i) CHECK(r.levels.back().u[i] <= r.u_alpha[i] + 1e-8);
    }
  }
}

TEST_CASE("monotone chain in 2D") {
  Kernel k = build_kernel(build_grid(Box::rectangle({0, 0}, {1, 1}), 1.0 / 9.0, 2.0 / 9.0), FracParams(0.5, 2.0, 2), true);
  auto omega = constant_weight(k);
  ChainResult r = run_chain(omega, 0.5, k);
  CHECK(r.converged);
  CHECK(r.monotone_violation <= 1e-8);
  CHECK(r.barrier_violation <= 1e-8);
  // Symmetric data on a symmetric grid give a symmetric solution.
  const auto& grid = k.grid();
  for (std::size_t i = 0; i < k.size(); ++i) {
    std::size_t mirror = k.size() - 1 - i;
    CHECK_THAT(r.u_alpha[i], WithinRel(r.u_alpha[mirror], 1e-9));
    CHECK(grid.interior[i][0] == Catch::Approx(1.0 - grid.interior[mirror][0]));
  }
}

TEST_CASE("levels are fixed points of T") {
  Kernel k = kernel_1d(16, 0.4, 3.0);
  auto omega = constant_weight(k, 2.0);
  RegularizedProblem prob(omega, 8.0, 0.5);
  LevelResult lv = solve_level(prob, k, Field(k.size(), 0.0));
  Field Tu = fixed_point_T(prob, k, lv.u);
  CHECK(max_abs_diff(Tu, lv.u) <= 1e-9);
  // Plain iteration converges when alpha/(p-1) < 1 and agrees.
  LevelOptions lo;
  lo.picard = true;
  LevelResult pic = solve_level(prob, k, Field(k.size(), 0.0), lo);
  CHECK(max_abs_diff(pic.u, lv.u) <= 1e-8);
  CHECK(pic.fp_iters > 1);
}

TEST_CASE("weight truncation") {
  WeightField w({0.5, 3.0, 10.0}, 0.25, 2.0);
  auto t = truncate_weight(w, 2.0);
  CHECK(t[0] == 0.5);
  CHECK(t[1] == 2.0);
  CHECK(t[2] == 2.0);
  CHECK_THROWS_AS(truncate_weight(w, 0.5), InvalidArgument);
  RegularizedProblem prob(w, 4.0, 0.5);
  CHECK(prob.shift() == 0.25);
  CHECK_THAT(prob.datum(1, 0.75), WithinRel(3.0, 1e-15));
}

TEST_CASE("barrier below every level") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(20, 0.6, p);
    auto omega = compact_bump(k);
    ChainResult r = run_chain(omega, 0.5, k);
    REQUIRE(r.psi.size() == k.size());
    CHECK(r.m_alpha > 0.0);
    for (const auto& lv : r.levels)
      for (std::size_t i = 0; i < k.size(); ++i) CHECK(r.m_alpha * r.psi[i] <= lv.u[i] + 1e-8);
    for (double x : r.psi) CHECK(x > 0.0);
  }
}

TEST_CASE("alpha = 1 energy identity") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(20, 0.5, p);
    auto omega = compact_bump(k);
    ChainResult r = run_chain(omega, 1.0, k);
    CHECK_THAT(seminorm_p(r.u_alpha, k), WithinRel(omega.norm1(), 1e-7));
  }
}

TEST_CASE("L-infinity bound with the discrete embedding constant") {
  for (double p : {1.5, 2.0, 3.0}) {
    for (double alpha : {0.5, 1.0}) {
      Kernel k = kernel_1d(20, 0.3, p);
      auto omega = constant_weight(k);
      ChainResult r = run_chain(omega, alpha, k);
      double theta = k.params().p_star();
      auto S = embedding_constant(theta, k);
      auto rep = linfty_bound_report(r.u_alpha, omega, alpha, k.params(), theta, S.value, k.grid().discrete_measure());
      CHECK(rep.b > 1.0);
      CHECK(rep.holds);
      CHECK(rep.u_max <= rep.bound);
      // Every level obeys the same bound.
      for (const auto& lv : r.levels) CHECK(max_abs(lv.u) <= rep.bound);
    }
  }
  Kernel k = kernel_1d(10, 0.3, 2.0);
  auto omega = WeightField(Field(k.size(), 1.0), k.cell_measure(), 1.5);
  CHECK_THROWS_WITH(linfty_bound_report(Field(k.size(), 1.0), omega, 0.5, k.params(), 2.5, 1.0, 1.0),
                    ContainsSubstring("theta too small"));
}

TEST_CASE("a-priori seminorm bound") {
  for (double alpha : {0.5, 1.0}) {
    Kernel k = kernel_1d(16, 0.3, 2.0);
    auto omega = constant_weight(k).with_r(r_alpha(alpha, k.params()));
    ChainOptions co;
    co.apriori_bound = true;
    ChainResult r = run_chain(omega, alpha, k, co);
    REQUIRE(r.apriori.has_value());
    CHECK(r.apriori->lhs <= r.apriori->rhs * (1.0 + 1e-10));
    if (alpha == 1.0) CHECK_THAT(r.apriori->rhs, WithinRel(omega.norm1(), 1e-15));
  }
}

TEST_CASE("alpha above one needs a compactly supported weight") {
  Kernel k = kernel_1d(20, 0.5, 2.0);
  CHECK_THROWS_WITH(run_chain(constant_weight(k), 1.5, k), ContainsSubstring("compactly supported"));
  auto omega = compact_bump(k);
  CHECK(compactly_supported(omega, k.grid()));
  ChainResult r = run_chain(omega, 1.5, k);
  CHECK(r.converged);
  CHECK(r.monotone_violation <= 1e-8);
  CHECK(r.ufinite_seminorm.size() == r.levels.size());
  for (double x : r.ufinite_seminorm) CHECK(std::isfinite(x));
  auto wr = weak_residual(r.u_alpha, omega, 1.5, k, 50, 3);
  CHECK(wr.max_residual <= 1e-6);
}

TEST_CASE("chains from different starts and schedules agree") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(20, 0.5, p);
    auto omega = compact_bump(k, 0.4);
    ChainResult a = run_chain(omega, 0.5, k);
    ChainOptions co;
    co.schedule = {1.0, 3.0, 10.0, 100.0, 1e4, 1e6, 1e8, 1e10};
    co.init = Field(k.size(), 0.3);
    ChainResult b = run_chain(omega, 0.5, k, co);
    CHECK(max_abs_diff(a.u_alpha, b.u_alpha) <= 1e-6);
    ChainResult c = run_chain(omega, 0.5, k);
    CHECK(a.u_alpha == c.u_alpha);
  }
}

TEST_CASE("weak residual of the limit") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(20, 0.5, p);
    auto omega = constant_weight(k);
    ChainResult r = run_chain(omega, 0.5, k);
    auto wr = weak_residual(r.u_alpha, omega, 0.5, k, 100, 7);
    CHECK(wr.trials == 100);
    CHECK(wr.max_residual <= 1e-6);
    CHECK(wr.min_bound_slack >= -1e-8);
  }
  Kernel k = kernel_1d(8, 0.5, 2.0);
  Field bad(k.size(), 1.0);
  bad[3] = 0.0;
  CHECK_THROWS_WITH(weak_residual(bad, constant_weight(k), 0.5, k, 10, 1), ContainsSubstring("interior-positive"));
}

TEST_CASE("level-set samples") {
  Field u{0.1, 0.5, 0.3, 0.5};
  auto s = level_set_samples(u, 0.5, 0.2, {0.4});
  // Breakpoints 0.2, 0.3, 0.4, 0.5.
  REQUIRE(s.size() == 4);
  CHECK(s[0] == std::make_pair(0.2, 1.5));
  CHECK(s[1] == std::make_pair(0.3, 1.0));
  CHECK(s[2] == std::make_pair(0.4, 1.0));
  CHECK(s[3] == std::make_pair(0.5, 0.0));
}

TEST_CASE("Stampacchia constants") {
  CHECK_THAT(bound_constant(1.0, 2.0), WithinRel(2.0, 1e-15));
  CHECK_THAT(stampacchia_exponent(6.0, std::numeric_limits<double>::infinity(), 2.0), WithinRel(5.0, 1e-15));
  Kernel k = kernel_1d(10, 0.3, 2.0);
  auto omega = constant_weight(k);
  auto st = stampacchia_setup(omega, 0.5, k.params(), 5.0, 0.1, 1.0);
  CHECK(st.b == 4.0);
  CHECK(st.k0 > 0.0);
  CHECK(st.C > 0.0);
  CHECK(st.d_max > 0.0);
}

TEST_CASE("default schedule") {
  auto s = default_schedule(5);
  CHECK(s == std::vector<double>{1, 2, 4, 8, 16});
  Kernel k = kernel_1d(8, 0.5, 2.0);
  ChainOptions co;
  co.schedule = {2.0, 1.5};
  CHECK_THROWS_WITH(run_chain(constant_weight(k), 0.5, k, co), ContainsSubstring("increasing"));
}

TEST_CASE("weak residual detects perturbations") {
  Grid g = build_grid(Box::interval(0.0, 2.0), 1.0, 1.0);
  Kernel k(g, FracParams(0.5, 2.0, 1), true);
  WeightField omega({0.7}, 1.0, std::numeric_limits<double>::infinity());
  oracle::ScalarSystem sys(0.5, 2.0);
  Field u{sys.limit(0.7, 0.5)};
  CHECK(weak_residual(u, omega, 0.5, k, 100, 1).max_residual <= 1e-9);
  Field bumped{u[0] + 0.1};
  CHECK(weak_residual(bumped, omega, 0.5, k, 100, 1).max_residual >= 1e-3);

  Kernel k1 = kernel_1d(24, 0.5, 3.0);
  auto w = compact_bump(k1);
  ChainResult r = run_chain(w, 0.5, k1);
  auto wr = weak_residual(r.u_alpha, w, 0.5, k1, 1000, 5);
  CHECK(wr.min_bound_slack >= -1e-10);
  Field shifted = r.u_alpha;
  for (double& x : shifted) x += 0.1;
  CHECK(weak_residual(shifted, w, 0.5, k1, 100, 5).max_residual >= 1e-3);
}
