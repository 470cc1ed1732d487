#include <catch_amalgamated.hpp>

#include "fss/convex_solver.hpp"
#include "fss/property_suite.hpp"

using namespace fss;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Kernel kernel_1d(std::size_t nodes, double s, double p) {
  double h = 1.0 / static_cast<double>(nodes + 1);
  return build_kernel(build_grid(Box::interval(0.0, 1.0), h, 4.0 * h), FracParams(s, p, 1), true);
}

} // namespace

TEST_CASE("q integral closed forms") {
  CHECK_THAT(detail::q_integral(0.0, 1.0, 2.0, 1e-12, nullptr), WithinRel(1.0, 1e-14));
  // 2 int_0^1 t dt = 1.
  CHECK_THAT(2.0 * detail::q_integral(0.0, 1.0, 3.0, 1e-12, nullptr), WithinRel(1.0, 1e-12));
  // p = 1.5: int_0^1 t^{-1/2} dt = 2.
  CHECK_THAT(detail::q_integral(0.0, 1.0, 1.5, 1e-12, nullptr), WithinRel(2.0, 1e-10));
  // Sign change inside: int_0^1 |2t - 1|^{-1/2} dt = 2.
  CHECK_THAT(detail::q_integral(-1.0, 1.0, 1.5, 1e-12, nullptr), WithinRel(2.0, 1e-10));
  CHECK_THAT(detail::q_integral(0.7, 0.7, 3.0, 1e-12, nullptr), WithinRel(0.7, 1e-14));
}

TEST_CASE("elementary lemmas hold with fitted constants") {
  for (double p : {1.5, 2.0, 3.0}) {
    auto vi = check_vector_inequalities(p, 1000, 42);
    CHECK(vi.passed());
    CHECK(vi.upper.worst_slack >= -1e-12);
    CHECK(vi.lower.worst_slack >= -1e-12);
    CHECK(vi.lower.fitted_constant > 0.0);

    Kernel k = kernel_1d(16, 0.5, p);
    auto sm = check_strong_monotonicity(k, 1000, 42);
    CHECK(sm.passed);
    CHECK(sm.fitted_constant > 0.0);

    auto qi = check_q_identity(p, 1000, 42, &k);
    CHECK(qi.passed);
    CHECK(qi.extra("max_identity_error") <= 1e-10);
    CHECK(qi.extra("min_field_pairing") >= -1e-10);

    auto st = check_stampacchia_families(1000, 42);
    CHECK(st.passed);
    CHECK(st.extra("mean_replayed_steps") > 10.0);

    if (p == 2.0) {
      CHECK_THAT(vi.upper.fitted_constant, WithinAbs(1.0, 1e-12));
      CHECK_THAT(vi.lower.fitted_constant, WithinAbs(1.0, 1e-12));
      CHECK_THAT(sm.fitted_constant, WithinAbs(1.0, 1e-12));
    }
  }
}

TEST_CASE("p = 3 orthogonal pair bounds C_p") {
  auto vi = check_vector_inequalities(3.0, 1000, 42);
  CHECK(vi.lower.fitted_constant <= 1.0 / std::sqrt(2.0) + 1e-12);
}

TEST_CASE("lemma reports are reproducible") {
  auto a = check_vector_inequalities(1.5, 300, 9);
  auto b = check_vector_inequalities(1.5, 300, 9);
  CHECK(a.upper.fitted_constant == b.upper.fitted_constant);
  CHECK(a.lower.fitted_constant == b.lower.fitted_constant);
  CHECK(a.upper.witness == b.upper.witness);
  Kernel k = kernel_1d(12, 0.4, 3.0);
  CHECK(check_strong_monotonicity(k, 200, 5).fitted_constant == check_strong_monotonicity(k, 200, 5).fitted_constant);
  auto c = check_vector_inequalities(1.5, 300, 10);
  CHECK(a.upper.fitted_constant != c.upper.fitted_constant);
}

TEST_CASE("Stampacchia lemma examples") {
  // g(k0) = 1, C = 1, theta = 1, b = 2: d = 2^2 = 4.
  std::vector<std::pair<double, double>> s{{0.0, 1.0}, {2.0, 0.25}, {4.0, 0.0}, {5.0, 0.0}};
  auto rep = check_stampacchia(s, 0.0, 1.0, 1.0, 2.0);
  CHECK_THAT(rep.fitted_constant, WithinRel(4.0, 1e-15));
  CHECK(rep.passed);

  auto zero = check_stampacchia({{0.0, 0.0}, {1.0, 0.0}}, 0.0, 1.0, 1.0, 2.0);
  CHECK(zero.passed);
  CHECK(zero.fitted_constant == 0.0);

  CHECK_THROWS_WITH(check_stampacchia({{0.0, 1.0}, {2.0, 0.9}}, 0.0, 1.0, 1.0, 2.0),
                    ContainsSubstring("not a Stampacchia family"));
  CHECK_THROWS_WITH(check_stampacchia({{0.0, 0.5}, {1.0, 0.6}}, 0.0, 1.0, 1.0, 2.0),
                    ContainsSubstring("nonincreasing"));
  CHECK_THROWS_AS(check_stampacchia(s, 0.0, 1.0, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(check_stampacchia(s, -1.0, 1.0, 1.0, 2.0), InvalidArgument);
}

TEST_CASE("level sets of a computed solution") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(20, 0.3, p);
    WeightField omega(Field(k.size(), 1.0), k.cell_measure(), std::numeric_limits<double>::infinity());
    ChainResult r = run_chain(omega, 0.5, k);
    double theta = k.params().p_star();
    double S = embedding_constant(theta, k).value;
    auto global = check_stampacchia_solution(r.u_alpha, omega, 0.5, k, theta, S);
    CHECK(global.passed);
    auto half = check_stampacchia_solution(r.u_alpha, omega, 0.5, k, theta, S, 0.5 * max_abs(r.u_alpha));
    CHECK(half.passed);
    CHECK(half.extra("g_k0") > 0.0);
    CHECK(half.extra("replayed_steps") > 1.0);
  }
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(check_vector_inequalities(1.0, 10, 1), InvalidArgument);
  CHECK_THROWS_AS(check_vector_inequalities(2.0, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(check_q_identity(0.5, 10, 1), InvalidArgument);
  Kernel k = kernel_1d(8, 0.5, 2.0);
  CHECK_THROWS_WITH(check_q_identity(3.0, 10, 1, &k), ContainsSubstring("exponent"));
}
