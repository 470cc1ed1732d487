#include <catch_amalgamated.hpp>

#include "fss/convex_solver.hpp"
#include "fss/nonlocal_ops.hpp"
#include "fss/random_fields.hpp"
#include "oracles.hpp"

using namespace fss;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Kernel kernel_1d(double s, double p, bool tail = true) {
  return build_kernel(build_grid(Box::interval(0.0, 1.0), 1.0 / 24.0, 0.25), FracParams(s, p, 1), tail);
}

} // namespace

TEST_CASE("signed powers") {
  CHECK(detail::signed_power(0.0, 1.5) == 0.0);
  CHECK(detail::signed_power(-3.0, 2.0) == -3.0);
  CHECK_THAT(detail::signed_power(-4.0, 3.0), WithinRel(-16.0, 1e-15));
  CHECK_THAT(detail::signed_power(4.0, 1.5), WithinRel(0.5 * 4.0, 1e-15));
}

TEST_CASE("seminorm equals a brute-force pair sum") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(0.4, p);
    for (std::uint64_t t = 0; t < 5; ++t) {
      Field u = random_test_field(k.grid(), 3, t);
      CHECK_THAT(seminorm_p(u, k), WithinRel(oracle::seminorm_p(k.grid(), u, 0.4, p, true), 1e-12));
    }
  }
  Kernel k2 = build_kernel(build_grid(Box::rectangle({0, 0}, {1, 1}), 0.125, 0.25), FracParams(0.6, 2.5, 2), true);
  Field u = random_test_field(k2.grid(), 5, 9);
  CHECK_THAT(seminorm_p(u, k2), WithinRel(oracle::seminorm_p(k2.grid(), u, 0.6, 2.5, true), 1e-12));
}

TEST_CASE("seminorm homogeneity and zero field") {
  Kernel k = kernel_1d(0.5, 3.0);
  Field z(k.size(), 0.0);
  CHECK(seminorm_p(z, k) == 0.0);
  Field u = random_test_field(k.grid(), 1, 0);
  Field v = u;
  for (double& x : v) x *= -2.5;
  CHECK_THAT(seminorm_p(v, k), WithinRel(std::pow(2.5, 3.0) * seminorm_p(u, k), 1e-13));
  CHECK_THAT(seminorm(u, k), WithinRel(std::cbrt(seminorm_p(u, k)), 1e-14));
  CHECK_THROWS_AS(seminorm_p(Field(3, 1.0), k), InvalidArgument);
}

TEST_CASE("operator matches the pairing identity") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(0.3, p);
    for (std::uint64_t t = 0; t < 20; ++t) {
      Field u = random_test_field(k.grid(), 17, 2 * t);
      Field v = random_test_field(k.grid(), 17, 2 * t + 1);
      Field Au = apply_operator(u, k);
      double lhs = dot(Au, v);
      double rhs = pairing(u, v, k);
      CHECK_THAT(lhs, WithinRel(rhs, 1e-10) || WithinAbs(rhs, 1e-12));
      CHECK_THAT(pairing(u, u, k), WithinRel(seminorm_p(u, k), 1e-12));
    }
  }
}

TEST_CASE("operator matches finite differences of the energy") {
  for (double p : {2.0, 2.5, 3.0}) {
    Kernel k = kernel_1d(0.5, p);
    Field u = random_test_field(k.grid(), 23, 4);
    Field Au = apply_operator(u, k);
    auto E = [&](const Field& v) { return seminorm_p(v, k) / p; };
    for (std::size_t i = 0; i < k.size(); ++i) {
      double step = 1e-6;
      Field up = u, dn = u;
      up[i] += step;
      dn[i] -= step;
      double fd = (E(up) - E(dn)) / (2.0 * step);
      CHECK_THAT(fd, WithinRel(Au[i], 1e-5));
    }
  }
}

TEST_CASE("weight field norms") {
  Grid g = build_grid(Box::interval(0.0, 1.0), 0.25, 0.5);
  WeightField w({1.0, 2.0, 3.0}, g.cell_measure(), 2.0);
  CHECK_THAT(w.norm1(), WithinRel(1.5, 1e-15));
  CHECK_THAT(w.norm_r(), WithinRel(std::sqrt(0.25 * 14.0), 1e-15));
  CHECK(w.max() == 3.0);
  CHECK(w.norm(std::numeric_limits<double>::infinity()) == 3.0);
  CHECK_THROWS_WITH(WeightField({0.0, 0.0, 0.0}, 0.25, 2.0), ContainsSubstring("vanish identically"));
  CHECK_THROWS_AS(WeightField({1.0, -1.0, 0.0}, 0.25, 2.0), InvalidArgument);
  CHECK_THROWS_AS(WeightField({1.0}, 0.25, 0.5), InvalidArgument);
  CHECK(w.with_r(4.0).r() == 4.0);
}

TEST_CASE("weighted means and the log functional") {
  WeightField w({1.0, 3.0}, 0.5, 1.0);
  Field v{2.0, 8.0};
  // q-mean (sum m w |v|^q / ||w||_1)^{1/q}
  double q = 0.5;
  double expect = std::pow((0.5 * std::sqrt(2.0) + 1.5 * std::sqrt(8.0)) / 2.0, 1.0 / q);
  CHECK_THAT(weighted_qmean(v, w, q), WithinRel(expect, 1e-14));
  // Small q approaches the geometric mean.
  double geo = std::exp((0.5 * std::log(2.0) + 1.5 * std::log(8.0)) / 2.0);
  CHECK_THAT(weighted_qmean(v, w, 1e-9), WithinRel(geo, 1e-8));
  CHECK_THAT(log_functional(v, w), WithinRel(0.5 * std::log(2.0) + 1.5 * std::log(8.0), 1e-15));
  Field z{0.0, 1.0};
  CHECK(log_functional(z, w) == -std::numeric_limits<double>::infinity());
  // A zero outside the support of w does not matter.
  WeightField w2({0.0, 3.0}, 0.5, 1.0);
  CHECK(std::isfinite(log_functional(z, w2)));
}

TEST_CASE("discrete norms") {
  Field u{1.0, -2.0, 2.0};
  CHECK_THAT(norm_r(u, 0.5, 2.0), WithinRel(std::sqrt(4.5), 1e-15));
  CHECK(norm_r(u, 0.5, std::numeric_limits<double>::infinity()) == 2.0);
  CHECK(max_abs(u) == 2.0);
  CHECK(max_abs_diff(u, Field{1.0, 1.0, 1.0}) == 3.0);
  CHECK(weighted_sum(Field{1.0, 2.0, 3.0}, u, 0.5) == 0.5 * (1.0 - 4.0 + 6.0));
}

TEST_CASE("random fields are reproducible") {
  Grid g = build_grid(Box::interval(0.0, 1.0), 1.0 / 16.0, 0.25);
  CHECK(random_test_field(g, 5, 3) == random_test_field(g, 5, 3));
  CHECK(random_test_field(g, 5, 3) != random_test_field(g, 5, 4));
  for (double x : random_test_field(g, 5, 3)) CHECK(std::abs(x) <= 1.0);
  auto pos = random_positive_field(10, 1, 1);
  for (double x : pos) CHECK(x >= 0.05);
}

TEST_CASE("sign changes strictly lower the seminorm of |u|") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(0.5, p);
    for (std::uint64_t t = 0; t < 50; ++t) {
      Field u = random_test_field(k.grid(), 31, t);
      Field a = u;
      for (double& x : a) x = std::abs(x);
      bool pos = std::any_of(u.begin(), u.end(), [](double x) { return x > 0.0; });
      bool neg = std::any_of(u.begin(), u.end(), [](double x) { return x < 0.0; });
      if (pos && neg)
        CHECK(seminorm_p(a, k) < seminorm_p(u, k));
      else
        CHECK_THAT(seminorm_p(a, k), WithinRel(seminorm_p(u, k), 1e-12));
    }
    Field one(k.size(), 0.5);
    CHECK_THAT(seminorm_p(one, k), WithinRel(seminorm_p(Field(k.size(), -0.5), k), 1e-12));
  }
}

TEST_CASE("pairing homogeneity and the triangle inequality") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(0.4, p);
    for (std::uint64_t t = 0; t < 50; ++t) {
      Field u = random_test_field(k.grid(), 41, 2 * t), v = random_test_field(k.grid(), 41, 2 * t + 1);
      Field ku = u;
      for (double& x : ku) x *= -1.7;
      double expect = -std::pow(1.7, p - 1.0) * pairing(u, v, k);
      CHECK_THAT(pairing(ku, v, k), WithinRel(expect, 1e-12) || WithinAbs(expect, 1e-14));
      Field w(u.size());
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = u[i] + v[i];
      CHECK(seminorm(w, k) <= seminorm(u, k) + seminorm(v, k) + 1e-12);
    }
  }
}

TEST_CASE("discrete Poincare inequality") {
  for (double p : {1.5, 2.0, 3.0}) {
    Kernel k = kernel_1d(0.5, p);
    // Best constant over all fields; the largest ratio over basis fields can only be smaller.
    double C = embedding_constant(p, k).value;
    double basis = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      Field e(k.size(), 0.0);
      e[i] = 1.0;
      basis = std::max(basis, std::pow(norm_r(e, k.cell_measure(), p), p) / seminorm_p(e, k));
    }
    CHECK(basis <= C * (1.0 + 1e-10));
    for (std::uint64_t t = 0; t < 1000; ++t) {
      Field u = random_test_field(k.grid(), 53, t);
      CHECK(std::pow(norm_r(u, k.cell_measure(), p), p) <= C * seminorm_p(u, k) * (1.0 + 1e-10));
    }
  }
}
