#include <catch_amalgamated.hpp>

#include "fss/grid.hpp"
#include "fss/kernel.hpp"
#include "oracles.hpp"

using namespace fss;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

TEST_CASE("1D grid nodes and collar") {
  Grid g = build_grid(Box::interval(0.0, 1.0), 0.25, 0.5);
  REQUIRE(g.size() == 3);
  CHECK(g.interior[0][0] == 0.25);
  CHECK(g.interior[2][0] == 0.75);
  // Lattice -0.5 .. 1.5 has 9 points; the boundary points 0 and 1 belong to the collar.
  CHECK(g.collar.size() == 6);
  CHECK(g.shape[0] == 3);
  CHECK(g.shape[1] == 1);
  CHECK(g.cell_measure() == 0.25);
  CHECK(g.discrete_measure() == 0.75);
  CHECK(g.collar_distance(0) == 0.75);
  CHECK(g.boundary_distance(1) == 0.5);
}

TEST_CASE("2D grid is lexicographic") {
  Grid g = build_grid(Box::rectangle({0.0, 0.0}, {1.0, 2.0}), 0.25, 0.25);
  CHECK(g.shape[0] == 3);
  CHECK(g.shape[1] == 7);
  REQUIRE(g.size() == 21);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.interior[i - 1] < g.interior[i]);
  CHECK(g.cell_measure() == 0.0625);
  // Enlarged box has 7 x 11 lattice points.
  CHECK(g.collar.size() == 77 - 21);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_WITH(build_grid(Box::interval(0.0, 1.0), 2.0, 2.0), ContainsSubstring("degenerate grid"));
  CHECK_THROWS_WITH(build_grid(Box::interval(0.0, 1.0), 0.25, 0.1), ContainsSubstring("collar_width"));
  CHECK_THROWS_AS(build_grid(Box::interval(1.0, 0.0), 0.25, 0.5), InvalidArgument);
  CHECK_THROWS_AS(build_grid(Box::interval(0.0, 1.0), -0.1, 0.5), InvalidArgument);
}

TEST_CASE("fractional parameters") {
  CHECK_THROWS_WITH(FracParams(1.2, 2.0, 1), ContainsSubstring("params.s"));
  CHECK_THROWS_WITH(FracParams(0.5, 1.0, 1), ContainsSubstring("params.p"));
  FracParams sub(0.3, 2.0, 1);
  CHECK(sub.subcritical());
  CHECK_THAT(sub.p_star(), WithinRel(5.0, 1e-15));
  FracParams crit(0.5, 2.0, 1);
  CHECK_FALSE(crit.subcritical());
  CHECK(std::isinf(crit.p_star()));
  FracParams two(0.5, 3.0, 2);
  CHECK_THAT(two.p_star(), WithinRel(12.0, 1e-15));
}

TEST_CASE("r_alpha and Holder conjugates") {
  CHECK(holder_conjugate(2.0) == 2.0);
  CHECK(std::isinf(holder_conjugate(1.0)));
  CHECK(holder_conjugate(std::numeric_limits<double>::infinity()) == 1.0);
  FracParams sub(0.3, 2.0, 1);
  CHECK(r_alpha(1.0, sub) == 1.0);
  // (p_star/(1-alpha))' with p_star = 5, alpha = 1/2: 10' = 10/9.
  CHECK_THAT(r_alpha(0.5, sub), WithinRel(10.0 / 9.0, 1e-15));
  FracParams sup(0.8, 2.0, 1);
  CHECK_THAT(r_alpha(0.25, sup), WithinRel(4.0, 1e-15));
  CHECK_THROWS_AS(r_alpha(1.5, sub), InvalidArgument);
}

TEST_CASE("kernel weights match the closed form") {
  for (double s : {0.3, 0.5, 0.8}) {
    for (double p : {1.5, 2.0, 3.0}) {
      Grid g = build_grid(Box::interval(-1.0, 1.0), 0.125, 0.375);
      Kernel k(g, FracParams(s, p, 1), true);
      for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(k.weight(i, i) == 0.0);
        for (std::size_t j = 0; j < g.size(); ++j) {
          CHECK(k.weight(i, j) == k.weight(j, i));
          if (i != j)
            CHECK_THAT(k.weight(i, j), WithinRel(oracle::weight(g.interior[i], g.interior[j], 1, g.h, s, p), 1e-14));
        }
        CHECK_THAT(k.exterior_coefficient(i), WithinRel(oracle::exterior(g, i, s, p, true), 1e-13));
      }
    }
  }
}

TEST_CASE("2D kernel exterior coefficient") {
  Grid g = build_grid(Box::rectangle({0.0, 0.0}, {1.0, 1.0}), 0.125, 0.25);
  Kernel k(g, FracParams(0.4, 2.5, 2), true);
  for (std::size_t i = 0; i < g.size(); i += 5)
    CHECK_THAT(k.exterior_coefficient(i), WithinRel(oracle::exterior(g, i, 0.4, 2.5, true), 1e-12));
  Kernel no_tail(g, FracParams(0.4, 2.5, 2), false);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(no_tail.tail(i) == 0.0);
}

TEST_CASE("tail integral against numerical quadrature") {
  // 1D: int_{|y|>R} |y|^{-1-sp} dy;  2D: 2 pi int_R^inf r^{-1-sp} dr.
  FracParams p1(0.5, 2.0, 1), p2(0.5, 2.0, 2);
  const double R = 0.7;
  // Substitute r = R / t, dr = R/t^2 dt, on t in (0,1]: int_0^1 R^{-sp} t^{sp-1} dt.
  auto radial = [&](double sp) {
    const int n = 200000;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      double t = (k + 0.5) / n;
      acc += std::pow(R, -sp) * std::pow(t, sp - 1.0) / n;
    }
    return acc;
  };
  CHECK_THAT(Kernel::tail_integral(R, p1), WithinRel(2.0 * radial(1.0), 1e-6));
  CHECK_THAT(Kernel::tail_integral(R, p2), WithinRel(2.0 * std::numbers::pi * radial(1.0), 1e-6));
}

TEST_CASE("explicit weight tables") {
  Grid g = build_grid(Box::interval(0.0, 2.0), 1.0, 1.0);
  REQUIRE(g.size() == 1);
  Kernel k = Kernel::from_weights(g, FracParams(0.5, 2.0, 1), {0.0}, {1.0}, {0.0});
  CHECK(k.exterior_coefficient(0) == 1.0);
  CHECK_FALSE(k.tail_enabled());
  Grid g2 = build_grid(Box::interval(0.0, 3.0), 1.0, 1.0);
  CHECK_THROWS_WITH(Kernel::from_weights(g2, FracParams(0.5, 2.0, 1), {0.0, 1.0, 2.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}),
                    ContainsSubstring("symmetric"));
  CHECK_THROWS_WITH(Kernel::from_weights(g2, FracParams(0.5, 2.0, 1), {1.0, 1.0, 1.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}),
                    ContainsSubstring("self pairs"));
  CHECK_THROWS_AS(Kernel(g, FracParams(0.5, 2.0, 2), true), InvalidArgument);
}

TEST_CASE("pair weights in global numbering") {
  Grid g = build_grid(Box::interval(0.0, 1.0), 0.25, 0.5);
  Kernel k(g, FracParams(0.5, 2.0, 1), false);
  CHECK(k.node_count() == 9);
  CHECK(k.pair_weight(0, 1) == k.weight(0, 1));
  double coll = 0.0;
  for (std::size_t c = 3; c < 9; ++c) coll += k.pair_weight(0, c);
  CHECK_THAT(k.collar_weight(0), WithinRel(coll, 1e-14));
  CHECK_THROWS_AS(k.pair_weight(2, 2), InvalidArgument);
}
