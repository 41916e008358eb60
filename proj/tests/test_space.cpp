#include "doctest.h"

#include <cmath>
#include <map>
#include <numbers>

#include "gibbslab/space.hpp"
#include "oracles.hpp"

using namespace gibbslab;

namespace {

std::vector<StateSpace> all_spaces() {
  return {StateSpace::circle(), StateSpace::torus2(), StateSpace::sphere2(),
          StateSpace::interval(), StateSpace::finite_set(5)};
}

}  // namespace

TEST_CASE("geodesic distances match closed forms") {
  const auto circle = StateSpace::circle();
  CHECK(distance(circle, {0, 0, 0}, {std::numbers::pi, 0, 0}) ==
        doctest::Approx(std::numbers::pi));
  CHECK(distance(circle, {0.25, 0, 0}, {kTwoPi - 0.25, 0, 0}) ==
        doctest::Approx(0.5));

  const auto sphere = StateSpace::sphere2();
  CHECK(distance(sphere, {0, 0, 1}, {0, 0, -1}) ==
        doctest::Approx(std::numbers::pi));
  CHECK(distance(sphere, {1, 0, 0}, {0, 1, 0}) ==
        doctest::Approx(std::numbers::pi / 2));

  const auto fin = StateSpace::finite_set(3);
  CHECK(distance(fin, {1, 0, 0}, {1, 0, 0}) == 0.0);
  CHECK(distance(fin, {1, 0, 0}, {2, 0, 0}) == 1.0);

  CHECK_THROWS_AS(distance(StateSpace::interval(), {1.5, 0, 0}, {0, 0, 0}),
                  DomainError);
}

TEST_CASE("metric axioms on random triples") {
  for (const auto& space : all_spaces()) {
    auto pts = sample_base(space, 99, 3000);
    for (size_t t = 0; t + 2 < pts.size(); t += 3) {
      const Point &a = pts[t], &b = pts[t + 1], &c = pts[t + 2];
      const double dab = space.distance(a, b);
      const double dba = space.distance(b, a);
      const double dac = space.distance(a, c);
      const double dcb = space.distance(c, b);
      REQUIRE(dab >= 0);
      REQUIRE(dab == dba);  // symmetry is exact
      REQUIRE(space.distance(a, a) == 0.0);
      REQUIRE(dab <= dac + dcb + 1e-12);
    }
  }
}

TEST_CASE("grid weights are normalized cell masses") {
  SUBCASE("uniform circle") {
    const auto g = build_grid(StateSpace::circle(), 4);
    REQUIRE(g.cell_count() == 4);
    for (double w : g.weights) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("interval with linear density") {
    auto space = StateSpace::interval();
    space.base_density = [](const Point& p) { return 2.0 * p[0]; };
    const auto g = build_grid(space, 2);
    CHECK(g.weights[0] == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(g.weights[1] == doctest::Approx(0.75).epsilon(1e-13));
  }
  SUBCASE("finite set") {
    const auto g = build_grid(StateSpace::finite_set(3), 7);
    REQUIRE(g.cell_count() == 3);
    for (double w : g.weights) CHECK(w == doctest::Approx(1.0 / 3));
  }
  SUBCASE("resolution below 2 is rejected") {
    CHECK_THROWS_AS(build_grid(StateSpace::circle(), 1), ConfigError);
  }
  SUBCASE("sums to one") {
    for (const auto& space : all_spaces()) {
      const auto g = build_grid(space, 16);
      double total = 0;
      for (double w : g.weights) {
        CHECK(w > 0);
        total += w;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("base sampling is deterministic and hits the right cells") {
  SUBCASE("same seed, same draws") {
    const auto space = StateSpace::torus2();
    const auto a = sample_base(space, 1234, 100);
    const auto b = sample_base(space, 1234, 100);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("degenerate finite weights") {
    const auto space = StateSpace::finite_set(2, {1.0, 0.0});
    for (const Point& p : sample_base(space, 7, 500)) CHECK(p[0] == 0.0);
  }
  SUBCASE("empirical frequencies match grid weights (chi-square)") {
    for (const auto& space : all_spaces()) {
      const int res = space.dim() == 2 ? 8 : 16;
      const auto grid = build_grid(space, res);
      const long n = 100000;
      const auto pts = sample_base(space, 4242, n);
      std::vector<long> counts(grid.cell_count(), 0);
      for (const Point& p : pts) ++counts[grid.cell_of(p)];
      const double p = oracles::chi_square_p(counts, grid.weights, n);
      CHECK(p > 1e-6);
    }
  }
  SUBCASE("tabulated density is sampled cell-first") {
    auto space = StateSpace::interval();
    space.base_density = [](const Point& p) { return 2.0 * p[0]; };
    const auto grid = build_grid(space, 4);
    const long n = 100000;
    const auto pts = sample_base(space, 99, n);
    std::vector<long> counts(grid.cell_count(), 0);
    for (const Point& p : pts) ++counts[grid.cell_of(p)];
    CHECK(oracles::chi_square_p(counts, grid.weights, n) > 1e-6);
  }
}

TEST_CASE("frostman scan separates regular from atomic base measures") {
  const std::vector<double> radii{1.0, 0.5, 0.25, 0.125, 0.0625};

  SUBCASE("circle at the right exponent") {
    const auto grid = build_grid(StateSpace::circle(), 512);
    const auto rep = frostman_check(StateSpace::circle(), grid, 1.0, radii);
    CHECK(rep.pass);
    // mu0(B_R) = R/pi for the uniform circle.
    for (double r : rep.max_ratio)
      CHECK(r == doctest::Approx(1.0 / std::numbers::pi).epsilon(0.12));
  }
  SUBCASE("circle at too large an exponent") {
    const auto grid = build_grid(StateSpace::circle(), 512);
    const auto rep = frostman_check(StateSpace::circle(), grid, 2.0, radii);
    CHECK_FALSE(rep.pass);
  }
  SUBCASE("sphere carries exponent two") {
    const auto grid = build_grid(StateSpace::sphere2(), 24);
    const std::vector<double> cap_radii{1.0, 0.7, 0.5, 0.35};
    const auto at_two =
        frostman_check(StateSpace::sphere2(), grid, 2.0, cap_radii);
    CHECK(at_two.pass);
    // mu0(B_R) = (1 - cos R)/2 ~ R^2/4 on the unit sphere.
    for (size_t i = 0; i < cap_radii.size(); ++i) {
      const double r = cap_radii[i];
      const double exact = 0.5 * (1.0 - std::cos(r)) / (r * r);
      CHECK(at_two.max_ratio[i] == doctest::Approx(exact).epsilon(0.2));
    }
    // Above the true exponent the ratio grows like R^{2-t}; t = 4 makes the
    // growth cross the factor-10 trigger within this radius span.
    const auto at_four =
        frostman_check(StateSpace::sphere2(), grid, 4.0, {1.0, 0.6, 0.3});
    CHECK_FALSE(at_four.pass);
  }
  SUBCASE("atoms always fail") {
    const auto space = StateSpace::finite_set(4);
    const auto grid = build_grid(space, 2);
    const auto rep =
        frostman_check(space, grid, 1.0, {0.9, 0.5, 0.1, 0.01, 0.001});
    CHECK_FALSE(rep.pass);
  }
  SUBCASE("configuration errors") {
    const auto grid = build_grid(StateSpace::circle(), 32);
    CHECK_THROWS_AS(frostman_check(StateSpace::circle(), grid, 1.0, {}),
                    ConfigError);
    CHECK_THROWS_AS(
        frostman_check(StateSpace::circle(), grid, 1.0, {0.1, 0.5}),
        ConfigError);
  }
}
