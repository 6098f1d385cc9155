#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lyaplab/energy.hpp"

using namespace lyaplab;

namespace {

EnergyParams params_around(double center, double radius, double delta = 0.25) {
  EnergyParams p;
  p.delta = delta;
  p.u1 = Arc{center, radius};
  return p;
}

}  // namespace

TEST_CASE("arcs wrap mod pi") {
  const Arc a{0.05, 0.2};
  CHECK(a.contains(0.0));
  CHECK(a.contains(0.2));
  CHECK(a.contains(kPi - 0.1));  // wraps below zero
  CHECK_FALSE(a.contains(0.3));
  CHECK_FALSE(a.contains(kPi / 2.0));
  const Arc s = a.scaled(0.5);
  CHECK(s.radius == 0.1);
  CHECK(s.center == a.center);
}

TEST_CASE("projective distance has diameter one") {
  CHECK_THAT(projective_distance({0.0}, {kPi / 2.0}),
             Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK_THAT(projective_distance({0.1}, {0.1}),
             Catch::Matchers::WithinAbs(0.0, 1e-15));
  // wrapping: 0 and pi - 0.1 are 0.1 apart in angle
  CHECK_THAT(projective_distance({0.0}, {kPi - 0.1}),
             Catch::Matchers::WithinAbs(0.1 / (kPi / 2.0), 1e-13));
  CHECK(projective_distance({0.3}, {1.2}) ==
        projective_distance({1.2}, {0.3}));
}

TEST_CASE("energy kernel cases") {
  const EnergyParams p = params_around(1.0, 0.3);
  SECTION("outside U1 the kernel is one") {
    CHECK(energy_kernel({0.1}, {1.0}, p) == 1.0);
    CHECK(energy_kernel({1.0}, {0.1}, p) == 1.0);
    CHECK(energy_kernel({0.1}, {0.2}, p) == 1.0);
  }
  SECTION("inside U1 the kernel is the negative power of distance") {
    const double d = projective_distance({0.9}, {1.1});
    CHECK_THAT(energy_kernel({0.9}, {1.1}, p),
               Catch::Matchers::WithinAbs(std::pow(d, -0.25), 1e-13));
  }
  SECTION("coincident points inside U1 are infinite") {
    CHECK(std::isinf(energy_kernel({1.0}, {1.0}, p)));
  }
  SECTION("delta steepens the kernel") {
    const EnergyParams p2 = params_around(1.0, 0.3, 0.5);
    CHECK(energy_kernel({0.95}, {1.05}, p2) >
          energy_kernel({0.95}, {1.05}, p));
  }
}

TEST_CASE("energy parameter validation") {
  EnergyParams p = params_around(1.0, 0.3);
  CHECK_NOTHROW(p.validate());
  p.delta = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.delta = 1.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.delta = 0.25;
  p.u1.radius = kPi / 4.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.u1.radius = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("grid couplings") {
  ProjectiveGrid grid(16);
  GridMeasure a(grid), b(grid);
  a.mass(2) = 0.25;
  a.mass(7) = 0.75;
  b.mass(4) = 0.5;
  b.mass(11) = 0.5;
  const GridCoupling prod = GridCoupling::product(a, b);

  SECTION("product has the declared marginals") {
    CHECK_NOTHROW(prod.check_marginals(a, b));
    CHECK_THAT(prod.total(), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK_THAT(prod.cell(2, 4), Catch::Matchers::WithinAbs(0.125, 1e-15));
  }

  SECTION("marginal mismatch is reported with the bin") {
    GridMeasure c(grid);
    c.mass(0) = 1.0;
    CHECK_THROWS_MATCHES(prod.check_marginals(c, b), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("row")));
  }

  SECTION("symmetrization") {
    GridCoupling xi(grid);
    xi.cell(1, 3) = 0.6;
    xi.cell(3, 1) = 0.4;
    CHECK_FALSE(xi.is_symmetric());
    const GridCoupling sym = xi.symmetrized();
    CHECK(sym.is_symmetric());
    CHECK_THAT(sym.cell(1, 3), Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(sym.total(), Catch::Matchers::WithinAbs(xi.total(), 1e-15));
  }
}

TEST_CASE("coupling energy") {
  ProjectiveGrid grid(16);
  const double h = grid.width();
  // U1 around the center of bin 8, covering bins 7..9
  const EnergyParams p = params_around(grid.center(8).theta, 1.6 * h);

  SECTION("mass wholly outside U1 integrates to the total") {
    GridCoupling xi(grid);
    xi.cell(0, 1) = 0.3;
    xi.cell(2, 2) = 0.7;  // same bin, but outside U1: fine
    CHECK_THAT(coupling_energy(xi, p), Catch::Matchers::WithinAbs(1.0, 1e-13));
  }

  SECTION("same-bin mass inside U1 is infinite") {
    GridCoupling xi(grid);
    xi.cell(8, 8) = 0.1;
    xi.cell(0, 1) = 0.9;
    CHECK(std::isinf(coupling_energy(xi, p)));
  }

  SECTION("off-diagonal mass inside U1 matches the kernel sum") {
    GridCoupling xi(grid);
    xi.cell(7, 9) = 0.4;
    xi.cell(8, 0) = 0.6;  // row inside U1, column outside: kernel one
    const double d = projective_distance(grid.center(7), grid.center(9));
    const double want = 0.4 * std::pow(d, -0.25) + 0.6;
    CHECK_THAT(coupling_energy(xi, p), Catch::Matchers::WithinAbs(want, 1e-13));
  }

  SECTION("kernel asymmetry of the definition is respected") {
    // row outside U1 counts as one even when the column is inside
    GridCoupling xi(grid);
    xi.cell(0, 8) = 1.0;
    CHECK_THAT(coupling_energy(xi, p), Catch::Matchers::WithinAbs(1.0, 1e-13));
  }
}

TEST_CASE("fat atom dichotomy") {
  ProjectiveGrid grid(32);
  const EnergyParams p = params_around(grid.center(10).theta, 3.0 * grid.width());

  SECTION("more than half the mass in one U1 bin is infinite") {
    GridMeasure eta(grid);
    eta.mass(10) = 0.6;
    eta.mass(0) = 0.4;
    CHECK(fat_atom_check(eta, p) == FatAtomStatus::kInfinite);
  }

  SECTION("strictly less than half everywhere is finite") {
    GridMeasure eta(grid);
    eta.mass(10) = 0.45;
    eta.mass(11) = 0.45;
    eta.mass(0) = 0.10;
    CHECK(fat_atom_check(eta, p) == FatAtomStatus::kFinite);
  }

  SECTION("exactly half is the boundary case") {
    GridMeasure eta(grid);
    eta.mass(10) = 0.5;
    eta.mass(0) = 0.5;
    CHECK(fat_atom_check(eta, p) == FatAtomStatus::kBoundary);
  }

  SECTION("a heavy bin outside U1 is harmless") {
    GridMeasure eta(grid);
    eta.mass(0) = 0.9;
    eta.mass(10) = 0.1;
    CHECK(fat_atom_check(eta, p) == FatAtomStatus::kFinite);
  }
}

TEST_CASE("coupling vectors") {
  ProjectiveGrid grid(16);
  StochasticMatrix P({{0.5, 0.5}, {0.25, 0.75}});
  MeasureVector eta(grid, 2);
  for (int j = 1; j <= 2; ++j) {
    eta.component(j).mass(2 + j) = 0.5;
    eta.component(j).mass(10) = 0.5;
  }
  const CouplingVector xi = CouplingVector::product_self_coupling(eta);

  SECTION("both marginals recover the measure vector") {
    for (int axis : {1, 2}) {
      const MeasureVector marg = xi.marginal(axis);
      for (int j = 1; j <= 2; ++j)
        CHECK(tv_distance(marg.component(j), eta.component(j)) < 1e-14);
    }
  }

  SECTION("weighted energy is the p-average") {
    const EnergyParams p = params_around(grid.center(0).theta, 1.2 * grid.width());
    const double want = P.p(1) * coupling_energy(xi.component(1), p) +
                        P.p(2) * coupling_energy(xi.component(2), p);
    CHECK_THAT(weighted_energy(xi, P, p), Catch::Matchers::WithinAbs(want, 1e-13));
  }

  SECTION("an infinite component makes the weighted energy infinite") {
    const EnergyParams p = params_around(grid.center(3).theta, 1.2 * grid.width());
    // component 1 has mass at bin 3 inside U1; its product self-coupling
    // has positive same-bin mass there
    CHECK(std::isinf(weighted_energy(xi, P, p)));
  }
}
