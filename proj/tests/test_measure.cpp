#include "doctest.h"

#include <cmath>
#include <numbers>

#include "freedenoise/errors.hpp"
#include "freedenoise/measure.hpp"
#include "support/oracles.hpp"

using namespace freedenoise;

TEST_CASE("builtin measures normalize to unit mass") {
  for (const Measure& m :
       {Measure::semicircle(1.0), Measure::semicircle(2.0), Measure::free_poisson(0.5),
        Measure::free_poisson(1.0), Measure::free_poisson(2.0), Measure::arcsine(),
        Measure::haar()}) {
    CHECK(m.integrate([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("semicircle moments") {
  const Measure m = Measure::semicircle(1.0);
  CHECK(std::abs(m.mean()) < 1e-9);
  CHECK(m.variance() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(m.support_lo() == doctest::Approx(-2.0));
  CHECK(m.support_hi() == doctest::Approx(2.0));

  const Measure wide = Measure::semicircle(2.0);
  CHECK(wide.variance() == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("free poisson structure") {
  const Measure low = Measure::free_poisson(0.5);
  CHECK(low.atom_mass_at(0.0) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(low.mean() == doctest::Approx(0.5).epsilon(2e-3));

  const Measure unit = Measure::free_poisson(1.0);
  CHECK(unit.atoms().empty());
  CHECK(unit.mean() == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(unit.variance() == doctest::Approx(1.0).epsilon(5e-3));

  const Measure high = Measure::free_poisson(2.0);
  CHECK(high.atoms().empty());
  CHECK(high.mean() == doctest::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("arcsine moments") {
  const Measure m = Measure::arcsine();
  // Exact values 2 and 2 from the substitution t = 2 - 2 cos(u).
  CHECK(m.mean() == doctest::Approx(2.0).epsilon(2e-3));
  CHECK(m.variance() == doctest::Approx(2.0).epsilon(5e-3));
}

TEST_CASE("haar circle moments vanish") {
  const Measure m = Measure::haar();
  for (int n = 1; n <= 4; ++n) CHECK(std::abs(m.circle_moment(n)) < 1e-9);
}

TEST_CASE("make rejects degenerate inputs") {
  CHECK_THROWS_AS(Measure::make(SupportDomain::RealLine, {}, std::nullopt), EmptyMeasure);
  CHECK_THROWS_AS(Measure::make(SupportDomain::RealLine, {{0.0, 0.9}}, std::nullopt),
                  NormalizationError);
  CHECK_THROWS_AS(Measure::make(SupportDomain::RealLine, {{0.0, -0.5}, {1.0, 1.5}}, std::nullopt),
                  DomainViolation);
  CHECK_THROWS_AS(Measure::make(SupportDomain::NonNegativeReals, {{-1.0, 1.0}}, std::nullopt),
                  DomainViolation);
  CHECK_THROWS_AS(
      Measure::make(SupportDomain::RealLine, {{0.0, 0.5}, {0.0, 0.5}}, std::nullopt),
      DomainViolation);
  DensitySpec bad;
  bad.grid = {0.0, 1.0, 0.5};
  bad.values = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(Measure::make(SupportDomain::RealLine, {}, bad), DomainViolation);
}

TEST_CASE("renormalization flag rescales and records the defect") {
  const Measure m = Measure::make(SupportDomain::RealLine, {{0.0, 0.6}, {1.0, 0.6}},
                                  std::nullopt, /*renormalize=*/true);
  CHECK(m.total_atom_mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.normalization_defect() == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(m.atom_mass_at(0.0) == doctest::Approx(0.5));
}

TEST_CASE("circle atoms wrap into [0, 2 pi)") {
  const Measure m = Measure::make(SupportDomain::UnitCircle,
                                  {{-0.5 * std::numbers::pi, 0.5}, {7.0, 0.5}}, std::nullopt);
  for (const Atom& a : m.atoms()) {
    CHECK(a.location >= 0.0);
    CHECK(a.location < 2.0 * std::numbers::pi);
  }
  CHECK(m.atom_mass_at(1.5 * std::numbers::pi) == doctest::Approx(0.5));
}

TEST_CASE("integrate matches substitution-rule oracle") {
  const Measure m = Measure::semicircle(1.0);
  auto f = [](double t) { return std::cos(t) + t * t; };
  const double expected = oracle::integrate_semicircle(1.0, f);
  CHECK(m.integrate(f) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("integrate error shrinks when the grid is refined") {
  auto f = [](double t) { return t * t; };
  const double coarse = std::abs(Measure::semicircle(1.0, 512).integrate(f) - 1.0);
  const double fine = std::abs(Measure::semicircle(1.0, 4096).integrate(f) - 1.0);
  CHECK(fine <= coarse + 1e-12);
}

TEST_CASE("integrate rejects non-finite integrands") {
  const Measure m = Measure::free_poisson(1.0);  // density grid reaches t = 0
  CHECK_THROWS_AS(m.integrate([](double t) { return 1.0 / t; }), NonFiniteIntegrand);
}

TEST_CASE("quantiles of a two-point measure") {
  const Measure m = Measure::make(SupportDomain::RealLine, {{0.0, 0.5}, {2.0, 0.5}},
                                  std::nullopt);
  CHECK(m.quantile(0.25) == doctest::Approx(0.0));
  CHECK(m.quantile(0.75) == doctest::Approx(2.0));
}

TEST_CASE("quantiles of builtins are monotone and centered") {
  const Measure m = Measure::semicircle(1.0);
  CHECK(std::abs(m.quantile(0.5)) < 2e-3);
  double prev = -10.0;
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const double q = m.quantile(p);
    CHECK(q >= prev);
    prev = q;
  }
  const Measure mp = Measure::free_poisson(0.5);
  CHECK(mp.quantile(0.3) == doctest::Approx(0.0));  // atom carries mass 1/2
  CHECK(mp.quantile(0.9) > 0.0);
}

TEST_CASE("translation and dilation move supports") {
  const Measure m = Measure::semicircle(1.0);
  const Measure shifted = m.translated(3.0);
  CHECK(shifted.mean() == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(shifted.support_lo() == doctest::Approx(1.0));

  const Measure mp = Measure::free_poisson(2.0);
  const Measure scaled = mp.dilated(0.5);
  CHECK(scaled.mean() == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("rotation moves circle atoms") {
  const Measure m = Measure::make(SupportDomain::UnitCircle, {{0.0, 1.0}}, std::nullopt);
  const Measure r = m.rotated(std::numbers::pi);
  CHECK(r.atom_mass_at(std::numbers::pi) == doctest::Approx(1.0));
}

TEST_CASE("measure pairs require matching domains") {
  CHECK_THROWS_AS(MeasurePair(Measure::semicircle(1.0), Measure::haar()), DimensionMismatch);
}
