#include "support.hpp"

#include <doctest.h>

using namespace rydkerr;
using testing::rel_diff;

TEST_CASE("quantum defect gives the effective principal number")
{
    const auto sp = testing::rb85();
    CHECK(atoms::effective_quantum_number(49, sp) == doctest::Approx(46.4).epsilon(1e-14));
    CHECK(atoms::effective_quantum_number(70, sp) == doctest::Approx(67.4).epsilon(1e-14));

    auto zero = atoms::Species::make("test", 780e-9, testing::two_pi * 6e6, 0.0);
    CHECK(atoms::effective_quantum_number(68, zero) == 68.0);
    CHECK_THROWS_AS(atoms::effective_quantum_number(2, sp), std::invalid_argument);
}

TEST_CASE("resonant cross section is 3 lambda^2 / 2 pi")
{
    // Frozen from a 30-digit evaluation.
    CHECK(rel_diff(atoms::resonant_cross_section(780e-9), 2.90489602131327e-13) < 1e-13);
    CHECK(rel_diff(testing::rb85().cross_section, 2.90669137540177e-13) < 1e-13);
    CHECK(rel_diff(atoms::resonant_cross_section(1560e-9), 4.0 * atoms::resonant_cross_section(780e-9)) < 1e-15);
    CHECK_THROWS_AS(atoms::resonant_cross_section(0.0), std::invalid_argument);
    CHECK_THROWS_AS(atoms::resonant_cross_section(-1.0), std::invalid_argument);
}

TEST_CASE("species validation")
{
    CHECK_THROWS_AS(atoms::Species::make("x", -780e-9, 1e7, 2.6), std::invalid_argument);
    CHECK_THROWS_AS(atoms::Species::make("x", 780e-9, 0.0, 2.6), std::invalid_argument);
    CHECK_THROWS_AS(atoms::Species::make("x", 780e-9, 1e7, -0.1), std::invalid_argument);
    const auto sp = testing::rb85();
    CHECK(sp.natural_linewidth == doctest::Approx(testing::two_pi * 6.066e6));
    CHECK(sp.quantum_defect == 2.6);
}

TEST_CASE("power-law C6 follows n*^11")
{
    const auto model = atoms::C6Model::power_law(50.0, 1e-25);
    CHECK(rel_diff(atoms::c6_coefficient(100.0, model), 2048e-25) < 1e-13);
    CHECK(rel_diff(atoms::c6_coefficient(50.0, model), 1e-25) < 1e-15);
    CHECK_THROWS_AS(atoms::c6_coefficient(0.0, model), std::invalid_argument);
    CHECK_THROWS_AS(atoms::c6_coefficient(-3.0, model), std::invalid_argument);
}

TEST_CASE("published C6 fit")
{
    const auto sp = testing::rb85();
    const auto model = atoms::C6Model::published(sp);

    // Regression value at n = 68, frozen from an independent evaluation of the fit.
    CHECK(rel_diff(atoms::c6_coefficient(65.4, model), 3.92558629383350e-24) < 1e-12);

    double prev = 0.0;
    for (double ns = 27.4; ns <= 97.4; ns += 1.0)
    {
        const double c6 = atoms::c6_coefficient(ns, model);
        CHECK(c6 > prev);
        prev = c6;
    }

    const double slope = std::log(atoms::c6_coefficient(80.0, model) / atoms::c6_coefficient(40.0, model)) /
                         std::log(2.0);
    CHECK(slope > 10.5);
    CHECK(slope < 12.0);

    CHECK_THROWS_AS(atoms::c6_coefficient(1000.0, model), std::domain_error);

    // The anchored power law agrees with the fit at its anchor.
    const auto anchored = atoms::C6Model::power_law_anchored(sp, 65.4);
    CHECK(rel_diff(atoms::c6_coefficient(65.4, anchored), atoms::c6_coefficient(65.4, model)) < 1e-14);
}

TEST_CASE("Rydberg state guard on the principal number")
{
    const auto sp = testing::rb85();
    const auto model = atoms::C6Model::published(sp);
    const auto s = atoms::RydbergState::make(68, sp, model);
    CHECK(s.n == 68);
    CHECK(s.n_star == doctest::Approx(65.4));
    CHECK(s.c6 > 0.0);
    CHECK_THROWS_AS(atoms::RydbergState::make(20, sp, model), std::invalid_argument);
    CHECK_NOTHROW(atoms::RydbergState::make(20, sp, model, 15));
}
