#pragma once

#include <numbers>

// SI values, CODATA 2018.
namespace rydkerr::constants
{
    inline constexpr double pi = std::numbers::pi;
    inline constexpr double two_pi = 2.0 * std::numbers::pi;

    inline constexpr double planck = 6.62607015e-34;           // J s
    inline constexpr double hbar = planck / two_pi;            // J s
    inline constexpr double speed_of_light = 299792458.0;      // m/s
    inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
    inline constexpr double hartree = 4.3597447222071e-18;     // J
    inline constexpr double bohr_radius = 5.29177210903e-11;   // m

    // Atomic unit of C6 (E_h a0^6) expressed as an angular frequency times m^6.
    inline constexpr double c6_atomic_unit =
        hartree / hbar * (bohr_radius * bohr_radius * bohr_radius) *
        (bohr_radius * bohr_radius * bohr_radius);
}
