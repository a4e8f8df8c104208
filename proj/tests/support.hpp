#pragma once

#include "rydkerr/atoms.hpp"
#include "rydkerr/constants.hpp"
#include "rydkerr/eit.hpp"

#include <cmath>
#include <cstdint>

namespace testing
{
    using namespace rydkerr;

    inline constexpr double two_pi = constants::two_pi;

    inline double rel_diff(double a, double b)
    {
        return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
    }

    /// SplitMix64: small, self-contained generator for property tests, kept
    /// separate from the library's streams.
    class Gen
    {
    public:
        explicit Gen(std::uint64_t seed) : state_(seed) {}

        std::uint64_t next()
        {
            std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            return z ^ (z >> 31);
        }

        double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
        double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
        int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }

        double normal()
        {
            const double u1 = 1.0 - uniform();
            const double u2 = uniform();
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
        }

    private:
        std::uint64_t state_;
    };

    inline atoms::Species rb85() { return atoms::Species::rubidium85(); }

    /// Cloud resembling the n = 68 runs: 20 um probe waist, Omega_c = 2 pi 7 MHz.
    inline eit::MediumParams lab_medium(double od = 1.7, double coupling_hz = 7e6)
    {
        const auto sp = rb85();
        const double density = 3e16;
        const double length = od / (density * sp.cross_section);
        return eit::MediumParams::from_geometry(sp, density, length, 20e-6, two_pi * coupling_hz);
    }

    /// Ideal ladder (no dephasing) with the given OD and Omega_c in units of Gamma.
    inline eit::MediumParams ideal_medium(double od, double coupling_over_gamma)
    {
        const auto sp = rb85();
        return lab_medium(od, coupling_over_gamma * sp.natural_linewidth / two_pi);
    }
}
