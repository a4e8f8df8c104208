#include "rydkerr/eit.hpp"

#include "rydkerr/constants.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace rydkerr::eit
{
    double beam_area(double waist, AreaConvention convention)
    {
        if (!(waist > 0.0))
            throw std::invalid_argument("beam waist must be positive");
        const double full = constants::pi * waist * waist;
        return convention == AreaConvention::PiW2 ? full : 0.5 * full;
    }

    MediumParams MediumParams::from_geometry(const atoms::Species& species, double density,
                                             double length, double probe_waist,
                                             double coupling_rabi, AreaConvention convention)
    {
        MediumParams m;
        m.density = density;
        m.length = length;
        m.cross_section = species.cross_section;
        m.wavelength = species.probe_wavelength;
        m.linewidth = species.natural_linewidth;
        m.od = density * species.cross_section * length;
        m.probe_waist = probe_waist;
        m.beam_area = eit::beam_area(probe_waist, convention);
        m.coupling_rabi = coupling_rabi;
        m.validate();
        return m;
    }

    MediumParams MediumParams::with_od(double new_od) const
    {
        if (!(new_od > 0.0))
            throw std::invalid_argument("optical depth must be positive");
        MediumParams m = *this;
        m.od = new_od;
        m.length = new_od / (density * cross_section);
        return m;
    }

    void MediumParams::validate() const
    {
        if (!(density > 0.0) || !(length > 0.0) || !(probe_waist > 0.0) || !(beam_area > 0.0))
            throw std::invalid_argument("medium geometry must be positive");
        if (!(coupling_rabi >= 0.0) || !(linewidth > 0.0))
            throw std::invalid_argument("coupling Rabi frequency must be >= 0 and linewidth > 0");
        if (!(dephasing >= 0.0))
            throw std::invalid_argument("dephasing must be non-negative");
        if (!(cross_section > 0.0) || !(wavelength > 0.0) || !(rabi_scale > 0.0))
            throw std::invalid_argument("cross section, wavelength and Rabi scale must be positive");
        if (!(od > 0.0))
            throw std::invalid_argument("optical depth must be positive");
        const double derived = density * cross_section * length;
        if (std::abs(derived - od) > 1e-9 * od)
            throw std::invalid_argument("OD inconsistent with density * cross section * length");
    }

    double eit_window(double coupling_rabi, double linewidth)
    {
        if (!(coupling_rabi > 0.0) || !(linewidth > 0.0))
            throw std::invalid_argument("EIT window needs positive coupling Rabi frequency and linewidth");
        return coupling_rabi * coupling_rabi / (2.0 * linewidth);
    }

    std::complex<double> susceptibility(double probe_detuning, const MediumParams& m)
    {
        using namespace std::complex_literals;
        const double a = 0.5 * m.linewidth;
        const double w = 0.25 * m.coupling_rabi * m.coupling_rabi;
        const std::complex<double> two_photon = m.dephasing - 1i * (probe_detuning + m.coupling_detuning);
        const std::complex<double> one_photon = a - 1i * probe_detuning;
        if (w == 0.0)
            return 1i * a / one_photon;   // bare two-level line
        return 1i * a * two_photon / (one_photon * two_photon + w);
    }

    double resonant_transmission(const MediumParams& m)
    {
        return std::exp(-m.od * susceptibility(-m.coupling_detuning, m).imag());
    }

    double dephasing_for_transmission(const MediumParams& m, double transmission)
    {
        if (m.coupling_detuning != 0.0)
            throw std::invalid_argument("dephasing calibration assumes a resonant coupling beam");
        if (!(m.coupling_rabi > 0.0))
            throw std::domain_error("no transparency without a coupling beam");
        if (!(transmission > 0.0 && transmission <= 1.0))
            throw std::domain_error("target transmission must lie in (0, 1]");
        // Im chi(0) = a g / (a g + W)  =>  g = u W / a with u = x / (1 - x).
        const double x = -std::log(transmission) / m.od;
        if (x >= 1.0)
            throw std::domain_error("target transmission below the bare-resonance value");
        const double a = 0.5 * m.linewidth;
        const double w = 0.25 * m.coupling_rabi * m.coupling_rabi;
        return x / (1.0 - x) * w / a;
    }

    void Spectrum::validate() const
    {
        if (transmission.size() != detunings.size() || phase.size() != detunings.size())
            throw std::invalid_argument("spectrum arrays differ in length");
        for (std::size_t i = 1; i < detunings.size(); ++i)
            if (!(detunings[i] > detunings[i - 1]))
                throw std::invalid_argument("spectrum detunings must be strictly increasing");
    }

    std::vector<double> detuning_grid(double half_span, std::size_t points)
    {
        if (!(half_span > 0.0) || points < 3)
            throw std::invalid_argument("detuning grid needs a positive span and >= 3 points");
        std::vector<double> grid(points);
        const double step = 2.0 * half_span / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i)
            grid[i] = -half_span + step * static_cast<double>(i);
        // Odd point counts put an exact zero in the middle.
        if (points % 2 == 1)
            grid[points / 2] = 0.0;
        return grid;
    }

    Spectrum spectrum(const MediumParams& m, std::span<const double> grid)
    {
        m.validate();
        if (grid.size() < 3)
            throw std::invalid_argument("spectrum grid needs at least 3 points");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw std::invalid_argument("spectrum grid must be strictly increasing");
        const double span = 3.0 * m.linewidth;
        if (grid.front() > -span || grid.back() < span)
            throw std::invalid_argument("spectrum grid must span at least +-3 Gamma");

        Spectrum s;
        s.params = m;
        s.detunings.assign(grid.begin(), grid.end());
        s.transmission.resize(grid.size());
        s.phase.resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            const auto chi = susceptibility(grid[i], m);
            s.transmission[i] = std::exp(-m.od * chi.imag());
            s.phase[i] = 0.5 * m.od * chi.real();
        }
        return s;
    }

    namespace
    {
        struct FeatureBracket
        {
            bool present = false;
            std::size_t max_index = 0;
            std::size_t min_index = 0;
        };

        // Walks outward from the two-photon resonance to the nearest phase
        // maximum (above) and minimum (below) inside the |Delta| <= Omega_c window.
        FeatureBracket bracket_feature(std::span<const double> x, std::span<const double> y,
                                       double center, double half_window)
        {
            std::size_t lo = x.size(), hi = 0;
            for (std::size_t i = 0; i < x.size(); ++i)
            {
                if (std::abs(x[i] - center) <= half_window)
                {
                    lo = std::min(lo, i);
                    hi = std::max(hi, i);
                }
            }
            if (lo >= x.size() || hi < lo + 2)
                throw std::domain_error("spectrum has fewer than 3 points inside the EIT window");

            std::size_t c = lo;
            for (std::size_t i = lo; i <= hi; ++i)
                if (std::abs(x[i] - center) < std::abs(x[c] - center))
                    c = i;
            c = std::clamp(c, lo + 1, hi - 1);

            FeatureBracket b;
            if (!(y[c + 1] > y[c - 1]))
                return b;

            std::size_t up = c;
            while (up < hi && y[up + 1] > y[up])
                ++up;
            std::size_t down = c;
            while (down > lo && y[down - 1] < y[down])
                --down;
            if (up == hi || down == lo)
                throw std::domain_error("grid does not bracket both phase extrema of the EIT feature");
            b.present = true;
            b.max_index = up;
            b.min_index = down;
            return b;
        }

        // Extremum value of the parabola through three points.
        double parabola_peak(double x0, double y0, double x1, double y1, double x2, double y2)
        {
            const double d01 = (y1 - y0) / (x1 - x0);
            const double d12 = (y2 - y1) / (x2 - x1);
            const double curvature = (d12 - d01) / (x2 - x0);
            if (curvature == 0.0)
                return y1;
            const double slope1 = d01 + curvature * (x1 - x0);  // derivative at x1
            return y1 - slope1 * slope1 / (4.0 * curvature);
        }
    }

    double phi_pkpk(const Spectrum& s)
    {
        s.validate();
        const double center = -s.params.coupling_detuning;
        const auto b = bracket_feature(s.detunings, s.phase, center, s.params.coupling_rabi);
        if (!b.present)
            return 0.0;
        const auto& x = s.detunings;
        const auto& y = s.phase;
        const auto peak = [&](std::size_t i) {
            return parabola_peak(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1]);
        };
        return peak(b.max_index) - peak(b.min_index);
    }

    double phi_pkpk(const MediumParams& m)
    {
        m.validate();
        if (!(m.coupling_rabi > 0.0))
            return 0.0;
        const double center = -m.coupling_detuning;
        const double half = m.coupling_rabi;
        constexpr std::size_t points = 4001;
        std::vector<double> x(points), y(points);
        for (std::size_t i = 0; i < points; ++i)
        {
            x[i] = center - half + 2.0 * half * static_cast<double>(i) / (points - 1);
            y[i] = 0.5 * m.od * susceptibility(x[i], m).real();
        }
        const auto b = bracket_feature(x, y, center, half);
        if (!b.present)
            return 0.0;

        const auto phase = [&m](double d) { return 0.5 * m.od * susceptibility(d, m).real(); };
        const auto refine = [&](std::size_t i, double sign) {
            auto [arg, val] = boost::math::tools::brent_find_minima(
                [&](double d) { return -sign * phase(d); }, x[i - 1], x[i + 1],
                std::numeric_limits<double>::digits);
            (void)arg;
            return -sign * val;
        };
        return refine(b.max_index, 1.0) - refine(b.min_index, -1.0);
    }

    double group_delay(const Spectrum& s)
    {
        s.validate();
        const auto& x = s.detunings;
        const double near = 0.5 * eit_window(s.params.coupling_rabi, s.params.linewidth);
        const auto count = std::count_if(x.begin(), x.end(),
                                         [near](double d) { return std::abs(d) <= near; });
        if (count < 3)
            throw std::domain_error("group delay needs at least 3 grid points within the EIT window");

        std::size_t c = 0;
        for (std::size_t i = 1; i < x.size(); ++i)
            if (std::abs(x[i]) < std::abs(x[c]))
                c = i;
        c = std::clamp<std::size_t>(c, 1, x.size() - 2);

        // Derivative at 0 of the Lagrange quadratic through the three points.
        const double x0 = x[c - 1], x1 = x[c], x2 = x[c + 1];
        const double y0 = s.phase[c - 1], y1 = s.phase[c], y2 = s.phase[c + 1];
        const double l0 = ((0.0 - x1) + (0.0 - x2)) / ((x0 - x1) * (x0 - x2));
        const double l1 = ((0.0 - x0) + (0.0 - x2)) / ((x1 - x0) * (x1 - x2));
        const double l2 = ((0.0 - x0) + (0.0 - x1)) / ((x2 - x0) * (x2 - x1));
        return y0 * l0 + y1 * l1 + y2 * l2;
    }

    double photons_in_medium(double power, double dwell, double wavelength)
    {
        if (!(power >= 0.0) || !(dwell > 0.0) || !(wavelength > 0.0))
            throw std::invalid_argument("photon count needs power >= 0 and positive dwell and wavelength");
        const double photon_energy = constants::planck * constants::speed_of_light / wavelength;
        return power * dwell / photon_energy;
    }
}
