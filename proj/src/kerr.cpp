#include "rydkerr/kerr.hpp"

#include "rydkerr/constants.hpp"
#include "rydkerr/random.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace rydkerr::kerr
{
    namespace
    {
        // Past s = 10 the core integrand is expanded in s^-12 and summed exactly.
        constexpr double tail_start = 10.0;
        // Monte-Carlo ground atoms are drawn out to this many blockade radii.
        constexpr double mc_cutoff = 2.0;
        constexpr std::size_t mc_chunks = 64;

        double core_integrand(double s)
        {
            const double s4 = s * s * s * s;
            return s4 * s4 / (1.0 + s4 * s4 * s4);
        }

        double core_tail(double from)
        {
            double sum = 0.0;
            const double inv12 = std::pow(from, -12.0);
            double term = std::pow(from, -3.0);
            for (int k = 0; k < 50; ++k)
            {
                const double add = term / (3.0 + 12.0 * k);
                sum += (k % 2 == 0) ? add : -add;
                if (add < 1e-18 * std::abs(sum))
                    break;
                term *= inv12;
            }
            return sum;
        }

        template <class F>
        double adaptive(F f, double a, double b)
        {
            double error = 0.0, l1 = 0.0;
            const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                f, a, b, 20, 1e-13, &error, &l1);
            if (!std::isfinite(value) || error > 1e-10 * std::max(l1, 1e-300))
                throw std::runtime_error("radial quadrature failed to converge");
            return value;
        }

        double column_od(const KerrInputs& k)
        {
            return k.medium.density * k.medium.cross_section * k.medium.length;
        }
    }

    KerrInputs KerrInputs::make(const eit::MediumParams& medium, const atoms::RydbergState& state,
                                double signal_power, double probe_power)
    {
        KerrInputs k;
        k.medium = medium;
        k.state = state;
        k.signal_power = signal_power;
        k.probe_power = probe_power;
        if (!(signal_power >= 0.0) || !(probe_power >= 0.0))
            throw std::invalid_argument("powers must be non-negative");
        k.medium.signal_rabi = std::sqrt(rabi_squared_from_power(signal_power, medium));
        k.medium.probe_rabi = std::sqrt(rabi_squared_from_power(probe_power, medium));
        k.eit_window = eit::eit_window(medium.coupling_rabi, medium.linewidth);
        k.validate();
        return k;
    }

    void KerrInputs::validate() const
    {
        medium.validate();
        if (!(state.c6 > 0.0))
            throw std::invalid_argument("C6 must be positive");
        if (!(signal_power >= 0.0) || !(probe_power >= 0.0))
            throw std::invalid_argument("powers must be non-negative");
        const double expected = eit::eit_window(medium.coupling_rabi, medium.linewidth);
        if (std::abs(expected - eit_window) > 1e-9 * expected)
            throw std::invalid_argument("EIT window inconsistent with coupling Rabi frequency");
        if (effective_od && !(*effective_od > 0.0))
            throw std::invalid_argument("effective OD must be positive");
    }

    double vdw_potential(double r, double c6)
    {
        if (!(r > 0.0))
            throw std::invalid_argument("interatomic distance must be positive");
        const double r3 = r * r * r;
        return -c6 / (r3 * r3);
    }

    double per_atom_phase(double r, const KerrInputs& k)
    {
        // q/(1+q^2) written as 1/(q + 1/q) so that q -> +-inf gives 0, not NaN.
        const double q = vdw_potential(r, k.state.c6) / k.eit_window;
        const double peak = k.medium.cross_section / k.medium.beam_area;
        if (q == 0.0)
            return 0.0;
        return peak / (q + 1.0 / q);
    }

    double blockade_radius(double c6, double eit_window)
    {
        if (!(c6 > 0.0) || !(eit_window > 0.0))
            throw std::invalid_argument("blockade radius needs positive C6 and EIT window");
        return std::pow(c6 / eit_window, 1.0 / 6.0);
    }

    double blockade_volume(double r_b)
    {
        return 4.0 / 3.0 * constants::pi * r_b * r_b * r_b;
    }

    double rabi_squared_from_power(double power, const eit::MediumParams& m)
    {
        if (!(power >= 0.0))
            throw std::invalid_argument("power must be non-negative");
        const double photon_energy = constants::planck * constants::speed_of_light / m.wavelength;
        return m.rabi_scale * m.cross_section * m.linewidth * power / (m.beam_area * photon_energy);
    }

    double rydberg_density(double density, double signal_rabi, double coupling_rabi)
    {
        if (!(coupling_rabi > 0.0))
            throw std::invalid_argument("coupling Rabi frequency must be positive");
        return density * signal_rabi * signal_rabi / (coupling_rabi * coupling_rabi);
    }

    double cross_phase_closed(double od, double r_b, double rho_ryd)
    {
        if (!(od > 0.0) || !(r_b > 0.0) || !(rho_ryd >= 0.0))
            throw std::invalid_argument("closed form needs OD > 0, r_b > 0, rho_ryd >= 0");
        return -constants::pi / (2.0 * std::numbers::sqrt2) * od * blockade_volume(r_b) * rho_ryd;
    }

    double radial_core_integral(double lo, double hi)
    {
        if (!(lo >= 0.0) || !(hi >= lo))
            throw std::invalid_argument("core integral needs 0 <= lo <= hi");
        if (std::isinf(hi))
        {
            if (lo >= tail_start)
                return core_tail(lo);
            return adaptive(core_integrand, lo, tail_start) + core_tail(tail_start);
        }
        return adaptive(core_integrand, lo, hi);
    }

    double cross_phase_quadrature(const KerrInputs& k)
    {
        k.validate();
        const double r_b = blockade_radius(k.state.c6, k.eit_window);
        const double rho_ryd = rydberg_density(k.medium.density, k.medium.signal_rabi,
                                               k.medium.coupling_rabi);
        if (rho_ryd == 0.0)
            return 0.0;

        // r = r_b s; the near part integrates the per-atom phase itself.
        const auto integrand = [&](double s) {
            if (s == 0.0)
                return 0.0;
            return per_atom_phase(r_b * s, k) * s * s;
        };
        const double near = adaptive(integrand, 0.0, tail_start);
        const double peak = k.medium.cross_section / k.medium.beam_area;
        const double tail = -peak * core_tail(tail_start);

        const double column = rho_ryd * k.medium.beam_area * k.medium.length;
        const double shell = 4.0 * constants::pi * k.medium.density * r_b * r_b * r_b;
        return column * shell * (near + tail) * (k.od() / column_od(k));
    }

    MonteCarloEstimate cross_phase_montecarlo(const KerrInputs& k, std::size_t n_samples,
                                              std::uint64_t seed, unsigned threads)
    {
        k.validate();
        if (n_samples < 1000)
            throw std::invalid_argument("Monte Carlo needs at least 1000 samples");
        if (!(k.medium.beam_area > 0.0) || !(k.medium.length > 0.0))
            throw std::invalid_argument("degenerate probe column");

        const double r_b = blockade_radius(k.state.c6, k.eit_window);
        const double rho_ryd = rydberg_density(k.medium.density, k.medium.signal_rabi,
                                               k.medium.coupling_rabi);
        MonteCarloEstimate est;
        est.samples = n_samples;
        if (rho_ryd == 0.0)
            return est;

        const double cutoff = mc_cutoff * r_b;
        const double mean_excitations = rho_ryd * k.medium.beam_area * k.medium.length;
        const double mean_neighbours =
            k.medium.density * 4.0 / 3.0 * constants::pi * cutoff * cutoff * cutoff;
        const double peak = k.medium.cross_section / k.medium.beam_area;
        const double tail_per_excitation = -peak * 4.0 * constants::pi * k.medium.density *
                                           r_b * r_b * r_b * core_tail(mc_cutoff);
        const double od_scale = k.od() / column_od(k);
        const double q_edge = vdw_potential(cutoff, k.state.c6) / k.eit_window;

        struct Partial
        {
            double sum = 0.0;
            double sum_sq = 0.0;
        };
        const std::size_t chunks = std::min(mc_chunks, n_samples);
        std::vector<Partial> partial(chunks);

        parallel_for(chunks, threads, [&](std::size_t c) {
            auto rng = substream(seed, {0x6d63u, c});
            std::poisson_distribution<long> excitations(mean_excitations);
            std::poisson_distribution<long> neighbours(mean_neighbours);
            const std::size_t begin = c * n_samples / chunks;
            const std::size_t end = (c + 1) * n_samples / chunks;
            Partial p;
            for (std::size_t i = begin; i < end; ++i)
            {
                double total = 0.0;
                const long n_exc = excitations(rng);
                for (long e = 0; e < n_exc; ++e)
                {
                    const long n_ground = neighbours(rng);
                    for (long g = 0; g < n_ground; ++g)
                    {
                        // Uniform in the ball means r^3 = R^3 u, so V/Delta = q_edge / u^2.
                        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                        if (u > 0.0)
                        {
                            const double q = q_edge / (u * u);
                            total += peak / (q + 1.0 / q);
                        }
                    }
                    total += tail_per_excitation;
                }
                total *= od_scale;
                p.sum += total;
                p.sum_sq += total * total;
            }
            partial[c] = p;
        });

        double sum = 0.0, sum_sq = 0.0;
        for (const auto& p : partial)
        {
            sum += p.sum;
            sum_sq += p.sum_sq;
        }
        const double n = static_cast<double>(n_samples);
        est.mean = sum / n;
        const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
        est.std_error = std::sqrt(var / n);
        return est;
    }

    CrossKerrResult cross_phase_full(const KerrInputs& k)
    {
        k.validate();
        CrossKerrResult r;
        r.blockade_radius = blockade_radius(k.state.c6, k.eit_window);
        r.blockade_volume = blockade_volume(r.blockade_radius);
        r.rydberg_density = rydberg_density(k.medium.density, k.medium.signal_rabi,
                                            k.medium.coupling_rabi);
        const double omega_ratio = k.medium.signal_rabi * k.medium.signal_rabi /
                                   (k.medium.coupling_rabi * k.medium.coupling_rabi);
        r.phase = -std::numbers::sqrt2 * constants::pi * constants::pi / 3.0 * k.od() *
                  std::sqrt(k.state.c6 / k.eit_window) * omega_ratio * k.medium.density;
        r.validity_ratio = r.rydberg_density * r.blockade_volume;
        r.validity_exceeded = r.validity_ratio > validity_threshold;
        return r;
    }

    double saturated_rydberg_density(double density, double signal_rabi, double probe_rabi,
                                     double coupling_rabi, double v_b)
    {
        if (!(coupling_rabi > 0.0))
            throw std::invalid_argument("coupling Rabi frequency must be positive");
        if (!(v_b > 0.0) || !(density > 0.0))
            throw std::invalid_argument("saturation needs positive density and blockade volume");
        const double x = (signal_rabi * signal_rabi + probe_rabi * probe_rabi) /
                         (coupling_rabi * coupling_rabi);
        const double linear = density * x;
        return linear / (1.0 + linear * v_b);
    }

    double signal_rydberg_density_saturated(const KerrInputs& k)
    {
        const double v_b = blockade_volume(blockade_radius(k.state.c6, k.eit_window));
        const auto& m = k.medium;
        return saturated_rydberg_density(m.density, m.signal_rabi, m.probe_rabi, m.coupling_rabi, v_b) -
               saturated_rydberg_density(m.density, 0.0, m.probe_rabi, m.coupling_rabi, v_b);
    }

    CrossKerrResult cross_phase_saturated(const KerrInputs& k)
    {
        k.validate();
        CrossKerrResult r;
        r.blockade_radius = blockade_radius(k.state.c6, k.eit_window);
        r.blockade_volume = blockade_volume(r.blockade_radius);
        r.rydberg_density = signal_rydberg_density_saturated(k);
        r.phase = cross_phase_closed(k.od(), r.blockade_radius, r.rydberg_density);
        const auto& m = k.medium;
        r.validity_ratio = saturated_rydberg_density(m.density, m.signal_rabi, m.probe_rabi,
                                                     m.coupling_rabi, r.blockade_volume) *
                           r.blockade_volume;
        r.validity_exceeded = r.validity_ratio > validity_threshold;
        return r;
    }

    double saturation_power(const KerrInputs& k, double fraction)
    {
        if (!(fraction > 0.0 && fraction < 1.0))
            throw std::invalid_argument("saturation fraction must lie in (0, 1)");
        const double v_b = blockade_volume(blockade_radius(k.state.c6, k.eit_window));
        const double y = fraction / (1.0 - fraction);
        const double x = y / (k.medium.density * v_b);
        const double per_watt = rabi_squared_from_power(1.0, k.medium);
        return x * k.medium.coupling_rabi * k.medium.coupling_rabi / per_watt;
    }

    double chi3_from_slope(double slope, double waist, double length, double wavelength,
                           eit::AreaConvention convention)
    {
        if (!(length > 0.0) || !(wavelength > 0.0))
            throw std::invalid_argument("chi3 conversion needs positive geometry");
        const double area = eit::beam_area(waist, convention);
        const double wavenumber = constants::two_pi / wavelength;
        const double n2 = slope * area / (wavenumber * length);
        return 4.0 / 3.0 * constants::vacuum_permittivity * constants::speed_of_light * n2;
    }

    double per_photon_phase(double slope, double group_delay, double wavelength)
    {
        if (!(group_delay > 0.0) || !(wavelength > 0.0))
            throw std::invalid_argument("per-photon phase needs positive group delay and wavelength");
        const double photon_energy = constants::planck * constants::speed_of_light / wavelength;
        return slope * photon_energy / group_delay;
    }
}
