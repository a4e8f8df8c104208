#pragma once

#include "rydkerr/atoms.hpp"
#include "rydkerr/eit.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace rydkerr::kerr
{
    /// Inputs to the van der Waals cross-phase model. Signal and probe Rabi
    /// frequencies inside `medium` are derived from the powers by make().
    struct KerrInputs
    {
        eit::MediumParams medium;
        atoms::RydbergState state;
        double eit_window = 0.0;       // Delta_EIT, rad/s
        double signal_power = 0.0;     // W
        double probe_power = 0.0;      // W
        // Replaces OD in the phase law (the measured phi_pk-pk under imperfect EIT).
        std::optional<double> effective_od;

        static KerrInputs make(const eit::MediumParams& medium, const atoms::RydbergState& state,
                               double signal_power, double probe_power = 0.0);

        double od() const { return effective_od.value_or(medium.od); }
        void validate() const;
    };

    struct CrossKerrResult
    {
        double phase = 0.0;               // rad, negative for C6 > 0
        double blockade_radius = 0.0;     // m
        double rydberg_density = 0.0;     // m^-3
        double blockade_volume = 0.0;     // m^3
        double validity_ratio = 0.0;      // rho_ryd V_b
        bool validity_exceeded = false;   // validity_ratio > validity_threshold
        std::optional<double> chi3;               // m^2/V^2
        std::optional<double> per_photon_phase;   // rad
    };

    inline constexpr double validity_threshold = 0.1;

    /// V(r)/hbar = -C6 / r^6 (rad/s).
    double vdw_potential(double r, double c6);

    /// Probe phase imparted by one ground-state atom at distance r from a Rydberg
    /// excitation: (sigma/A) Delta V / (Delta^2 + V^2). Magnitude peaks at
    /// (sigma/A)/2 for r = r_b; the sign follows V, so the ensemble phase carries
    /// the negative sign of the closed-form law.
    double per_atom_phase(double r, const KerrInputs& k);

    /// (C6 / Delta_EIT)^(1/6).
    double blockade_radius(double c6, double eit_window);

    /// (4/3) pi r_b^3.
    double blockade_volume(double blockade_radius);

    /// |Omega|^2 = rabi_scale sigma Gamma P / (A hbar omega).
    double rabi_squared_from_power(double power, const eit::MediumParams& m);

    /// rho |Omega_s|^2 / |Omega_c|^2.
    double rydberg_density(double density, double signal_rabi, double coupling_rabi);

    /// -(pi / (2 sqrt 2)) OD (4/3 pi r_b^3) rho_ryd.
    double cross_phase_closed(double od, double blockade_radius, double rydberg_density);

    /// Integral of s^8 / (1 + s^12) over [lo, hi]; hi may be +infinity. The
    /// full-range value is pi / (6 sqrt 2).
    double radial_core_integral(double lo, double hi);

    /// Direct adaptive quadrature of the ensemble sum over the per-atom phase.
    /// Throws std::runtime_error if the quadrature does not converge.
    double cross_phase_quadrature(const KerrInputs& k);

    struct MonteCarloEstimate
    {
        double mean = 0.0;
        double std_error = 0.0;
        std::size_t samples = 0;
    };

    /// Stochastic evaluation of the ensemble sum: each sample draws a Poisson
    /// number of excitations in the probe column and, around each, a Poisson
    /// number of ground atoms at density rho out to a cutoff radius, summing the
    /// per-atom phases; the analytic tail beyond the cutoff is added. Results
    /// depend only on (inputs, n_samples, seed), not on `threads`.
    MonteCarloEstimate cross_phase_montecarlo(const KerrInputs& k, std::size_t n_samples,
                                              std::uint64_t seed, unsigned threads = 0);

    /// Closed-form phase law with the linear (unsaturated) Rydberg density.
    CrossKerrResult cross_phase_full(const KerrInputs& k);

    /// rho x / (1 + rho x V_b), x = (|Omega_s|^2 + |Omega_p|^2) / |Omega_c|^2.
    double saturated_rydberg_density(double density, double signal_rabi, double probe_rabi,
                                     double coupling_rabi, double blockade_volume);

    /// Rydberg density added by the signal on top of the probe-created
    /// background, both drawn from the saturated density.
    double signal_rydberg_density_saturated(const KerrInputs& k);

    /// cross_phase_full with the saturated signal-induced density.
    CrossKerrResult cross_phase_saturated(const KerrInputs& k);

    /// Total (signal + probe) power at which rho_sat V_b reaches `fraction`.
    double saturation_power(const KerrInputs& k, double fraction = 0.5);

    /// Re chi3 from a cross-phase slope (rad/W): n2 = slope A / (k L),
    /// chi3 = (4/3) eps0 c n2.
    double chi3_from_slope(double slope, double waist, double length, double wavelength,
                           eit::AreaConvention convention = eit::AreaConvention::PiW2);

    /// slope (h c / lambda) / tau_g.
    double per_photon_phase(double slope, double group_delay, double wavelength);

    struct ReferenceNonlinearity
    {
        std::string_view description;
        double chi3_magnitude;        // m^2/V^2
        bool imaginary;               // dissipative (Im chi3)
        std::optional<double> per_photon_phase_urad;
    };

    /// Comparison values for other Kerr media, for reports.
    inline constexpr std::array<ReferenceNonlinearity, 7> reference_nonlinearities{{
        {"Fused silica", 2.5e-22, false, std::nullopt},
        {"EIT, BEC", 5e-7, false, std::nullopt},
        {"Rydberg self-Kerr (dissipative)", 5e-7, true, std::nullopt},
        {"Rydberg cross-Kerr, resonant EIT", 1e-8, false, 250.0},
        {"Rydberg self-Kerr, cavity", 5e-9, false, std::nullopt},
        {"N-scheme, MOT", 2e-9, false, 13.0},
        {"N-scheme, hollow-core fibre", 1e-12, false, 300.0},
    }};
}
