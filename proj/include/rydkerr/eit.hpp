#pragma once

#include "rydkerr/atoms.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace rydkerr::eit
{
    enum class AreaConvention
    {
        PiW2,      // A = pi w^2
        HalfPiW2   // A = pi w^2 / 2 (Gaussian peak-intensity area)
    };

    double beam_area(double waist, AreaConvention convention = AreaConvention::PiW2);

    /// Everything the ladder response and the cross-phase model need about the
    /// cloud and the beams. SI units; Rabi frequencies, linewidth, dephasing and
    /// detuning are angular frequencies.
    struct MediumParams
    {
        double density = 0.0;           // rho, m^-3
        double length = 0.0;            // L
        double od = 0.0;                // rho sigma L
        double probe_waist = 0.0;
        double beam_area = 0.0;
        double coupling_rabi = 0.0;     // Omega_c
        double probe_rabi = 0.0;        // Omega_p
        double signal_rabi = 0.0;       // Omega_s
        double linewidth = 0.0;         // Gamma
        double dephasing = 0.0;         // gamma_rel, ground-Rydberg coherence decay
        double coupling_detuning = 0.0; // Delta_c
        double cross_section = 0.0;
        double wavelength = 0.0;
        // Efficiency applied to |Omega|^2 = sigma Gamma P / (A hbar omega).
        double rabi_scale = 1.0;

        /// OD derived as rho sigma L.
        static MediumParams from_geometry(const atoms::Species& species, double density,
                                          double length, double probe_waist,
                                          double coupling_rabi,
                                          AreaConvention convention = AreaConvention::PiW2);

        /// Same cloud with a different optical depth; the length is rescaled so
        /// that OD = rho sigma L keeps holding.
        MediumParams with_od(double od) const;

        void validate() const;
    };

    /// Delta_EIT = Omega_c^2 / (2 Gamma).
    double eit_window(double coupling_rabi, double linewidth);

    /// Normalized weak-probe ladder response. On bare resonance (Omega_c = 0)
    /// the imaginary part is 1, so T = exp(-OD Im) and phi = (OD/2) Re.
    std::complex<double> susceptibility(double probe_detuning, const MediumParams& m);

    /// Probe intensity transmission at the two-photon resonance.
    double resonant_transmission(const MediumParams& m);

    /// Dephasing rate giving the requested on-resonance transmission. Throws
    /// std::domain_error when the target is unreachable (T <= exp(-OD) or T >= 1
    /// with finite dephasing).
    double dephasing_for_transmission(const MediumParams& m, double transmission);

    struct Spectrum
    {
        std::vector<double> detunings;    // Delta_p, rad/s, strictly increasing
        std::vector<double> transmission;
        std::vector<double> phase;        // rad
        MediumParams params;

        std::size_t size() const { return detunings.size(); }
        void validate() const;
    };

    /// Uniform detuning grid on [-half_span, half_span].
    std::vector<double> detuning_grid(double half_span, std::size_t points);

    /// Requires a strictly increasing grid spanning at least +-3 Gamma.
    Spectrum spectrum(const MediumParams& m, std::span<const double> grid);

    /// Peak-to-peak phase of the EIT dispersive feature: the phase difference
    /// between the local extrema nearest the two-photon resonance, searched
    /// within |Delta_p| <= Omega_c. Zero when the feature is gone (phase slope at
    /// resonance <= 0). Throws std::domain_error when the grid does not bracket
    /// an extremum inside the window.
    double phi_pkpk(const Spectrum& s);

    /// The same quantity evaluated on the lineshape itself, with the extrema
    /// refined to machine precision.
    double phi_pkpk(const MediumParams& m);

    /// d phi / d Delta_p at Delta_p = 0 from the three grid points nearest
    /// resonance (exact for a quadratic, centered when the grid is). Requires at
    /// least three points with |Delta_p| <= Delta_EIT / 2.
    double group_delay(const Spectrum& s);

    /// N = P dwell lambda / (h c).
    double photons_in_medium(double power, double dwell, double wavelength);
}
