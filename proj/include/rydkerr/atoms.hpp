#pragma once

#include <string>

namespace rydkerr::atoms
{
    /// Probe-transition data for an alkali species. Angular frequencies in
    /// rad/s, lengths in m.
    struct Species
    {
        std::string name;
        double probe_wavelength = 0.0;
        double natural_linewidth = 0.0;   // Gamma
        double quantum_defect = 0.0;      // delta, n* = n - delta
        double cross_section = 0.0;       // sigma

        /// Builds a species with sigma = 3 lambda^2 / (2 pi). Throws
        /// std::invalid_argument on non-physical values.
        static Species make(std::string name, double probe_wavelength,
                            double natural_linewidth, double quantum_defect);

        /// Rb-85 D2 probe (F=3 -> F'=4), Gamma = 2 pi x 6.066 MHz, defect 2.6.
        static Species rubidium85();

        void validate() const;
    };

    double resonant_cross_section(double wavelength);

    /// n - delta. Requires n > delta.
    double effective_quantum_number(int n, const Species& species);

    enum class C6Mode
    {
        Published,  // Rb nS polynomial fit, C6 = n^11 (c0 + c1 n + c2 n^2) a.u.
        PowerLaw    // C6_ref (n*/n*_ref)^11
    };

    /// Selects how C6(n*) is evaluated. C6 is returned as an angular
    /// frequency times m^6, so that C6/r^6 is in rad/s.
    struct C6Model
    {
        C6Mode mode = C6Mode::Published;
        // The published fit is tabulated against the principal quantum number;
        // n = n* + quantum_defect recovers it.
        double quantum_defect = 0.0;
        double reference_n_star = 0.0;
        double reference_c6 = 0.0;

        static C6Model published(const Species& species);
        static C6Model power_law(double reference_n_star, double reference_c6);
        /// Power law pinned to the published value at reference_n_star.
        static C6Model power_law_anchored(const Species& species, double reference_n_star);
    };

    /// Positive C6 for nS states. Throws std::invalid_argument for n* <= 0 and
    /// std::domain_error when n* lies outside the published fit's range.
    double c6_coefficient(double n_star, const C6Model& model);

    struct RydbergState
    {
        int n = 0;
        double n_star = 0.0;
        double c6 = 0.0;

        /// min_n is the model validity guard on the principal quantum number.
        static RydbergState make(int n, const Species& species, const C6Model& model,
                                 int min_n = 30);
    };
}
