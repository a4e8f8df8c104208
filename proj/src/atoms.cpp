#include "rydkerr/atoms.hpp"

#include "rydkerr/constants.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace rydkerr::atoms
{
    namespace
    {
        // Rb nS_1/2 dispersion fit, atomic units.
        constexpr double fit_c0 = 11.97;
        constexpr double fit_c1 = -0.8486;
        constexpr double fit_c2 = 3.385e-3;

        double published_c6(double n)
        {
            const double poly = fit_c0 + fit_c1 * n + fit_c2 * n * n;
            // The fit is negative (repulsive nS-nS) between its two roots,
            // n ~ 15 and n ~ 236; outside that the sign flips and the fit is
            // meaningless.
            if (poly >= 0.0)
                throw std::domain_error("C6 fit evaluated outside its range (n = " +
                                        std::to_string(n) + ")");
            return -std::pow(n, 11) * poly * constants::c6_atomic_unit;
        }
    }

    Species Species::make(std::string name, double probe_wavelength,
                          double natural_linewidth, double quantum_defect)
    {
        Species s;
        s.name = std::move(name);
        s.probe_wavelength = probe_wavelength;
        s.natural_linewidth = natural_linewidth;
        s.quantum_defect = quantum_defect;
        s.cross_section = resonant_cross_section(probe_wavelength);
        s.validate();
        return s;
    }

    Species Species::rubidium85()
    {
        return make("Rb85", 780.241e-9, constants::two_pi * 6.066e6, 2.6);
    }

    void Species::validate() const
    {
        if (!(probe_wavelength > 0.0))
            throw std::invalid_argument("probe wavelength must be positive");
        if (!(natural_linewidth > 0.0))
            throw std::invalid_argument("natural linewidth must be positive");
        if (!(quantum_defect >= 0.0 && quantum_defect < 4.0))
            throw std::invalid_argument("quantum defect must lie in [0, 4)");
        if (!(cross_section > 0.0))
            throw std::invalid_argument("cross section must be positive");
    }

    double resonant_cross_section(double wavelength)
    {
        if (!(wavelength > 0.0))
            throw std::invalid_argument("wavelength must be positive");
        return 3.0 * wavelength * wavelength / constants::two_pi;
    }

    double effective_quantum_number(int n, const Species& species)
    {
        if (!(static_cast<double>(n) > species.quantum_defect))
            throw std::invalid_argument("principal quantum number must exceed the quantum defect");
        return static_cast<double>(n) - species.quantum_defect;
    }

    C6Model C6Model::published(const Species& species)
    {
        C6Model m;
        m.mode = C6Mode::Published;
        m.quantum_defect = species.quantum_defect;
        return m;
    }

    C6Model C6Model::power_law(double reference_n_star, double reference_c6)
    {
        if (!(reference_n_star > 0.0) || !(reference_c6 > 0.0))
            throw std::invalid_argument("power-law C6 reference must be positive");
        C6Model m;
        m.mode = C6Mode::PowerLaw;
        m.reference_n_star = reference_n_star;
        m.reference_c6 = reference_c6;
        return m;
    }

    C6Model C6Model::power_law_anchored(const Species& species, double reference_n_star)
    {
        return power_law(reference_n_star,
                         c6_coefficient(reference_n_star, published(species)));
    }

    double c6_coefficient(double n_star, const C6Model& model)
    {
        if (!(n_star > 0.0))
            throw std::invalid_argument("effective quantum number must be positive");
        switch (model.mode)
        {
        case C6Mode::Published:
            return published_c6(n_star + model.quantum_defect);
        case C6Mode::PowerLaw:
            return model.reference_c6 * std::pow(n_star / model.reference_n_star, 11);
        }
        throw std::logic_error("unknown C6 mode");
    }

    RydbergState RydbergState::make(int n, const Species& species, const C6Model& model,
                                    int min_n)
    {
        if (n < min_n)
            throw std::invalid_argument("principal quantum number " + std::to_string(n) +
                                        " below model validity guard " +
                                        std::to_string(min_n));
        RydbergState st;
        st.n = n;
        st.n_star = effective_quantum_number(n, species);
        st.c6 = c6_coefficient(st.n_star, model);
        return st;
    }
}
