#pragma once

#include "rydkerr/analysis.hpp"
#include "rydkerr/atoms.hpp"
#include "rydkerr/eit.hpp"
#include "rydkerr/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rydkerr::cli
{
    /// Configuration problems; the message carries the offending line when the
    /// error comes from a file.
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct SpeciesConfig
    {
        std::string name = "Rb85";
        double probe_wavelength_m = 780.241e-9;
        double linewidth_hz = 6.066e6;          // Gamma / 2 pi
        double quantum_defect = 2.6;
    };

    struct C6Config
    {
        atoms::C6Mode mode = atoms::C6Mode::Published;
        double reference_n_star = 65.4;
        std::optional<double> reference_c6;     // rad/s m^6; defaults to the published value
    };

    struct MediumConfig
    {
        double density_m3 = 3e16;
        double length_m = 5e-4;
        double probe_waist_m = 20e-6;
        double coupling_rabi_hz = 7e6;           // Omega_c / 2 pi
        std::optional<double> od;                // overrides length via OD = rho sigma L
        std::optional<double> dephasing_hz;      // gamma_rel / 2 pi; else from transparency
        double transparency = 0.6;
        double rabi_scale = 1.0;
        eit::AreaConvention area = eit::AreaConvention::PiW2;
        int min_level = 30;
    };

    struct SpectrumConfig
    {
        double half_span_hz = 20e6;
        int points = 401;
        double noise = 0.01;
    };

    struct BeatNoteConfig
    {
        // About 2 mrad of phase noise per pulse after window averaging.
        sim::BeatNoteParams params = [] {
            sim::BeatNoteParams p;
            p.amplitude_noise = 0.01;
            p.phase_noise = 0.038;
            return p;
        }();
        int level = 68;
        double signal_power_w = 1e-9;
    };

    struct SweepConfig
    {
        std::vector<int> levels{49, 54, 58, 62, 65, 68, 70};
        std::vector<double> signal_powers_w = sim::SweepSpec::default_powers();
        double probe_power_w = 1e-9;
        int shots_per_point = 375;
        double phase_noise_rad = 2e-3;
        double od_min = 1.0;
        double od_max = 2.0;
        double power_drift = 0.1;
        double phi_pkpk_noise = 0.05;
        bool saturation = false;
        bool substitute_phi_pkpk = true;
        std::optional<double> target_slope_rad_per_w = 8e6;
        int calibration_level = 68;
        double phase_scale = 1.0;
        double saturation_onset_w = 20e-12;
    };

    struct MonteCarloConfig
    {
        int samples = 2000;
        unsigned threads = 0;
    };

    struct RunConfig
    {
        SpeciesConfig species;
        C6Config c6;
        MediumConfig medium;
        SpectrumConfig spectrum;
        sim::DutyCycle duty;
        BeatNoteConfig beatnote;
        SweepConfig sweep;
        analysis::AnalysisOptions analysis;
        MonteCarloConfig montecarlo;
        std::optional<std::uint64_t> seed;
        std::string output_dir = "out";

        atoms::Species make_species() const;
        atoms::C6Model make_c6() const;
        /// Medium with OD override applied; dephasing from dephasing_hz or the
        /// transparency target.
        eit::MediumParams make_medium() const;
        sim::SweepSpec make_sweep() const;

        /// Canonical resolved form, also the input of the config hash.
        nlohmann::json to_json() const;
    };

    /// Parses YAML text; unknown keys and ill-typed values are rejected with
    /// their line number.
    RunConfig parse_config(const std::string& yaml_text, const std::string& source = "<config>");
    RunConfig load_config(const std::string& path);
}
