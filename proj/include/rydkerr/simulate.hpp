#pragma once

#include "rydkerr/atoms.hpp"
#include "rydkerr/dataset.hpp"
#include "rydkerr/eit.hpp"
#include "rydkerr/kerr.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rydkerr::sim
{
    /// Timing of one experimental cycle. Times in s.
    struct DutyCycle
    {
        double trap_duration = 7.5e-3;
        double measurement_duration = 1.2e-3;
        double spectroscopy_window = 300e-6;
        int pulse_count = 375;
        double pulse_width = 600e-9;
        double pulse_separation = 2.4e-6;
        // false: the separation is the pulse period. true: it is the gap
        // between pulses, so the period is width + separation.
        bool separation_is_gap = false;

        double period() const { return separation_is_gap ? pulse_width + pulse_separation : pulse_separation; }
        double gap() const { return period() - pulse_width; }
        double train_duration() const { return pulse_count * period(); }
        /// Throws std::invalid_argument when the pulse train does not fit after
        /// the spectroscopy window.
        void validate() const;
    };

    struct BeatNoteParams
    {
        double sample_rate = 1e9;          // S/s
        double beat_frequency = 100e6;     // Hz
        double amplitude = 1.0;
        double amplitude_noise = 0.0;      // additive Gaussian SD per sample
        double phase_noise = 0.0;          // rad, Gaussian phase jitter per sample
        double phase_drift_rate = 0.0;     // rad/s, linear ramp over the record
        double guard_fraction = 0.1;       // trimmed from each end of every window
        std::optional<int> pulses;         // overrides duty.pulse_count

        void validate() const;
    };

    struct Range
    {
        std::size_t begin = 0;   // inclusive sample index
        std::size_t end = 0;     // exclusive
    };

    struct PulseWindows
    {
        Range before, during, after;
    };

    struct BeatNoteRecord
    {
        double sample_rate = 0.0;
        double beat_frequency = 0.0;
        std::vector<double> samples;
        std::vector<PulseWindows> markers;
        std::vector<double> true_phase;   // rad, per sample

        void validate() const;
    };

    /// Each pulse period is laid out as half gap, pulse, half gap; the
    /// before/during/after windows are those three segments minus guard bands,
    /// aligned to whole beat cycles.
    BeatNoteRecord synth_beatnote(double phase_step, const DutyCycle& duty,
                                  const BeatNoteParams& params, std::uint64_t seed);

    /// eit::spectrum with additive Gaussian noise of SD noise_sd on both T and
    /// phi; T is clipped to [0, 1].
    eit::Spectrum synth_spectrum(const eit::MediumParams& m, std::span<const double> grid,
                                 double noise_sd, std::uint64_t seed);

    struct SweepSpec
    {
        atoms::Species species = atoms::Species::rubidium85();
        atoms::C6Model c6 = atoms::C6Model::published(atoms::Species::rubidium85());
        eit::MediumParams medium;            // base cloud; OD is redrawn per row
        std::vector<int> rydberg_levels{49, 54, 58, 62, 65, 68, 70};
        std::vector<double> signal_powers;   // W, positive increasing
        double probe_power = 1e-9;           // W
        int shots_per_point = 375;
        double phase_noise_sd = 2e-3;        // rad per shot
        double od_min = 1.0;
        double od_max = 2.0;
        double power_drift = 0.1;            // per-level calibration factor in [1 - f, 1 + f]
        double phi_pkpk_noise = 0.05;        // relative Gaussian noise on measured phi_pk-pk
        double transparency = 0.6;           // two-photon-resonance T fixing gamma_rel
        bool saturation = false;
        bool substitute_phi_pkpk = true;     // replace OD by phi_pk-pk in the phase law
        // Measured-slope calibration: phase_scale is chosen so that the
        // low-power slope of calibration_level at mid OD equals target_slope.
        std::optional<double> target_slope;  // rad/W (magnitude)
        int calibration_level = 68;
        double phase_scale = 1.0;            // used when target_slope is empty
        int min_level = 30;
        std::optional<std::uint64_t> seed;
        unsigned threads = 0;

        static std::vector<double> default_powers();
        void validate() const;
    };

    /// Ground truth behind one sweep row.
    struct TruthRow
    {
        int level = 0;
        double signal_power = 0.0;      // nominal, W
        double actual_power = 0.0;      // after drift, W
        double od = 0.0;
        double dephasing = 0.0;         // rad/s
        double phi_pkpk = 0.0;          // noiseless phi_pk-pk of the row's cloud
        double model_phase = 0.0;       // phase law with OD (no substitution, no scale)
        double truth_phase = 0.0;       // phase before measurement noise
    };

    struct SweepResult
    {
        std::vector<data::XPhaseMeasurement> rows;
        std::vector<TruthRow> truth;
        double phase_scale = 1.0;
        double dephasing = 0.0;         // rad/s, common to all rows
        std::vector<std::string> warnings;

        // Generating phase per watt per unit phi_pk-pk, by level: the quantity
        // the analysis chain's rescaled slope estimates.
        std::vector<std::pair<int, double>> truth_rescaled;

        double truth_rescaled_slope(int level) const;
    };

    inline constexpr double validity_warning = 0.5;

    SweepResult synth_sweep(const SweepSpec& spec);

    /// Truth phase of one cell: what synth_sweep draws its measurement around.
    /// `phi_pkpk` is the cloud's noiseless phi_pk-pk; computed from `medium`
    /// when absent.
    kerr::CrossKerrResult sweep_cell_phase(const SweepSpec& spec, const atoms::RydbergState& state,
                                           const eit::MediumParams& medium, double signal_power,
                                           double phase_scale, std::optional<double> phi_pkpk = std::nullopt);

    /// Seven-level dataset whose analysis reproduces a given power-law
    /// exponent, exponent error and reduced chi-square, under the error budget
    /// (power drift, phi_pk-pk) the analysis will apply.
    struct ReferenceDatasetSpec
    {
        std::vector<int> levels{49, 54, 58, 62, 65, 68, 70};
        double quantum_defect = 2.6;
        double exponent = 5.7;
        double exponent_error = 0.4;
        double chi2_reduced = 11.0;
        double power_drift = 0.1;
        double phi_pkpk_error = 0.075;
        double amplitude_at_reference = 8e6;   // |rescaled slope| at n* of reference_level
        int reference_level = 68;
        double od = 1.5;
        double phi_pkpk_per_od = 0.5;
        std::vector<double> powers{0.25e-9, 0.5e-9, 0.75e-9, 1.0e-9, 1.5e-9, 2.0e-9};
    };

    std::vector<data::XPhaseMeasurement> reference_dataset(const ReferenceDatasetSpec& spec = {});
}
