#pragma once

#include "rydkerr/dataset.hpp"
#include "rydkerr/eit.hpp"
#include "rydkerr/fit.hpp"
#include "rydkerr/simulate.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rydkerr::analysis
{
    using fit::FitResult;
    using fit::inflate_errors;

    struct SpectrumFitOptions
    {
        // Standard deviation of the T and phi noise. When absent the covariance
        // is scaled by the reduced chi-square of the fit.
        std::optional<double> noise_sd;
        bool coupling_off = false;   // fit OD alone with Omega_c = 0
        fit::LmOptions lm;
    };

    /// Joint weighted fit of T and phi with the ladder lineshape. Parameters:
    /// "od", "coupling_rabi" and "dephasing" (rad/s), plus the derived
    /// "phi_pkpk" of the fitted curve (its error propagated from the
    /// covariance). Linewidth, wavelength and coupling detuning are taken from
    /// the spectrum metadata.
    FitResult fit_spectrum(const eit::Spectrum& s, const SpectrumFitOptions& options = {});

    struct PulsePhaseResult
    {
        std::vector<double> delta;   // per pulse, rad
        double mean = 0.0;
        double sem = 0.0;
        bool drift_warning = false;
        std::size_t drifting_pulses = 0;
    };

    /// Demodulates every whole beat cycle to a phase, averages the cycles in
    /// each window and forms during - (before + after)/2 per pulse. Pulses
    /// whose before/after phases differ by more than 5x their combined window
    /// noise are counted as drifting.
    PulsePhaseResult extract_pulse_phase(const sim::BeatNoteRecord& rec);

    struct SlopeOptions
    {
        double linear_max_power = 2e-9;   // W; points above are excluded and flagged
        bool divide_by_od = true;         // fit phi/OD instead of phi
    };

    /// SEM-weighted line phase (or phase/OD) against signal power. Parameters
    /// "intercept" and "slope" (rad/W). Throws for fewer than 3 usable points.
    FitResult fit_linear_slope(std::span<const data::XPhaseMeasurement> points,
                               const SlopeOptions& options = {});

    /// Flags (never truncates) a roll-over: true when the secant slope over the
    /// upper third of the powers falls below `ratio` times that of the lower third.
    bool detect_knee(std::span<const data::XPhaseMeasurement> points, double ratio = 0.8);

    struct ErrorBudget
    {
        double power_drift = 0.10;   // relative
        double phi_pkpk = 0.075;     // relative
    };

    struct RescaledSlope
    {
        double value = 0.0;          // rad/W per unit phi_pk-pk
        double stat_error = 0.0;
        double error = 0.0;          // stat, power drift and phi_pk-pk in quadrature
    };

    /// slope of phi/OD, times OD/phi_pk-pk: the per-OD slope re-expressed per
    /// unit of usable (phi_pk-pk) depth.
    RescaledSlope rescale_slope(const FitResult& slope, double od, double phi_pkpk,
                                const ErrorBudget& budget = {});

    /// log|y| = log A + p log x, weighted with sigma_log = sigma_y/|y|.
    /// Parameters "amplitude" and "exponent" (amplitude error propagated from
    /// log A). With log_space = false the fit runs on y directly.
    FitResult fit_power_law(std::span<const double> x, std::span<const double> y,
                            std::span<const double> sigma_y, bool log_space = true);

    struct AnalysisOptions
    {
        SlopeOptions slope;
        std::map<int, double> linear_max_power_by_level;
        ErrorBudget budget;
        bool inflate = true;
        bool log_space = true;
    };

    struct LevelReport
    {
        int level = 0;
        double n_star = 0.0;
        FitResult slope;
        double od = 0.0;              // mean over fitted points
        double phi_pkpk = 0.0;        // mean over fitted points
        RescaledSlope rescaled;
        std::size_t points_used = 0;
        std::size_t points_excluded = 0;
        bool knee = false;
    };

    struct AnalysisReport
    {
        std::vector<LevelReport> levels;
        FitResult power_law;          // before inflation
        FitResult power_law_final;    // after the inflation rule
        std::vector<std::string> warnings;
    };

    /// Slope fits per level, rescaling and the power-law fit. Throws
    /// std::invalid_argument on an empty dataset.
    AnalysisReport analyze(const std::vector<data::XPhaseMeasurement>& rows,
                           const AnalysisOptions& options = {});
}
