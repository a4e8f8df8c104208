#include "rydkerr/simulate.hpp"

#include "rydkerr/constants.hpp"
#include "rydkerr/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rydkerr::sim
{
    void DutyCycle::validate() const
    {
        if (!(trap_duration >= 0.0) || !(measurement_duration > 0.0) || !(spectroscopy_window >= 0.0))
            throw std::invalid_argument("duty-cycle stage durations must be positive");
        if (pulse_count < 1 || !(pulse_width > 0.0) || !(pulse_separation > 0.0))
            throw std::invalid_argument("pulse train needs a positive count, width and separation");
        if (period() < pulse_width)
            throw std::invalid_argument("pulse period shorter than the pulse");
        const double available = measurement_duration - spectroscopy_window;
        if (train_duration() > available * (1.0 + 1e-9))
            throw std::invalid_argument("pulse train (" + std::to_string(train_duration() * 1e6) +
                                        " us) exceeds the measurement window after spectroscopy (" +
                                        std::to_string(available * 1e6) + " us)");
    }

    void BeatNoteParams::validate() const
    {
        if (!(sample_rate > 0.0) || !(beat_frequency > 0.0))
            throw std::invalid_argument("sample rate and beat frequency must be positive");
        if (sample_rate < 4.0 * beat_frequency)
            throw std::invalid_argument("sample rate must be at least 4x the beat frequency");
        const double per_cycle = sample_rate / beat_frequency;
        if (std::abs(per_cycle - std::round(per_cycle)) > 1e-9 * per_cycle)
            throw std::invalid_argument("sample rate must be an integer multiple of the beat frequency");
        if (!(amplitude > 0.0) || !(amplitude_noise >= 0.0) || !(phase_noise >= 0.0))
            throw std::invalid_argument("amplitude must be positive and noise levels non-negative");
        if (!(guard_fraction >= 0.0 && guard_fraction < 0.5))
            throw std::invalid_argument("guard fraction must lie in [0, 0.5)");
        if (pulses && *pulses < 1)
            throw std::invalid_argument("pulse count override must be positive");
    }

    void BeatNoteRecord::validate() const
    {
        if (!(sample_rate >= 4.0 * beat_frequency) || !(beat_frequency > 0.0))
            throw std::invalid_argument("sample rate must be at least 4x the beat frequency");
        std::size_t last = 0;
        for (const auto& w : markers)
        {
            for (const Range* r : {&w.before, &w.during, &w.after})
            {
                if (r->begin >= r->end || r->begin < last || r->end > samples.size())
                    throw std::invalid_argument("beat-note windows out of bounds or overlapping");
                last = r->end;
            }
        }
    }

    BeatNoteRecord synth_beatnote(double phase_step, const DutyCycle& duty,
                                  const BeatNoteParams& params, std::uint64_t seed)
    {
        params.validate();
        if (!(duty.pulse_width > 0.0) || !(duty.period() >= duty.pulse_width))
            throw std::invalid_argument("invalid pulse timing");
        const auto per_cycle = static_cast<std::size_t>(std::llround(params.sample_rate / params.beat_frequency));
        const auto to_cycles = [&](double t) {
            return static_cast<std::size_t>(std::llround(t * params.beat_frequency));
        };
        const std::size_t period_cycles = to_cycles(duty.period());
        const std::size_t pulse_cycles = to_cycles(duty.pulse_width);
        if (pulse_cycles < 1 || period_cycles < pulse_cycles + 2)
            throw std::invalid_argument("pulse timing does not resolve into whole beat cycles");
        const std::size_t lead = (period_cycles - pulse_cycles) / 2;
        const std::size_t trail = period_cycles - pulse_cycles - lead;
        const std::size_t half_gap = std::min(lead, trail);
        const int pulses = params.pulses.value_or(duty.pulse_count);

        BeatNoteRecord rec;
        rec.sample_rate = params.sample_rate;
        rec.beat_frequency = params.beat_frequency;
        const std::size_t n = static_cast<std::size_t>(pulses) * period_cycles * per_cycle;
        rec.samples.resize(n);
        rec.true_phase.assign(n, 0.0);

        // Windows symmetric about the pulse centre, whole cycles, guards trimmed.
        const auto window = [&](std::size_t start_cycle, std::size_t cycles) {
            const auto guard = static_cast<std::size_t>(std::floor(params.guard_fraction * cycles + 1e-9));
            if (cycles <= 2 * guard)
                throw std::invalid_argument("guard bands consume the whole window");
            return Range{(start_cycle + guard) * per_cycle, (start_cycle + cycles - guard) * per_cycle};
        };
        for (int p = 0; p < pulses; ++p)
        {
            const std::size_t base = static_cast<std::size_t>(p) * period_cycles;
            const std::size_t pulse_start = base + lead;
            PulseWindows w;
            w.before = window(pulse_start - half_gap, half_gap);
            w.during = window(pulse_start, pulse_cycles);
            w.after = window(pulse_start + pulse_cycles, half_gap);
            rec.markers.push_back(w);
            for (std::size_t i = pulse_start * per_cycle; i < (pulse_start + pulse_cycles) * per_cycle; ++i)
                rec.true_phase[i] = phase_step;
        }
        if (params.phase_drift_rate != 0.0)
            for (std::size_t i = 0; i < n; ++i)
                rec.true_phase[i] += params.phase_drift_rate * static_cast<double>(i) / params.sample_rate;

        auto rng = substream(seed, {0x6265u});
        std::normal_distribution<double> gauss(0.0, 1.0);
        const bool noisy = params.amplitude_noise > 0.0 || params.phase_noise > 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            // Phase of the carrier taken modulo one cycle so that long records
            // keep full precision.
            const double cycle_phase = constants::two_pi * static_cast<double>(i % per_cycle) /
                                       static_cast<double>(per_cycle);
            double phi = rec.true_phase[i];
            double noise = 0.0;
            if (noisy)
            {
                phi += params.phase_noise * gauss(rng);
                noise = params.amplitude_noise * gauss(rng);
            }
            rec.samples[i] = params.amplitude * std::cos(cycle_phase + phi) + noise;
        }
        return rec;
    }

    eit::Spectrum synth_spectrum(const eit::MediumParams& m, std::span<const double> grid,
                                 double noise_sd, std::uint64_t seed)
    {
        if (!(noise_sd >= 0.0))
            throw std::invalid_argument("noise SD must be non-negative");
        auto s = eit::spectrum(m, grid);
        if (noise_sd == 0.0)
            return s;
        auto rng = substream(seed, {0x7370u});
        std::normal_distribution<double> gauss(0.0, noise_sd);
        for (std::size_t i = 0; i < s.size(); ++i)
        {
            s.transmission[i] = std::clamp(s.transmission[i] + gauss(rng), 0.0, 1.0);
            s.phase[i] += gauss(rng);
        }
        return s;
    }

    std::vector<double> SweepSpec::default_powers()
    {
        // 10 pW to 100 nW, three points per decade.
        std::vector<double> p;
        for (int k = 0; k <= 12; ++k)
            p.push_back(1e-11 * std::pow(10.0, k / 3.0));
        return p;
    }

    void SweepSpec::validate() const
    {
        species.validate();
        medium.validate();
        if (rydberg_levels.empty())
            throw std::invalid_argument("sweep needs at least one Rydberg level");
        if (signal_powers.empty())
            throw std::invalid_argument("sweep needs at least one signal power");
        for (std::size_t i = 0; i < signal_powers.size(); ++i)
        {
            if (!(signal_powers[i] > 0.0))
                throw std::invalid_argument("signal powers must be positive");
            if (i > 0 && !(signal_powers[i] > signal_powers[i - 1]))
                throw std::invalid_argument("signal powers must be increasing");
        }
        if (!(probe_power >= 0.0) || shots_per_point < 1 || !(phase_noise_sd >= 0.0))
            throw std::invalid_argument("probe power, shot count or phase noise out of range");
        if (!(od_min > 0.0) || !(od_max >= od_min))
            throw std::invalid_argument("OD drift range must satisfy 0 < min <= max");
        if (!(power_drift >= 0.0 && power_drift < 1.0) || !(phi_pkpk_noise >= 0.0))
            throw std::invalid_argument("drift fractions out of range");
        if (!(transparency > 0.0 && transparency < 1.0))
            throw std::invalid_argument("transparency must lie in (0, 1)");
        if (target_slope && !(*target_slope > 0.0))
            throw std::invalid_argument("target slope must be positive");
        if (!(phase_scale > 0.0))
            throw std::invalid_argument("phase scale must be positive");
        if (!seed)
            throw std::invalid_argument("sweep requires an explicit seed");
    }

    double SweepResult::truth_rescaled_slope(int level) const
    {
        for (const auto& [l, v] : truth_rescaled)
            if (l == level)
                return v;
        throw std::out_of_range("no truth slope for level " + std::to_string(level));
    }

    kerr::CrossKerrResult sweep_cell_phase(const SweepSpec& spec, const atoms::RydbergState& state,
                                           const eit::MediumParams& medium, double signal_power,
                                           double phase_scale, std::optional<double> phi_pkpk)
    {
        auto k = kerr::KerrInputs::make(medium, state, signal_power,
                                        spec.saturation ? spec.probe_power : 0.0);
        if (spec.substitute_phi_pkpk)
            k.effective_od = phi_pkpk ? *phi_pkpk : eit::phi_pkpk(medium);
        auto r = spec.saturation ? kerr::cross_phase_saturated(k) : kerr::cross_phase_full(k);
        r.phase *= phase_scale;
        return r;
    }

    namespace
    {
        double probe_background(const SweepSpec& spec, const atoms::RydbergState& state,
                                const eit::MediumParams& medium)
        {
            if (!spec.saturation || spec.probe_power == 0.0)
                return 0.0;
            const auto k = kerr::KerrInputs::make(medium, state, 0.0, spec.probe_power);
            const double v_b = kerr::blockade_volume(kerr::blockade_radius(state.c6, k.eit_window));
            return kerr::rydberg_density(medium.density, k.medium.probe_rabi, medium.coupling_rabi) * v_b;
        }
    }

    SweepResult synth_sweep(const SweepSpec& spec)
    {
        spec.validate();
        SweepResult out;
        const double od_mid = 0.5 * (spec.od_min + spec.od_max);
        eit::MediumParams base = spec.medium.with_od(od_mid);
        base.dephasing = eit::dephasing_for_transmission(base, spec.transparency);
        out.dephasing = base.dephasing;
        // phi_pk-pk is exactly linear in OD at fixed dephasing.
        const double pkpk_per_od = eit::phi_pkpk(base) / od_mid;

        std::vector<atoms::RydbergState> states;
        for (int level : spec.rydberg_levels)
            states.push_back(atoms::RydbergState::make(level, spec.species, spec.c6, spec.min_level));

        out.phase_scale = spec.phase_scale;
        if (spec.target_slope)
        {
            const auto state = atoms::RydbergState::make(spec.calibration_level, spec.species, spec.c6,
                                                         spec.min_level);
            const double p0 = 1e-15;
            const double slope = std::abs(sweep_cell_phase(spec, state, base, p0, 1.0).phase) / p0;
            if (!(slope > 0.0))
                throw std::domain_error("cannot calibrate the phase scale: zero model slope");
            out.phase_scale = *spec.target_slope / slope;
        }

        for (const auto& state : states)
        {
            // Per unit phi_pk-pk, per watt, at nominal power.
            auto k = kerr::KerrInputs::make(base, state, 1.0);
            k.effective_od = 1.0;
            double truth = out.phase_scale * kerr::cross_phase_full(k).phase;
            if (!spec.substitute_phi_pkpk)
                truth /= pkpk_per_od;
            out.truth_rescaled.emplace_back(state.n, truth);
        }

        const std::size_t n_levels = states.size();
        const std::size_t n_powers = spec.signal_powers.size();
        out.rows.resize(n_levels * n_powers);
        out.truth.resize(n_levels * n_powers);
        const std::uint64_t seed = *spec.seed;
        const double sem = spec.phase_noise_sd / std::sqrt(static_cast<double>(spec.shots_per_point));
        // Measurement rows need a positive SEM even for noiseless campaigns.
        const double reported_sem = sem > 0.0 ? sem : 1e-6;

        parallel_for(n_levels * n_powers, spec.threads, [&](std::size_t cell) {
            const std::size_t li = cell / n_powers;
            const std::size_t pi = cell % n_powers;
            const auto& state = states[li];
            const auto level = static_cast<std::uint64_t>(state.n);

            auto level_rng = substream(seed, {level, 0xd21fu});
            std::uniform_real_distribution<double> drift(1.0 - spec.power_drift, 1.0 + spec.power_drift);
            const double power_factor = spec.power_drift > 0.0 ? drift(level_rng) : 1.0;

            auto rng = substream(seed, {level, pi});
            std::uniform_real_distribution<double> od_draw(spec.od_min, spec.od_max);
            std::normal_distribution<double> gauss(0.0, 1.0);
            const double od = spec.od_max > spec.od_min ? od_draw(rng) : spec.od_min;
            const double phase_noise = gauss(rng);
            const double pkpk_noise = gauss(rng);

            eit::MediumParams medium = base.with_od(od);
            const double nominal = spec.signal_powers[pi];
            const double actual = nominal * power_factor;
            const double pkpk = pkpk_per_od * od;
            const auto result = sweep_cell_phase(spec, state, medium, actual, out.phase_scale, pkpk);
            auto kk = kerr::KerrInputs::make(medium, state, actual);
            const double model = kerr::cross_phase_full(kk).phase;

            const double y_p = probe_background(spec, state, medium);
            const double pkpk_measured = pkpk / ((1.0 + y_p) * (1.0 + y_p)) *
                                         (1.0 + spec.phi_pkpk_noise * pkpk_noise);

            data::XPhaseMeasurement row;
            row.level = state.n;
            row.n_star = state.n_star;
            row.signal_power = nominal;
            row.probe_power = spec.probe_power;
            row.phase = result.phase + sem * phase_noise;
            row.sem = reported_sem;
            row.od = od;
            row.phi_pkpk = std::max(pkpk_measured, 0.0);
            row.validity_ratio = result.validity_ratio;
            out.rows[cell] = row;

            TruthRow t;
            t.level = state.n;
            t.signal_power = nominal;
            t.actual_power = actual;
            t.od = od;
            t.dephasing = medium.dephasing;
            t.phi_pkpk = pkpk;
            t.model_phase = model;
            t.truth_phase = result.phase;
            out.truth[cell] = t;
        });

        for (std::size_t li = 0; li < n_levels; ++li)
        {
            std::size_t flagged = 0;
            double from = 0.0;
            for (std::size_t pi = 0; pi < n_powers; ++pi)
            {
                const auto& r = out.rows[li * n_powers + pi];
                if (r.validity_ratio > validity_warning)
                {
                    if (flagged++ == 0)
                        from = r.signal_power;
                }
            }
            if (flagged > 0)
                out.warnings.push_back("level " + std::to_string(states[li].n) + ": " + std::to_string(flagged) +
                                       " row(s) from " + data::format_double(from) +
                                       " W have validity ratio above " + data::format_double(validity_warning));
        }
        return out;
    }

    std::vector<data::XPhaseMeasurement> reference_dataset(const ReferenceDatasetSpec& spec)
    {
        const std::size_t n = spec.levels.size();
        if (n < 3 || spec.powers.size() < 3)
            throw std::invalid_argument("reference dataset needs >= 3 levels and >= 3 powers");

        Eigen::VectorXd lx(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            lx[static_cast<Eigen::Index>(i)] = std::log(spec.levels[i] - spec.quantum_defect);
        const double sxx = (lx.array() - lx.mean()).square().sum();

        // Equal log-space errors s give sigma_p = s / sqrt(Sxx).
        const double total = spec.exponent_error * std::sqrt(sxx);
        const double systematic2 = spec.power_drift * spec.power_drift + spec.phi_pkpk_error * spec.phi_pkpk_error;
        if (total * total <= systematic2)
            throw std::domain_error("requested exponent error is below the systematic error floor");
        const double stat = std::sqrt(total * total - systematic2);

        // Scatter orthogonal to [1, ln x], scaled to the requested chi-square.
        Eigen::MatrixXd basis(static_cast<Eigen::Index>(n), 2);
        basis.col(0).setOnes();
        basis.col(1) = lx;
        Eigen::VectorXd e(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            e[static_cast<Eigen::Index>(i)] = (i % 2 == 0 ? 1.0 : -1.0) + 0.3 * static_cast<double>(i % 3);
        e -= basis * basis.colPivHouseholderQr().solve(e);
        const double chi2 = spec.chi2_reduced * static_cast<double>(n - 2);
        e *= total * std::sqrt(chi2) / e.norm();

        const double ref_x = spec.reference_level - spec.quantum_defect;
        std::vector<double> p = spec.powers;
        const double mean_p = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
        double spp = 0.0;
        for (double v : p)
            spp += (v - mean_p) * (v - mean_p);

        std::vector<data::XPhaseMeasurement> rows;
        for (std::size_t i = 0; i < n; ++i)
        {
            const double x = spec.levels[i] - spec.quantum_defect;
            const double rescaled = spec.amplitude_at_reference * std::pow(x / ref_x, spec.exponent) *
                                    std::exp(e[static_cast<Eigen::Index>(i)]);
            // Phase per watt per unit OD, negative like the physical phase.
            const double slope = -rescaled * spec.phi_pkpk_per_od;
            // Equal-weight line fit: sigma_slope = sigma / sqrt(Spp).
            const double sigma_y = stat * std::abs(slope) * std::sqrt(spp);
            for (double power : p)
            {
                data::XPhaseMeasurement m;
                m.level = spec.levels[i];
                m.n_star = x;
                m.signal_power = power;
                m.probe_power = 1e-9;
                m.od = spec.od;
                m.phase = slope * power * spec.od;
                m.sem = sigma_y * spec.od;
                m.phi_pkpk = spec.phi_pkpk_per_od * spec.od;
                rows.push_back(m);
            }
        }
        return rows;
    }
}
