#include "rydkerr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace rydkerr::analysis
{
    namespace
    {
        eit::MediumParams fitted_medium(const eit::MediumParams& base, double od, double coupling,
                                        double dephasing)
        {
            eit::MediumParams m = base.with_od(od);
            m.coupling_rabi = coupling;
            m.dephasing = dephasing;
            return m;
        }

        std::size_t argmin_where(const eit::Spectrum& s, bool positive_side)
        {
            std::size_t best = s.size();
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                const bool side = positive_side ? s.detunings[i] > 0.0 : s.detunings[i] < 0.0;
                if (side && (best == s.size() || s.transmission[i] < s.transmission[best]))
                    best = i;
            }
            return best;
        }
    }

    FitResult fit_spectrum(const eit::Spectrum& s, const SpectrumFitOptions& options)
    {
        s.validate();
        if (s.size() < 8)
            throw std::invalid_argument("spectrum fit needs at least 8 points");
        if (options.noise_sd && !(*options.noise_sd > 0.0))
            throw std::invalid_argument("noise SD must be positive");
        const eit::MediumParams& base = s.params;
        const double gamma = base.linewidth;
        const double sigma = options.noise_sd.value_or(1.0);
        const double t_min = std::max(*std::min_element(s.transmission.begin(), s.transmission.end()), 1e-6);
        const double od_dip = std::max(-std::log(t_min), 1e-3);

        if (options.coupling_off)
        {
            const auto residuals = [&](const Eigen::VectorXd& p) {
                const auto m = fitted_medium(base, std::max(std::abs(p[0]), 1e-12), 0.0, 0.0);
                Eigen::VectorXd r(2 * static_cast<Eigen::Index>(s.size()));
                for (std::size_t i = 0; i < s.size(); ++i)
                {
                    const auto chi = eit::susceptibility(s.detunings[i], m);
                    const auto k = static_cast<Eigen::Index>(2 * i);
                    r[k] = (std::exp(-m.od * chi.imag()) - s.transmission[i]) / sigma;
                    r[k + 1] = (0.5 * m.od * chi.real() - s.phase[i]) / sigma;
                }
                return r;
            };
            auto f = fit::levenberg_marquardt(residuals, Eigen::VectorXd::Constant(1, od_dip), {"od"},
                                              options.lm);
            f.params[0] = std::abs(f.params[0]);
            if (!options.noise_sd)
                f.covariance *= f.chi2_reduced;
            f.std_errors = f.covariance.diagonal().cwiseSqrt();
            return f;
        }

        const auto model_medium = [&](const Eigen::VectorXd& p) {
            return fitted_medium(base, std::max(std::abs(p[0]), 1e-12), std::abs(p[1]) * gamma,
                                 std::abs(p[2]) * gamma);
        };
        const auto residuals = [&](const Eigen::VectorXd& p) {
            const auto m = model_medium(p);
            Eigen::VectorXd r(2 * static_cast<Eigen::Index>(s.size()));
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                const auto chi = eit::susceptibility(s.detunings[i], m);
                const auto k = static_cast<Eigen::Index>(2 * i);
                r[k] = (std::exp(-m.od * chi.imag()) - s.transmission[i]) / sigma;
                r[k + 1] = (0.5 * m.od * chi.real() - s.phase[i]) / sigma;
            }
            return r;
        };

        // Starting points: Autler-Townes dips sit near +-Omega_c/2, the bare
        // depth bounds OD from below, and T(0) fixes the dephasing.
        const std::size_t lo = argmin_where(s, false), hi = argmin_where(s, true);
        double omega0 = 1.0;
        if (lo < s.size() && hi < s.size())
            omega0 = std::max((s.detunings[hi] - s.detunings[lo]) / gamma, 0.2);
        std::size_t centre = 0;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (std::abs(s.detunings[i] + base.coupling_detuning) < std::abs(s.detunings[centre] + base.coupling_detuning))
                centre = i;
        const double t0 = std::clamp(s.transmission[centre], 1e-6, 1.0 - 1e-9);

        FitResult best;
        bool have = false;
        for (double od_factor : {1.0, 1.5, 2.5})
        {
            for (double omega_factor : {1.0, 0.6, 1.6})
            {
                const double od0 = od_dip * od_factor;
                const double om = omega0 * omega_factor;
                const double x = std::min(-std::log(t0) / od0, 0.95);
                const double g0 = x / (1.0 - x) * 0.25 * om * om / 0.5;
                Eigen::Vector3d start(od0, om, std::max(g0, 1e-4));
                FitResult f;
                try
                {
                    f = fit::levenberg_marquardt(residuals, start, {"od", "coupling_rabi", "dephasing"},
                                                 options.lm);
                }
                catch (const std::exception&)
                {
                    continue;
                }
                if (!have || f.chi2 < best.chi2)
                {
                    best = f;
                    have = true;
                }
            }
        }
        if (!have)
            throw std::domain_error("spectrum fit failed from every starting point");

        const Eigen::VectorXd p = best.params.cwiseAbs();
        Eigen::Matrix3d d = Eigen::Vector3d(1.0, gamma, gamma).asDiagonal();
        Eigen::Matrix3d cov = d * best.covariance * d;
        if (!options.noise_sd)
            cov *= best.chi2_reduced;

        const auto pkpk_of = [&](const Eigen::Vector3d& q) { return eit::phi_pkpk(model_medium(q)); };
        const double pkpk = pkpk_of(p);
        Eigen::Vector3d grad;
        for (int k = 0; k < 3; ++k)
        {
            const double h = 1e-5 * std::max(std::abs(p[k]), 1e-3);
            Eigen::Vector3d a = p, b = p;
            a[k] += h;
            b[k] = std::max(b[k] - h, 0.0);
            double ga = 0.0, gb = 0.0;
            try
            {
                ga = pkpk_of(a);
                gb = pkpk_of(b);
            }
            catch (const std::domain_error&)
            {
                ga = gb = pkpk;
            }
            grad[k] = (ga - gb) / (a[k] - b[k]) / d(k, k);
        }

        FitResult f = best;
        f.names = {"od", "coupling_rabi", "dephasing", "phi_pkpk"};
        f.params = Eigen::Vector4d(p[0], p[1] * gamma, p[2] * gamma, pkpk);
        f.covariance = Eigen::Matrix4d::Zero();
        f.covariance.topLeftCorner<3, 3>() = cov;
        const Eigen::Vector3d cg = cov * grad;
        f.covariance.block<3, 1>(0, 3) = cg;
        f.covariance.block<1, 3>(3, 0) = cg.transpose();
        f.covariance(3, 3) = grad.dot(cg);
        f.std_errors = f.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();

        const double spacing = (s.detunings.back() - s.detunings.front()) / static_cast<double>(s.size() - 1);
        if (f.params[1] < 2.0 * spacing || f.std_errors[1] > 0.5 * f.params[1])
            f.flags.push_back("coupling Rabi frequency unresolved");
        return f;
    }

    PulsePhaseResult extract_pulse_phase(const sim::BeatNoteRecord& rec)
    {
        rec.validate();
        if (rec.markers.empty())
            throw std::invalid_argument("beat-note record has no pulse markers");
        const double ratio = rec.sample_rate / rec.beat_frequency;
        const auto per_cycle = static_cast<std::size_t>(std::llround(ratio));
        if (std::abs(ratio - static_cast<double>(per_cycle)) > 1e-9 * ratio)
            throw std::invalid_argument("sample rate must be an integer multiple of the beat frequency");

        std::vector<double> cosine(per_cycle), sine(per_cycle);
        for (std::size_t k = 0; k < per_cycle; ++k)
        {
            const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(per_cycle);
            cosine[k] = std::cos(theta);
            sine[k] = std::sin(theta);
        }

        struct WindowPhase
        {
            double mean = 0.0;
            double noise = 0.0;   // standard error of the window mean
        };
        // Window phase at the window centre. Per-cycle IQ phases give the
        // local phase slope and the noise; the final estimate is a least-squares
        // quadrature fit whose carrier carries that slope, which keeps a linear
        // phase ramp from leaking through the 2x-carrier image term.
        const auto window_phase = [&](const sim::Range& r) {
            if ((r.begin % per_cycle) != 0 || ((r.end - r.begin) % per_cycle) != 0)
                throw std::invalid_argument("beat-note windows must cover whole beat cycles");
            const std::size_t cycles = (r.end - r.begin) / per_cycle;
            std::vector<double> phases(cycles);
            for (std::size_t c = 0; c < cycles; ++c)
            {
                double i_sum = 0.0, q_sum = 0.0;
                const std::size_t off = r.begin + c * per_cycle;
                for (std::size_t k = 0; k < per_cycle; ++k)
                {
                    i_sum += rec.samples[off + k] * cosine[k];
                    q_sum += rec.samples[off + k] * sine[k];
                }
                double phi = std::atan2(-q_sum, i_sum);
                if (c > 0)
                    phi -= 2.0 * std::numbers::pi * std::round((phi - phases[c - 1]) / (2.0 * std::numbers::pi));
                phases[c] = phi;
            }
            const double n_cycles = static_cast<double>(cycles);
            const double cycle_mean = std::accumulate(phases.begin(), phases.end(), 0.0) / n_cycles;

            // Phase slope per sample from the cycle phases.
            double slope = 0.0;
            double sxx = 0.0, sxy = 0.0;
            const double mid = 0.5 * (n_cycles - 1.0);
            for (std::size_t c = 0; c < cycles; ++c)
            {
                const double dx = static_cast<double>(c) - mid;
                sxx += dx * dx;
                sxy += dx * (phases[c] - cycle_mean);
            }
            if (cycles > 1)
                slope = sxy / sxx / static_cast<double>(per_cycle);

            WindowPhase w;
            if (cycles > 2)
            {
                double ss = 0.0;
                for (std::size_t c = 0; c < cycles; ++c)
                {
                    const double fit = cycle_mean + slope * static_cast<double>(per_cycle) *
                                                        (static_cast<double>(c) - mid);
                    ss += (phases[c] - fit) * (phases[c] - fit);
                }
                w.noise = std::sqrt(ss / (n_cycles - 2.0) / n_cycles);
            }

            const double centre = 0.5 * static_cast<double>(r.begin + r.end - 1);
            double cc = 0.0, cs = 0.0, ss = 0.0, yc = 0.0, ys = 0.0;
            for (std::size_t j = r.begin; j < r.end; ++j)
            {
                const double theta = 2.0 * std::numbers::pi * static_cast<double>(j % per_cycle) /
                                         static_cast<double>(per_cycle) +
                                     slope * (static_cast<double>(j) - centre);
                const double c = std::cos(theta), s = std::sin(theta);
                cc += c * c;
                cs += c * s;
                ss += s * s;
                yc += rec.samples[j] * c;
                ys += rec.samples[j] * s;
            }
            // samples ~ alpha cos(theta) + beta sin(theta), phase = atan2(-beta, alpha).
            const double det = cc * ss - cs * cs;
            const double alpha = (ss * yc - cs * ys) / det;
            const double beta = (cc * ys - cs * yc) / det;
            double phi = std::atan2(-beta, alpha);
            phi += 2.0 * std::numbers::pi * std::round((cycle_mean - phi) / (2.0 * std::numbers::pi));
            w.mean = phi;
            return w;
        };

        PulsePhaseResult out;
        out.delta.reserve(rec.markers.size());
        for (const auto& m : rec.markers)
        {
            const auto before = window_phase(m.before);
            auto during = window_phase(m.during);
            auto after = window_phase(m.after);
            // Put all three windows on the branch of the first.
            const auto align = [&](WindowPhase& w) {
                w.mean += 2.0 * std::numbers::pi * std::round((before.mean - w.mean) / (2.0 * std::numbers::pi));
            };
            align(during);
            align(after);
            out.delta.push_back(during.mean - 0.5 * (before.mean + after.mean));
            const double noise = std::hypot(before.noise, after.noise);
            const double jump = std::abs(after.mean - before.mean);
            if (jump > 5.0 * noise && jump > 1e-12)
                ++out.drifting_pulses;
        }
        out.drift_warning = out.drifting_pulses > 0;
        const double n = static_cast<double>(out.delta.size());
        out.mean = std::accumulate(out.delta.begin(), out.delta.end(), 0.0) / n;
        if (out.delta.size() > 1)
        {
            double ss = 0.0;
            for (double v : out.delta)
                ss += (v - out.mean) * (v - out.mean);
            out.sem = std::sqrt(ss / (n - 1.0) / n);
        }
        return out;
    }

    FitResult fit_linear_slope(std::span<const data::XPhaseMeasurement> points, const SlopeOptions& options)
    {
        std::vector<double> x, y, s;
        std::size_t excluded = 0;
        for (const auto& p : points)
        {
            p.validate();
            if (p.signal_power > options.linear_max_power)
            {
                ++excluded;
                continue;
            }
            const double norm = options.divide_by_od ? p.od : 1.0;
            x.push_back(p.signal_power);
            y.push_back(p.phase / norm);
            s.push_back(p.sem / norm);
        }
        if (x.size() < 3)
            throw std::invalid_argument("slope fit needs at least 3 points inside the linear range");
        auto f = fit::weighted_line(x, y, s);
        if (excluded > 0)
            f.flags.push_back(std::to_string(excluded) + " point(s) above the linear range excluded");
        if (excluded == 0 && detect_knee(points))
            f.flags.push_back("slope rolls over inside the fitted range");
        return f;
    }

    bool detect_knee(std::span<const data::XPhaseMeasurement> points, double ratio)
    {
        if (points.size() < 6)
            return false;
        std::vector<data::XPhaseMeasurement> sorted(points.begin(), points.end());
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.signal_power < b.signal_power; });
        const std::size_t third = sorted.size() / 3;
        const auto secant = [&](std::size_t a, std::size_t b) {
            return (sorted[b].phase / sorted[b].od - sorted[a].phase / sorted[a].od) /
                   (sorted[b].signal_power - sorted[a].signal_power);
        };
        const double low = secant(0, third);
        const double high = secant(sorted.size() - 1 - third, sorted.size() - 1);
        return std::abs(high) < ratio * std::abs(low);
    }

    RescaledSlope rescale_slope(const FitResult& slope, double od, double phi_pkpk, const ErrorBudget& budget)
    {
        if (!(od > 0.0) || !(phi_pkpk > 0.0))
            throw std::invalid_argument("rescaling needs positive OD and phi_pk-pk");
        const double s = slope.value("slope");
        RescaledSlope r;
        r.value = s * od / phi_pkpk;
        const double stat = s != 0.0 ? slope.error("slope") / std::abs(s) : 0.0;
        r.stat_error = std::abs(r.value) * stat;
        r.error = std::abs(r.value) *
                  std::sqrt(stat * stat + budget.power_drift * budget.power_drift + budget.phi_pkpk * budget.phi_pkpk);
        return r;
    }

    FitResult fit_power_law(std::span<const double> x, std::span<const double> y,
                            std::span<const double> sigma_y, bool log_space)
    {
        const std::size_t n = x.size();
        if (y.size() != n || sigma_y.size() != n)
            throw std::invalid_argument("power-law arrays differ in length");
        if (n < 3)
            throw std::invalid_argument("power-law fit needs at least 3 points");
        const bool negative = y[0] < 0.0;
        std::vector<double> lx(n), ly(n), sl(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            if (!(x[i] > 0.0))
                throw std::invalid_argument("power-law abscissae must be positive");
            if (y[i] == 0.0 || (y[i] < 0.0) != negative)
                throw std::invalid_argument("power-law ordinates must be non-zero and of one sign");
            if (!(sigma_y[i] > 0.0))
                throw std::invalid_argument("power-law errors must be positive");
            lx[i] = std::log(x[i]);
            ly[i] = std::log(std::abs(y[i]));
            sl[i] = sigma_y[i] / std::abs(y[i]);
        }
        const auto line = fit::weighted_line(lx, ly, sl);
        const double amp = std::exp(line.params[0]);

        FitResult f = line;
        f.names = {"amplitude", "exponent"};
        Eigen::Matrix2d j = Eigen::Vector2d(amp, 1.0).asDiagonal();
        f.params = Eigen::Vector2d(amp, line.params[1]);
        f.covariance = j * line.covariance * j;
        f.std_errors = f.covariance.diagonal().cwiseSqrt();
        if (log_space)
            return f;

        const auto residuals = [&](const Eigen::VectorXd& p) {
            Eigen::VectorXd r(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i)
                r[static_cast<Eigen::Index>(i)] = (p[0] * std::pow(x[i], p[1]) - std::abs(y[i])) / sigma_y[i];
            return r;
        };
        return fit::levenberg_marquardt(residuals, f.params, f.names);
    }

    AnalysisReport analyze(const std::vector<data::XPhaseMeasurement>& rows, const AnalysisOptions& options)
    {
        if (rows.empty())
            throw std::invalid_argument("dataset is empty");
        std::map<int, std::vector<data::XPhaseMeasurement>> by_level;
        for (const auto& r : rows)
        {
            r.validate();
            by_level[r.level].push_back(r);
        }

        AnalysisReport report;
        std::vector<double> x, y, sigma;
        for (auto& [level, points] : by_level)
        {
            std::sort(points.begin(), points.end(),
                      [](const auto& a, const auto& b) { return a.signal_power < b.signal_power; });
            LevelReport lr;
            lr.level = level;
            lr.n_star = points.front().n_star;
            for (const auto& p : points)
                if (p.n_star != lr.n_star)
                    throw std::invalid_argument("level " + std::to_string(level) + " has inconsistent n*");

            SlopeOptions so = options.slope;
            if (const auto it = options.linear_max_power_by_level.find(level);
                it != options.linear_max_power_by_level.end())
                so.linear_max_power = it->second;
            lr.slope = fit_linear_slope(points, so);
            lr.knee = detect_knee(points);

            double od = 0.0, pk = 0.0;
            for (const auto& p : points)
            {
                if (p.signal_power > so.linear_max_power)
                {
                    ++lr.points_excluded;
                    continue;
                }
                od += p.od;
                pk += p.phi_pkpk;
                ++lr.points_used;
            }
            lr.od = od / static_cast<double>(lr.points_used);
            lr.phi_pkpk = pk / static_cast<double>(lr.points_used);
            lr.rescaled = rescale_slope(lr.slope, lr.od, lr.phi_pkpk, options.budget);
            for (const auto& flag : lr.slope.flags)
                report.warnings.push_back("level " + std::to_string(level) + ": " + flag);

            x.push_back(lr.n_star);
            y.push_back(lr.rescaled.value);
            sigma.push_back(lr.rescaled.error);
            report.levels.push_back(std::move(lr));
        }
        if (report.levels.size() < 3)
            throw std::invalid_argument("power-law fit needs at least 3 Rydberg levels");
        report.power_law = fit_power_law(x, y, sigma, options.log_space);
        report.power_law_final = options.inflate ? inflate_errors(report.power_law) : report.power_law;
        return report;
    }
}
