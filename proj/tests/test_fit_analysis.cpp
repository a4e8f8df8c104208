#include "support.hpp"

#include "rydkerr/analysis.hpp"
#include "rydkerr/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace rydkerr;
using testing::rel_diff;
using testing::two_pi;

namespace
{
    fit::FitResult fake_fit(double sigma, double chi2_reduced)
    {
        fit::FitResult f;
        f.names = {"exponent"};
        f.params = Eigen::VectorXd::Constant(1, 5.7);
        f.std_errors = Eigen::VectorXd::Constant(1, sigma);
        f.covariance = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
        f.chi2_reduced = chi2_reduced;
        f.dof = 5;
        f.chi2 = chi2_reduced * 5;
        return f;
    }

    std::vector<data::XPhaseMeasurement> line_points(double slope, double intercept, std::vector<double> powers,
                                                     double od = 1.0)
    {
        std::vector<data::XPhaseMeasurement> out;
        for (double p : powers)
        {
            data::XPhaseMeasurement m;
            m.level = 68;
            m.n_star = 65.4;
            m.signal_power = p;
            m.probe_power = 1e-9;
            m.phase = od * (intercept + slope * p);
            m.sem = 1e-4;
            m.od = od;
            m.phi_pkpk = 0.5 * od;
            out.push_back(m);
        }
        return out;
    }

    sim::BeatNoteParams quiet_params()
    {
        sim::BeatNoteParams p;
        p.pulses = 40;
        return p;
    }
}

TEST_CASE("error inflation")
{
    const auto f = fit::inflate_errors(fake_fit(0.4, 11.0));
    CHECK(f.error("exponent") == doctest::Approx(0.4 * std::sqrt(11.0)).epsilon(1e-14));
    CHECK(f.error("exponent") == doctest::Approx(1.33).epsilon(0.01 / 1.33));
    CHECK(f.inflation_applied == doctest::Approx(std::sqrt(11.0)));
    CHECK(f.covariance(0, 0) == doctest::Approx(0.16));   // errors carry the factor, not the covariance

    CHECK(fit::inflate_errors(fake_fit(0.4, 1.0)).error("exponent") == 0.4);
    CHECK(fit::inflate_errors(fake_fit(0.4, 0.5)).error("exponent") == 0.4);
    CHECK(fit::inflate_errors(fake_fit(0.4, 0.5)).inflation_applied == 1.0);
}

TEST_CASE("weighted line")
{
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 10}, s(5, 0.1);
    const auto f = fit::weighted_line(x, y, s);
    CHECK(f.value("slope") == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(f.value("intercept")) < 1e-13);
    CHECK(f.chi2_reduced < 1e-20);
    CHECK(f.dof == 3);

    CHECK_THROWS_AS(fit::weighted_line({1, 2}, {1, 2}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(fit::weighted_line({1, 2, 3}, {1, 2, 3}, {1, 0, 1}), std::invalid_argument);

    // Tiny abscissae (watts) must not spoil the solution.
    const std::vector<double> xw{1e-10, 5e-10, 1e-9, 2e-9};
    std::vector<double> yw;
    for (double v : xw)
        yw.push_back(3e-5 - 8e6 * v);
    const auto g = fit::weighted_line(xw, yw, {1e-4, 1e-4, 1e-4, 1e-4});
    CHECK(g.value("slope") == doctest::Approx(-8e6).epsilon(1e-10));
    CHECK(g.value("intercept") == doctest::Approx(3e-5).epsilon(1e-8));
}

TEST_CASE("Levenberg-Marquardt recovers an exponential decay")
{
    const std::vector<double> t{0, 0.5, 1, 1.5, 2, 3, 4, 5};
    const auto model = [](double a, double k, double x) { return a * std::exp(-k * x); };
    const fit::ResidualFn res = [&](const Eigen::VectorXd& q) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = (model(q[0], q[1], t[i]) - model(2.5, 0.7, t[i])) / 0.01;
        return r;
    };
    const auto f = fit::levenberg_marquardt(res, Eigen::Vector2d(1.0, 0.2), {"a", "k"});
    CHECK(f.converged);
    CHECK(f.value("a") == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(f.value("k") == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(f.std_errors[0] > 0.0);
    CHECK_THROWS(f.index("missing"));
}

TEST_CASE("spectrum fit recovers noiseless parameters")
{
    auto m = testing::lab_medium(2.0);
    m.dephasing = eit::dephasing_for_transmission(m, 0.6);
    const auto grid = eit::detuning_grid(two_pi * 20e6, 401);
    const auto f = analysis::fit_spectrum(eit::spectrum(m, grid));
    CHECK(f.converged);
    CHECK(rel_diff(f.value("od"), 2.0) < 1e-8);
    CHECK(rel_diff(f.value("coupling_rabi"), m.coupling_rabi) < 1e-8);
    CHECK(rel_diff(f.value("dephasing"), m.dephasing) < 1e-6);
    CHECK(rel_diff(f.value("phi_pkpk"), eit::phi_pkpk(m)) < 1e-8);
}

TEST_CASE("spectrum fit under 1% noise")
{
    auto m = testing::lab_medium(2.0);
    m.dephasing = eit::dephasing_for_transmission(m, 0.6);
    const auto grid = eit::detuning_grid(two_pi * 20e6, 401);
    const auto s = sim::synth_spectrum(m, grid, 0.01, 5);
    const auto f = analysis::fit_spectrum(s, {.noise_sd = 0.01});
    CHECK(rel_diff(f.value("od"), 2.0) < 0.05);
    CHECK(rel_diff(f.value("coupling_rabi"), m.coupling_rabi) < 0.05);
    CHECK(rel_diff(f.value("dephasing"), m.dephasing) < 0.15);
    CHECK(f.error("od") > 0.0);
}

TEST_CASE("spectrum fit with the coupling beam off")
{
    auto m = testing::lab_medium(2.0);
    m.coupling_rabi = 0.0;
    const auto grid = eit::detuning_grid(two_pi * 20e6, 401);
    const auto f = analysis::fit_spectrum(sim::synth_spectrum(m, grid, 0.01, 9),
                                          {.noise_sd = 0.01, .coupling_off = true});
    CHECK(rel_diff(f.value("od"), 2.0) < 0.02);
}

TEST_CASE("spectrum fit error bars are calibrated")
{
    auto m = testing::lab_medium(1.5);
    m.dephasing = eit::dephasing_for_transmission(m, 0.6);
    const auto grid = eit::detuning_grid(two_pi * 20e6, 201);
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        const auto f = analysis::fit_spectrum(sim::synth_spectrum(m, grid, 0.01, 1000 + seed), {.noise_sd = 0.01});
        if (std::abs(f.value("od") - m.od) <= 2.0 * f.error("od"))
            ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("linear slope fit")
{
    const std::vector<double> powers{0.1e-9, 0.25e-9, 0.5e-9, 1e-9, 1.5e-9, 2e-9, 5e-9, 10e-9};
    const auto pts = line_points(-8e6, 0.0, powers, 1.5);
    const auto f = analysis::fit_linear_slope(pts);
    CHECK(f.value("slope") == doctest::Approx(-8e6).epsilon(1e-10));
    CHECK(std::abs(f.value("intercept")) < 1e-12);
    CHECK(f.dof == 4);
    CHECK(!f.flags.empty());

    const auto raw = analysis::fit_linear_slope(pts, {.divide_by_od = false});
    CHECK(raw.value("slope") == doctest::Approx(-1.2e7).epsilon(1e-10));

    const auto few = line_points(-8e6, 0.0, {1e-9, 5e-9, 10e-9});
    CHECK_THROWS_AS(analysis::fit_linear_slope(few), std::invalid_argument);
}

TEST_CASE("linear slope fit error bars are calibrated")
{
    testing::Gen g(77);
    const std::vector<double> powers{0.2e-9, 0.4e-9, 0.6e-9, 0.8e-9, 1e-9, 1.5e-9, 2e-9};
    int covered = 0;
    for (int trial = 0; trial < 100; ++trial)
    {
        auto pts = line_points(-8e6, 0.0, powers);
        for (auto& p : pts)
            p.phase += p.sem * g.normal();
        const auto f = analysis::fit_linear_slope(pts);
        if (std::abs(f.value("slope") + 8e6) <= 2.0 * f.error("slope"))
            ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("knee detection flags roll-over")
{
    std::vector<double> powers;
    for (int i = 1; i <= 9; ++i)
        powers.push_back(i * 1e-9);
    CHECK_FALSE(analysis::detect_knee(line_points(-8e6, 0.0, powers)));
    auto bent = line_points(-8e6, 0.0, powers);
    for (auto& p : bent)
        p.phase = -8e6 * p.signal_power / (1.0 + p.signal_power / 3e-9);
    CHECK(analysis::detect_knee(bent));
}

TEST_CASE("rescaled slope and error budget")
{
    auto f = fit::weighted_line({1, 2, 3}, {-1, -2, -3}, {0.1, 0.1, 0.1});
    f.std_errors[1] = 0.05;
    const auto r = analysis::rescale_slope(f, 2.0, 1.0, {.power_drift = 0.10, .phi_pkpk = 0.0});
    CHECK(r.value == doctest::Approx(-2.0));
    CHECK(r.stat_error == doctest::Approx(0.10));
    CHECK(r.error / std::abs(r.value) == doctest::Approx(std::hypot(0.05, 0.10)).epsilon(1e-12));

    // phi_pk-pk proportional to OD: the rescaled slope no longer depends on OD.
    const auto a = analysis::rescale_slope(f, 1.0, 0.5);
    const auto b = analysis::rescale_slope(f, 3.0, 1.5);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-15));

    const analysis::ErrorBudget defaults;
    CHECK(defaults.power_drift == 0.10);
    CHECK(defaults.phi_pkpk >= 0.05);
    CHECK(defaults.phi_pkpk <= 0.10);
    CHECK_THROWS_AS(analysis::rescale_slope(f, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("power-law fit")
{
    std::vector<double> x, y, s;
    for (double n : {46.4, 51.4, 55.4, 59.4, 62.4, 65.4, 67.4})
    {
        x.push_back(n);
        y.push_back(-3.0 * std::pow(n, 5.5));
        s.push_back(0.1 * std::pow(n, 5.5) * 3.0);
    }
    for (bool log_space : {true, false})
    {
        const auto f = analysis::fit_power_law(x, y, s, log_space);
        CHECK(f.value("exponent") == doctest::Approx(5.5).epsilon(1e-9));
        CHECK(f.value("amplitude") == doctest::Approx(3.0).epsilon(1e-7));
        CHECK(f.chi2_reduced < 1e-12);
    }
    // Rescaling y leaves the exponent alone.
    std::vector<double> y2 = y;
    for (auto& v : y2)
        v *= 17.0;
    std::vector<double> s2 = s;
    for (auto& v : s2)
        v *= 17.0;
    CHECK(analysis::fit_power_law(x, y2, s2).value("exponent") == doctest::Approx(5.5).epsilon(1e-9));

    std::vector<double> mixed = y;
    mixed[2] = -mixed[2];
    CHECK_THROWS_AS(analysis::fit_power_law(x, mixed, s), std::invalid_argument);
    CHECK_THROWS_AS(analysis::fit_power_law(std::span(x).first(2), std::span(y).first(2), std::span(s).first(2)),
                    std::invalid_argument);
}

TEST_CASE("power-law fit error bars are calibrated")
{
    testing::Gen g(4242);
    const std::vector<double> x{46.4, 51.4, 55.4, 59.4, 62.4, 65.4, 67.4};
    int covered = 0;
    for (int trial = 0; trial < 100; ++trial)
    {
        std::vector<double> y, s;
        for (double n : x)
        {
            const double v = std::pow(n, 5.5);
            y.push_back(v * (1.0 + 0.08 * g.normal()));
            s.push_back(0.08 * v);
        }
        const auto f = analysis::fit_power_law(x, y, s);
        if (std::abs(f.value("exponent") - 5.5) <= 2.0 * f.error("exponent"))
            ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("reference dataset reproduces the reported fit")
{
    const auto rows = sim::reference_dataset();
    CHECK(rows.size() == 42);
    const auto rep = analysis::analyze(rows);
    CHECK(rep.levels.size() == 7);
    CHECK(rep.power_law.value("exponent") == doctest::Approx(5.7).epsilon(1e-6));
    CHECK(rep.power_law.error("exponent") == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(rep.power_law.chi2_reduced == doctest::Approx(11.0).epsilon(1e-6));
    CHECK(rep.power_law_final.error("exponent") == doctest::Approx(1.33).epsilon(0.01 / 1.33));
}

TEST_CASE("analyze input validation")
{
    CHECK_THROWS_AS(analysis::analyze({}), std::invalid_argument);
    auto rows = sim::reference_dataset();
    rows.resize(12);   // two levels only
    CHECK_THROWS_AS(analysis::analyze(rows), std::invalid_argument);
}

TEST_CASE("beat-note extraction: noiseless step")
{
    const sim::DutyCycle duty;
    const auto rec = sim::synth_beatnote(8e-3, duty, quiet_params(), 1);
    const auto r = analysis::extract_pulse_phase(rec);
    CHECK(r.delta.size() == 40);
    CHECK(std::abs(r.mean - 8e-3) < 1e-12);
    CHECK_FALSE(r.drift_warning);

    const auto zero = analysis::extract_pulse_phase(sim::synth_beatnote(0.0, duty, quiet_params(), 1));
    CHECK(std::abs(zero.mean) < 1e-14);
}

TEST_CASE("beat-note extraction: linear drift")
{
    const sim::DutyCycle duty;
    auto p = quiet_params();
    p.phase_drift_rate = 2e3;   // rad/s
    const auto r = analysis::extract_pulse_phase(sim::synth_beatnote(8e-3, duty, p, 1));
    CHECK(std::abs(r.mean - 8e-3) < 1e-9);
    CHECK(r.drift_warning);
}

TEST_CASE("beat-note extraction: drift carrying the phase through +-pi")
{
    const sim::DutyCycle duty;
    sim::BeatNoteParams p;
    p.phase_drift_rate = 5e3;   // several radians over the record
    const auto r = analysis::extract_pulse_phase(sim::synth_beatnote(8e-3, duty, p, 1));
    CHECK(std::abs(r.mean - 8e-3) < 1e-9);
    for (double d : r.delta)
        CHECK(std::abs(d - 8e-3) < 1e-9);
}

TEST_CASE("beat-note extraction: zero step under noise is unbiased")
{
    const sim::DutyCycle duty;
    auto p = quiet_params();
    p.amplitude_noise = 0.01;
    p.phase_noise = 0.038;
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        const auto r = analysis::extract_pulse_phase(sim::synth_beatnote(0.0, duty, p, 500 + seed));
        CHECK(r.sem > 0.0);
        if (std::abs(r.mean) <= 2.0 * r.sem)
            ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("beat-note extraction rejects inconsistent records")
{
    const sim::DutyCycle duty;
    auto rec = sim::synth_beatnote(8e-3, duty, quiet_params(), 1);
    rec.markers.clear();
    CHECK_THROWS_AS(analysis::extract_pulse_phase(rec), std::invalid_argument);
    auto rec2 = sim::synth_beatnote(8e-3, duty, quiet_params(), 1);
    rec2.markers[0].during.begin += 3;
    CHECK_THROWS(analysis::extract_pulse_phase(rec2));
}
