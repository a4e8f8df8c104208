#include "rydkerr/cli/commands.hpp"

#include "rydkerr/analysis.hpp"
#include "rydkerr/cli/config.hpp"
#include "rydkerr/cli/provenance.hpp"
#include "rydkerr/constants.hpp"
#include "rydkerr/kerr.hpp"
#include "rydkerr/random.hpp"
#include "rydkerr/simulate.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace rydkerr::cli
{
    namespace
    {
        namespace fs = std::filesystem;
        using nlohmann::json;

        // Raised for bad flag combinations detected after parsing.
        struct UsageError : std::runtime_error
        {
            using std::runtime_error::runtime_error;
        };

        std::string num(double v)
        {
            return data::format_double(v);
        }

        json fit_json(const fit::FitResult& f)
        {
            json j;
            j["names"] = f.names;
            std::vector<double> p(f.params.data(), f.params.data() + f.params.size());
            std::vector<double> e(f.std_errors.data(), f.std_errors.data() + f.std_errors.size());
            j["params"] = p;
            j["std_errors"] = e;
            std::vector<std::vector<double>> cov;
            for (Eigen::Index r = 0; r < f.covariance.rows(); ++r)
            {
                std::vector<double> row;
                for (Eigen::Index c = 0; c < f.covariance.cols(); ++c)
                    row.push_back(f.covariance(r, c));
                cov.push_back(row);
            }
            j["covariance"] = cov;
            j["chi2"] = f.chi2;
            j["chi2_reduced"] = f.chi2_reduced;
            j["dof"] = f.dof;
            j["inflation_applied"] = f.inflation_applied;
            j["converged"] = f.converged;
            j["iterations"] = f.iterations;
            j["flags"] = f.flags;
            return j;
        }

        json medium_json(const eit::MediumParams& m)
        {
            return {{"density_m3", m.density},
                    {"length_m", m.length},
                    {"od", m.od},
                    {"probe_waist_m", m.probe_waist},
                    {"beam_area_m2", m.beam_area},
                    {"coupling_rabi_rad_s", m.coupling_rabi},
                    {"probe_rabi_rad_s", m.probe_rabi},
                    {"signal_rabi_rad_s", m.signal_rabi},
                    {"linewidth_rad_s", m.linewidth},
                    {"dephasing_rad_s", m.dephasing},
                    {"coupling_detuning_rad_s", m.coupling_detuning},
                    {"cross_section_m2", m.cross_section},
                    {"wavelength_m", m.wavelength},
                    {"rabi_scale", m.rabi_scale}};
        }

        /// Files are assembled in memory and written only once every output
        /// of a command has been computed.
        class Outputs
        {
        public:
            void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

            void write(const fs::path& dir) const
            {
                fs::create_directories(dir);
                for (const auto& [name, content] : files_)
                {
                    std::ofstream f(dir / name, std::ios::binary);
                    f << content;
                    if (!f)
                        throw std::runtime_error("cannot write " + (dir / name).string());
                }
            }

            std::vector<std::string> names() const
            {
                std::vector<std::string> n;
                for (const auto& f : files_)
                    n.push_back(f.first);
                return n;
            }

        private:
            std::vector<std::pair<std::string, std::string>> files_;
        };

        std::string spectrum_csv(const eit::Spectrum& s, const Provenance& prov)
        {
            std::ostringstream o;
            o << "# " << prov.csv_comment() << '\n' << "delta_p_hz,transmission,phase_rad\n";
            for (std::size_t i = 0; i < s.size(); ++i)
                o << num(s.detunings[i] / constants::two_pi) << ',' << num(s.transmission[i]) << ','
                  << num(s.phase[i]) << '\n';
            return o.str();
        }

        struct Common
        {
            std::string config_path;
            std::optional<std::uint64_t> seed;
            std::optional<std::string> out_dir;
        };

        RunConfig resolve(const Common& c)
        {
            RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
            if (c.seed)
                cfg.seed = c.seed;
            if (c.out_dir)
                cfg.output_dir = *c.out_dir;
            return cfg;
        }

        void add_common(CLI::App* app, Common& c)
        {
            app->add_option("--config", c.config_path, "YAML run configuration");
            app->add_option("--seed", c.seed, "Master RNG seed");
            app->add_option("--out", c.out_dir, "Output directory (overrides output_dir)");
        }

        // ---- spectrum -------------------------------------------------------

        struct SpectrumFlags
        {
            int level = 58;
            bool coupling_off = false;
            std::optional<double> gamma_rel_hz;
            std::optional<double> noise;
            std::optional<double> od;
        };

        int cmd_spectrum(const Common& common, const SpectrumFlags& f, std::ostream& out)
        {
            RunConfig cfg = resolve(common);
            if (f.od)
                cfg.medium.od = f.od;
            if (f.gamma_rel_hz)
                cfg.medium.dephasing_hz = f.gamma_rel_hz;
            const auto species = cfg.make_species();
            const auto state = atoms::RydbergState::make(f.level, species, cfg.make_c6(), cfg.medium.min_level);
            auto m = cfg.make_medium();
            if (f.coupling_off)
                m.coupling_rabi = 0.0;
            if (f.noise && *f.noise > 0.0 && !cfg.seed)
                throw UsageError("--noise needs --seed (or seed in the config)");

            const auto grid = eit::detuning_grid(constants::two_pi * cfg.spectrum.half_span_hz,
                                                 static_cast<std::size_t>(cfg.spectrum.points));
            const auto s = eit::spectrum(m, grid);
            const auto prov = Provenance::make("spectrum", cfg.to_json());

            json summary;
            summary["provenance"] = prov.to_json();
            summary["level"] = state.n;
            summary["n_star"] = state.n_star;
            summary["c6_rad_s_m6"] = state.c6;
            summary["medium"] = medium_json(m);
            summary["resonant_transmission"] = eit::resonant_transmission(m);
            summary["min_transmission"] = *std::min_element(s.transmission.begin(), s.transmission.end());
            if (!f.coupling_off)
            {
                summary["phi_pkpk_rad"] = eit::phi_pkpk(m);
                summary["group_delay_s"] = eit::group_delay(s);
                summary["eit_window_rad_s"] = eit::eit_window(m.coupling_rabi, m.linewidth);
            }
            double odd = 0.0, even = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                const std::size_t j = s.size() - 1 - i;
                odd = std::max(odd, std::abs(s.phase[i] + s.phase[j]));
                even = std::max(even, std::abs(s.transmission[i] - s.transmission[j]));
            }
            summary["phase_odd_residual"] = odd;
            summary["transmission_even_residual"] = even;

            Outputs files;
            const std::string stem = fmt::format("spectrum_n{}{}", f.level, f.coupling_off ? "_off" : "");
            files.add(stem + ".csv", spectrum_csv(s, prov));
            if (f.noise && *f.noise > 0.0)
            {
                const auto noisy = sim::synth_spectrum(m, grid, *f.noise, *cfg.seed);
                files.add(stem + "_noisy.csv", spectrum_csv(noisy, prov));
                summary["noise_sd"] = *f.noise;
            }
            files.add(stem + ".json", summary.dump(2) + "\n");
            files.write(cfg.output_dir);
            summary["files"] = files.names();
            out << summary.dump(2) << '\n';
            return exit_ok;
        }

        // ---- xphase ---------------------------------------------------------

        struct XPhaseFlags
        {
            int level = 68;
            std::vector<double> powers;
            std::optional<int> mc_samples;
            double mc_max_ratio = 0.01;
            std::optional<double> od;
        };

        int cmd_xphase(const Common& common, const XPhaseFlags& f, std::ostream& out, std::ostream& err)
        {
            RunConfig cfg = resolve(common);
            if (f.od)
                cfg.medium.od = f.od;
            const int samples = f.mc_samples.value_or(cfg.montecarlo.samples);
            if (samples != 0 && samples < 1000)
                throw UsageError("--mc-samples must be 0 or >= 1000");
            if (samples > 0 && !cfg.seed)
                throw UsageError("Monte Carlo needs --seed (or seed in the config); use --mc-samples 0 to skip it");

            std::vector<double> powers = f.powers;
            if (powers.empty())
            {
                powers.push_back(0.0);
                for (double p : cfg.sweep.signal_powers_w)
                    powers.push_back(p);
            }
            for (double p : powers)
                if (!(p >= 0.0))
                    throw UsageError("signal powers must be non-negative");

            const auto species = cfg.make_species();
            const auto state = atoms::RydbergState::make(f.level, species, cfg.make_c6(), cfg.medium.min_level);
            const auto m = cfg.make_medium();

            // Calibrated phase: the sweep generator's truth at this cloud.
            auto spec = cfg.make_sweep();
            spec.seed = cfg.seed.value_or(0);
            double scale = spec.phase_scale;
            if (spec.target_slope)
            {
                const auto cal = atoms::RydbergState::make(spec.calibration_level, species, spec.c6, spec.min_level);
                auto base = spec.medium.with_od(0.5 * (spec.od_min + spec.od_max));
                base.dephasing = eit::dephasing_for_transmission(base, spec.transparency);
                const double p0 = 1e-15;
                scale = *spec.target_slope / std::abs(sim::sweep_cell_phase(spec, cal, base, p0, 1.0).phase / p0);
            }
            const auto prov = Provenance::make("xphase", cfg.to_json());

            std::ostringstream csv;
            csv << "# " << prov.csv_comment() << '\n'
                << "signal_power_w,phase_closed_rad,phase_quadrature_rad,phase_mc_rad,phase_mc_se_rad,"
                   "rel_diff_quadrature,mc_z,phase_saturated_rad,validity_ratio,calibrated_phase_rad,"
                   "calibrated_slope_rad_per_w\n";
            double worst_rel = 0.0, worst_z = 0.0;
            std::size_t mc_runs = 0, warnings = 0;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            for (std::size_t i = 0; i < powers.size(); ++i)
            {
                const double p = powers[i];
                const auto k = kerr::KerrInputs::make(m, state, p, cfg.sweep.probe_power_w);
                const auto full = kerr::cross_phase_full(k);
                const double closed = kerr::cross_phase_closed(k.od(), full.blockade_radius, full.rydberg_density > 0.0 ? full.rydberg_density : 0.0);
                const double quad = kerr::cross_phase_quadrature(k);
                const double rel = closed != 0.0 ? std::abs(quad - closed) / std::abs(closed) : std::abs(quad);
                worst_rel = std::max(worst_rel, rel);
                double mc = nan, se = nan, z = nan;
                if (samples > 0 && p > 0.0 && full.validity_ratio <= f.mc_max_ratio)
                {
                    const auto est = kerr::cross_phase_montecarlo(k, static_cast<std::size_t>(samples),
                                                                  *cfg.seed + i, cfg.montecarlo.threads);
                    mc = est.mean;
                    se = est.std_error;
                    z = se > 0.0 ? (mc - closed) / se : 0.0;
                    worst_z = std::max(worst_z, std::abs(z));
                    ++mc_runs;
                }
                const auto sat = kerr::cross_phase_saturated(k);
                if (full.validity_exceeded)
                {
                    ++warnings;
                    err << fmt::format("warning: P_s = {} W: validity ratio {:.3g} exceeds {}\n", num(p),
                                       full.validity_ratio, kerr::validity_threshold);
                }
                const double calibrated = p > 0.0 ? sim::sweep_cell_phase(spec, state, m, p, scale).phase : 0.0;
                csv << num(p) << ',' << num(closed) << ',' << num(quad) << ',' << num(mc) << ',' << num(se) << ','
                    << num(rel) << ',' << num(z) << ',' << num(sat.phase) << ',' << num(full.validity_ratio) << ','
                    << num(calibrated) << ',' << num(p > 0.0 ? calibrated / p : nan) << '\n';
            }

            const auto k1 = kerr::KerrInputs::make(m, state, 1.0);
            const auto r1 = kerr::cross_phase_full(k1);
            json summary;
            summary["provenance"] = prov.to_json();
            summary["level"] = state.n;
            summary["n_star"] = state.n_star;
            summary["c6_rad_s_m6"] = state.c6;
            summary["blockade_radius_m"] = r1.blockade_radius;
            summary["model_slope_rad_per_w"] = r1.phase;
            summary["phase_scale"] = scale;
            summary["max_rel_diff_closed_quadrature"] = worst_rel;
            summary["max_abs_mc_z"] = worst_z;
            summary["mc_points"] = mc_runs;
            summary["validity_warnings"] = warnings;
            summary["saturation_power_w"] = kerr::saturation_power(kerr::KerrInputs::make(m, state, 0.0));

            Outputs files;
            files.add(fmt::format("xphase_n{}.csv", f.level), csv.str());
            files.add(fmt::format("xphase_n{}.json", f.level), summary.dump(2) + "\n");
            files.write(cfg.output_dir);
            summary["files"] = files.names();
            out << summary.dump(2) << '\n';
            return exit_ok;
        }

        // ---- simulate -------------------------------------------------------

        std::string truth_csv(const sim::SweepResult& r, const Provenance& prov)
        {
            std::ostringstream o;
            o << "# " << prov.csv_comment() << '\n'
              << "level,signal_power_w,actual_power_w,od,dephasing_rad_s,phi_pkpk_rad,model_phase_rad,truth_phase_rad\n";
            for (const auto& t : r.truth)
                o << t.level << ',' << num(t.signal_power) << ',' << num(t.actual_power) << ',' << num(t.od) << ','
                  << num(t.dephasing) << ',' << num(t.phi_pkpk) << ',' << num(t.model_phase) << ','
                  << num(t.truth_phase) << '\n';
            return o.str();
        }

        int cmd_simulate(const Common& common, bool skip_beatnote, std::ostream& out, std::ostream& err)
        {
            RunConfig cfg = resolve(common);
            if (!cfg.seed)
                throw UsageError("simulate needs --seed (or seed in the config)");
            try
            {
                cfg.duty.validate();
            }
            catch (const std::invalid_argument& e)
            {
                throw UsageError(std::string("invalid duty cycle: ") + e.what());
            }
            const auto prov = Provenance::make("simulate", cfg.to_json());
            const auto spec = cfg.make_sweep();
            const auto result = sim::synth_sweep(spec);
            for (const auto& w : result.warnings)
                err << "warning: " << w << '\n';

            Outputs files;
            {
                std::ostringstream o;
                data::write_measurements(o, result.rows, {prov.csv_comment()});
                files.add("sweep.csv", o.str());
                files.add("sweep.truth.csv", truth_csv(result, prov));
            }

            const double od_mid = 0.5 * (spec.od_min + spec.od_max);
            auto base = spec.medium.with_od(od_mid);
            base.dephasing = result.dephasing;
            const auto grid = eit::detuning_grid(constants::two_pi * cfg.spectrum.half_span_hz,
                                                 static_cast<std::size_t>(cfg.spectrum.points));
            for (int level : spec.rydberg_levels)
            {
                const auto s = sim::synth_spectrum(base, grid, cfg.spectrum.noise,
                                                   *cfg.seed ^ (0x5bd1e995ull * static_cast<std::uint64_t>(level)));
                files.add(fmt::format("spectrum_n{}.csv", level), spectrum_csv(s, prov));
            }

            json summary;
            summary["provenance"] = prov.to_json();
            summary["rows"] = result.rows.size();
            summary["phase_scale"] = result.phase_scale;
            summary["dephasing_rad_s"] = result.dephasing;
            summary["warnings"] = result.warnings;
            json truth = json::object();
            for (const auto& [level, v] : result.truth_rescaled)
                truth[std::to_string(level)] = v;
            summary["truth_rescaled_slope_rad_per_w"] = truth;

            if (!skip_beatnote)
            {
                const auto state = atoms::RydbergState::make(cfg.beatnote.level, spec.species, spec.c6, spec.min_level);
                const double step =
                    sim::sweep_cell_phase(spec, state, base, cfg.beatnote.signal_power_w, result.phase_scale).phase;
                const auto rec = sim::synth_beatnote(step, cfg.duty, cfg.beatnote.params, *cfg.seed);
                std::string bin(rec.samples.size() * sizeof(double), '\0');
                std::memcpy(bin.data(), rec.samples.data(), bin.size());
                json header;
                header["provenance"] = prov.to_json();
                header["sample_rate_hz"] = rec.sample_rate;
                header["beat_frequency_hz"] = rec.beat_frequency;
                header["samples"] = rec.samples.size();
                header["dtype"] = "float64";
                header["byte_order"] = "little";
                header["phase_step_rad"] = step;
                header["level"] = cfg.beatnote.level;
                header["signal_power_w"] = cfg.beatnote.signal_power_w;
                json markers = json::array();
                for (const auto& w : rec.markers)
                    markers.push_back({w.before.begin, w.before.end, w.during.begin, w.during.end, w.after.begin,
                                       w.after.end});
                header["markers"] = markers;
                const auto name = fmt::format("beatnote_n{}", cfg.beatnote.level);
                files.add(name + ".bin", std::move(bin));
                files.add(name + ".json", header.dump(2) + "\n");
                const auto extracted = analysis::extract_pulse_phase(rec);
                summary["beatnote"] = {{"phase_step_rad", step},
                                       {"extracted_mean_rad", extracted.mean},
                                       {"extracted_sem_rad", extracted.sem},
                                       {"drift_warning", extracted.drift_warning}};
            }
            files.add("campaign.json", summary.dump(2) + "\n");
            files.write(cfg.output_dir);
            summary["files"] = files.names();
            out << summary.dump(2) << '\n';
            return exit_ok;
        }

        // ---- analyze --------------------------------------------------------

        int cmd_analyze(const Common& common, const std::string& dataset, std::ostream& out, std::ostream& err)
        {
            RunConfig cfg = resolve(common);
            std::ifstream in(dataset);
            if (!in)
                throw UsageError("cannot open dataset '" + dataset + "'");
            std::vector<data::XPhaseMeasurement> rows;
            try
            {
                rows = data::read_measurements(in);
            }
            catch (const data::SchemaError& e)
            {
                throw UsageError(dataset + ": " + e.what());
            }
            if (rows.empty())
                throw UsageError(dataset + ": dataset has no rows");
            const auto report = analysis::analyze(rows, cfg.analysis);
            for (const auto& w : report.warnings)
                err << "warning: " << w << '\n';
            auto prov = Provenance::make("analyze", cfg.to_json());

            json summary;
            summary["provenance"] = prov.to_json();
            summary["dataset"] = dataset;
            json levels = json::array();
            std::ostringstream slopes, lines, law;
            slopes << "# " << prov.csv_comment() << '\n'
                   << "level,n_star,slope_rad_per_w,slope_err,od_mean,phi_pkpk_mean,rescaled_rad_per_w,"
                      "rescaled_stat_err,rescaled_err,points_used,points_excluded\n";
            lines << "# " << prov.csv_comment() << '\n'
                  << "level,signal_power_w,phase_over_od_rad,sem_over_od_rad,fit_rad,residual_rad,used\n";
            for (const auto& l : report.levels)
            {
                levels.push_back({{"level", l.level},
                                  {"n_star", l.n_star},
                                  {"slope", fit_json(l.slope)},
                                  {"od_mean", l.od},
                                  {"phi_pkpk_mean", l.phi_pkpk},
                                  {"rescaled_slope", l.rescaled.value},
                                  {"rescaled_stat_error", l.rescaled.stat_error},
                                  {"rescaled_error", l.rescaled.error},
                                  {"points_used", l.points_used},
                                  {"points_excluded", l.points_excluded},
                                  {"knee_detected", l.knee}});
                slopes << l.level << ',' << num(l.n_star) << ',' << num(l.slope.value("slope")) << ','
                       << num(l.slope.error("slope")) << ',' << num(l.od) << ',' << num(l.phi_pkpk) << ','
                       << num(l.rescaled.value) << ',' << num(l.rescaled.stat_error) << ',' << num(l.rescaled.error)
                       << ',' << l.points_used << ',' << l.points_excluded << '\n';
                const double limit = cfg.analysis.linear_max_power_by_level.count(l.level)
                                         ? cfg.analysis.linear_max_power_by_level.at(l.level)
                                         : cfg.analysis.slope.linear_max_power;
                for (const auto& r : rows)
                {
                    if (r.level != l.level)
                        continue;
                    const double y = r.phase / r.od;
                    const double fitted = l.slope.value("intercept") + l.slope.value("slope") * r.signal_power;
                    lines << r.level << ',' << num(r.signal_power) << ',' << num(y) << ',' << num(r.sem / r.od) << ','
                          << num(fitted) << ',' << num(y - fitted) << ',' << (r.signal_power <= limit ? 1 : 0) << '\n';
                }
            }
            summary["levels"] = levels;
            summary["power_law"] = fit_json(report.power_law);
            summary["power_law_inflated"] = fit_json(report.power_law_final);
            summary["exponent"] = report.power_law_final.value("exponent");
            summary["exponent_error"] = report.power_law_final.error("exponent");
            summary["exponent_error_uninflated"] = report.power_law.error("exponent");
            summary["chi2_reduced"] = report.power_law.chi2_reduced;
            summary["warnings"] = report.warnings;

            law << "# " << prov.csv_comment() << '\n' << "n_star,rescaled_abs_rad_per_w,error,fit,residual_log\n";
            const double amp = report.power_law.value("amplitude");
            const double p = report.power_law.value("exponent");
            for (const auto& l : report.levels)
            {
                const double y = std::abs(l.rescaled.value);
                const double fitted = amp * std::pow(l.n_star, p);
                law << num(l.n_star) << ',' << num(y) << ',' << num(l.rescaled.error) << ',' << num(fitted) << ','
                    << num(std::log(y / fitted)) << '\n';
            }

            Outputs files;
            files.add("analysis.json", summary.dump(2) + "\n");
            files.add("slopes.csv", slopes.str());
            files.add("slope_fits.csv", lines.str());
            files.add("power_law.csv", law.str());
            files.write(cfg.output_dir);
            summary["files"] = files.names();
            out << json{{"exponent", summary["exponent"]},
                        {"exponent_error", summary["exponent_error"]},
                        {"exponent_error_uninflated", summary["exponent_error_uninflated"]},
                        {"chi2_reduced", summary["chi2_reduced"]},
                        {"inflation", report.power_law_final.inflation_applied},
                        {"levels", report.levels.size()},
                        {"files", summary["files"]}}
                       .dump(2)
                << '\n';
            return exit_ok;
        }

        // ---- convert --------------------------------------------------------

        struct ConvertFlags
        {
            double slope = 0.0;           // rad/W
            double group_delay = 0.0;     // s
            double power = 1e-9;          // W
            std::optional<double> dwell;  // s, defaults to the group delay
            std::optional<double> waist;
            std::optional<double> length;
            std::optional<double> wavelength;
        };

        int cmd_convert(const Common& common, const ConvertFlags& f, std::ostream& out)
        {
            const RunConfig cfg = resolve(common);
            const double waist = f.waist.value_or(cfg.medium.probe_waist_m);
            const double length = f.length.value_or(cfg.medium.length_m);
            const double wavelength = f.wavelength.value_or(cfg.species.probe_wavelength_m);
            const double dwell = f.dwell.value_or(f.group_delay);
            json j;
            j["provenance"] = Provenance::make("convert", cfg.to_json()).to_json();
            j["slope_rad_per_w"] = f.slope;
            j["chi3_m2_per_v2"] = kerr::chi3_from_slope(f.slope, waist, length, wavelength, cfg.medium.area);
            j["per_photon_phase_rad"] = kerr::per_photon_phase(f.slope, f.group_delay, wavelength);
            j["photons_in_medium"] = eit::photons_in_medium(f.power, dwell, wavelength);
            j["inputs"] = {{"group_delay_s", f.group_delay}, {"power_w", f.power}, {"dwell_s", dwell},
                           {"waist_m", waist}, {"length_m", length}, {"wavelength_m", wavelength}};
            out << j.dump(2) << '\n';
            return exit_ok;
        }
    }

    int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
    {
        CLI::App app{"Rydberg-EIT cross-Kerr simulator and analysis toolkit", "rydkerr"};
        app.require_subcommand(1);
        app.set_version_flag("--version", toolkit_version());

        Common common;

        auto* spectrum = app.add_subcommand("spectrum", "EIT transmission and phase spectrum");
        SpectrumFlags sf;
        add_common(spectrum, common);
        spectrum->add_option("--n", sf.level, "Principal quantum number");
        spectrum->add_flag("--coupling-off", sf.coupling_off, "Bare two-level absorption (Omega_c = 0)");
        spectrum->add_option("--gamma-rel", sf.gamma_rel_hz, "Two-photon dephasing / 2 pi (Hz)");
        spectrum->add_option("--noise", sf.noise, "Also write a noisy copy with this SD");
        spectrum->add_option("--od", sf.od, "Optical depth override");

        auto* xphase = app.add_subcommand("xphase", "Cross-phase model by closed form, quadrature and Monte Carlo");
        XPhaseFlags xf;
        add_common(xphase, common);
        xphase->add_option("--n", xf.level, "Principal quantum number");
        xphase->add_option("--powers", xf.powers, "Signal powers (W)");
        xphase->add_option("--mc-samples", xf.mc_samples, "Monte-Carlo samples per power (0 disables)");
        xphase->add_option("--mc-max-ratio", xf.mc_max_ratio, "Largest rho_ryd V_b for Monte Carlo");
        xphase->add_option("--od", xf.od, "Optical depth override");

        auto* simulate = app.add_subcommand("simulate", "Synthetic campaign: spectra, beat note and power sweep");
        bool skip_beatnote = false;
        add_common(simulate, common);
        simulate->add_flag("--no-beatnote", skip_beatnote, "Skip the beat-note record");

        auto* analyze = app.add_subcommand("analyze", "Slope fits, rescaling and power-law fit of a sweep");
        std::string dataset;
        add_common(analyze, common);
        analyze->add_option("dataset", dataset, "Sweep CSV")->required();

        auto* convert = app.add_subcommand("convert", "chi3, per-photon phase and photon number from a slope");
        ConvertFlags cf;
        add_common(convert, common);
        convert->add_option("--slope", cf.slope, "Cross-phase slope (rad/W)")->required();
        convert->add_option("--group-delay", cf.group_delay, "Group delay (s)")->required();
        convert->add_option("--power", cf.power, "Signal power for the photon count (W)");
        convert->add_option("--dwell", cf.dwell, "Dwell time for the photon count (s)");
        convert->add_option("--waist", cf.waist, "Probe waist (m)");
        convert->add_option("--length", cf.length, "Medium length (m)");
        convert->add_option("--wavelength", cf.wavelength, "Probe wavelength (m)");

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        if (!reversed.empty())
            reversed.pop_back();
        try
        {
            app.parse(reversed);
        }
        catch (const CLI::ParseError& e)
        {
            const int code = app.exit(e, out, err);
            return code == 0 ? exit_ok : exit_usage;
        }

        try
        {
            if (*spectrum)
                return cmd_spectrum(common, sf, out);
            if (*xphase)
                return cmd_xphase(common, xf, out, err);
            if (*simulate)
                return cmd_simulate(common, skip_beatnote, out, err);
            if (*analyze)
                return cmd_analyze(common, dataset, out, err);
            if (*convert)
                return cmd_convert(common, cf, out);
        }
        catch (const ConfigError& e)
        {
            err << "config error: " << e.what() << '\n';
            return exit_usage;
        }
        catch (const UsageError& e)
        {
            err << "error: " << e.what() << '\n';
            return exit_usage;
        }
        catch (const std::invalid_argument& e)
        {
            err << "error: " << e.what() << '\n';
            return exit_usage;
        }
        catch (const std::exception& e)
        {
            err << "numerical failure: " << e.what() << '\n';
            return exit_numerical;
        }
        return exit_usage;
    }
}
