#include "rydkerr/cli/config.hpp"

#include "rydkerr/constants.hpp"

#include <yaml-cpp/yaml.h>

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

namespace rydkerr::cli
{
    namespace
    {
        [[noreturn]] void fail(const std::string& source, const YAML::Node& node, const std::string& what)
        {
            const auto mark = node.Mark();
            if (mark.is_null())
                throw ConfigError(fmt::format("{}: {}", source, what));
            throw ConfigError(fmt::format("{}:{}: {}", source, mark.line + 1, what));
        }

        class Section
        {
        public:
            Section(const YAML::Node& node, std::string path, const std::string& source)
                : node_(node), path_(std::move(path)), source_(source)
            {
                if (node_ && !node_.IsMap())
                    fail(source_, node_, "'" + path_ + "' must be a mapping");
            }

            ~Section() noexcept(false)
            {
                if (!node_ || std::uncaught_exceptions() > 0)
                    return;
                for (const auto& kv : node_)
                {
                    const auto key = kv.first.as<std::string>();
                    if (!seen_.count(key))
                        fail(source_, kv.first, "unknown key '" + qualified(key) + "'");
                }
            }

            Section child(const std::string& key)
            {
                seen_.insert(key);
                return Section(node_ ? node_[key] : YAML::Node(), qualified(key), source_);
            }

            template <class T>
            void get(const std::string& key, T& out)
            {
                seen_.insert(key);
                if (!node_ || !node_[key])
                    return;
                const YAML::Node v = node_[key];
                try
                {
                    out = v.as<T>();
                }
                catch (const YAML::Exception&)
                {
                    fail(source_, v, "'" + qualified(key) + "' has the wrong type");
                }
            }

            template <class T>
            void get(const std::string& key, std::optional<T>& out)
            {
                seen_.insert(key);
                if (!node_ || !node_[key])
                    return;
                if (node_[key].IsNull())
                {
                    out.reset();
                    return;
                }
                T v{};
                get(key, v);
                out = v;
            }

            /// Rejects values failing `ok`.
            template <class T, class Pred>
            void get(const std::string& key, T& out, Pred ok, const char* requirement)
            {
                get(key, out);
                if (node_ && node_[key] && !ok(out))
                    fail(source_, node_[key], "'" + qualified(key) + "' " + requirement);
            }

            const YAML::Node& node() const { return node_; }
            YAML::Node at(const std::string& key) const { return node_ ? node_[key] : YAML::Node(); }

            std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

        private:
            YAML::Node node_;
            std::string path_;
            const std::string& source_;
            std::set<std::string> seen_;
        };

        const auto positive = [](double v) { return v > 0.0; };
        const auto non_negative = [](double v) { return v >= 0.0; };
    }

    RunConfig parse_config(const std::string& yaml_text, const std::string& source)
    {
        YAML::Node root;
        try
        {
            root = YAML::Load(yaml_text);
        }
        catch (const YAML::ParserException& e)
        {
            throw ConfigError(fmt::format("{}:{}: {}", source, e.mark.line + 1, e.msg));
        }
        RunConfig c;
        if (!root || root.IsNull())
            return c;

        Section top(root, "", source);
        {
            std::optional<std::uint64_t> seed;
            top.get("seed", seed);
            c.seed = seed;
        }
        top.get("output_dir", c.output_dir);
        {
            auto s = top.child("species");
            s.get("name", c.species.name);
            s.get("probe_wavelength_m", c.species.probe_wavelength_m, positive, "must be positive");
            s.get("linewidth_hz", c.species.linewidth_hz, positive, "must be positive");
            s.get("quantum_defect", c.species.quantum_defect, [](double d) { return d >= 0.0 && d < 4.0; },
                  "must lie in [0, 4)");
        }
        {
            auto s = top.child("c6");
            std::string mode = "published";
            s.get("mode", mode);
            if (mode == "published")
                c.c6.mode = atoms::C6Mode::Published;
            else if (mode == "power_law")
                c.c6.mode = atoms::C6Mode::PowerLaw;
            else
                fail(source, s.at("mode"), "'c6.mode' must be 'published' or 'power_law'");
            s.get("reference_n_star", c.c6.reference_n_star, positive, "must be positive");
            s.get("reference_c6", c.c6.reference_c6);
            if (c.c6.reference_c6 && !(*c.c6.reference_c6 > 0.0))
                fail(source, s.at("reference_c6"), "'c6.reference_c6' must be positive");
        }
        {
            auto s = top.child("medium");
            s.get("density_m3", c.medium.density_m3, positive, "must be positive");
            s.get("length_m", c.medium.length_m, positive, "must be positive");
            s.get("probe_waist_m", c.medium.probe_waist_m, positive, "must be positive");
            s.get("coupling_rabi_hz", c.medium.coupling_rabi_hz, positive, "must be positive");
            s.get("od", c.medium.od);
            if (c.medium.od && !(*c.medium.od > 0.0))
                fail(source, s.at("od"), "'medium.od' must be positive");
            s.get("dephasing_hz", c.medium.dephasing_hz);
            if (c.medium.dephasing_hz && !(*c.medium.dephasing_hz >= 0.0))
                fail(source, s.at("dephasing_hz"), "'medium.dephasing_hz' must be non-negative");
            s.get("transparency", c.medium.transparency, [](double t) { return t > 0.0 && t < 1.0; },
                  "must lie in (0, 1)");
            s.get("rabi_scale", c.medium.rabi_scale, positive, "must be positive");
            std::string area = "pi_w2";
            s.get("area_convention", area);
            if (area == "pi_w2")
                c.medium.area = eit::AreaConvention::PiW2;
            else if (area == "half_pi_w2")
                c.medium.area = eit::AreaConvention::HalfPiW2;
            else
                fail(source, s.at("area_convention"), "'medium.area_convention' must be 'pi_w2' or 'half_pi_w2'");
            s.get("min_level", c.medium.min_level, [](int n) { return n >= 1; }, "must be >= 1");
        }
        {
            auto s = top.child("spectrum");
            s.get("half_span_hz", c.spectrum.half_span_hz, positive, "must be positive");
            s.get("points", c.spectrum.points, [](int n) { return n >= 9; }, "must be >= 9");
            s.get("noise", c.spectrum.noise, non_negative, "must be non-negative");
        }
        {
            auto s = top.child("duty_cycle");
            s.get("trap_s", c.duty.trap_duration, non_negative, "must be non-negative");
            s.get("measurement_s", c.duty.measurement_duration, positive, "must be positive");
            s.get("spectroscopy_s", c.duty.spectroscopy_window, non_negative, "must be non-negative");
            s.get("pulse_count", c.duty.pulse_count, [](int n) { return n >= 1; }, "must be >= 1");
            s.get("pulse_width_s", c.duty.pulse_width, positive, "must be positive");
            s.get("pulse_separation_s", c.duty.pulse_separation, positive, "must be positive");
            s.get("separation_is_gap", c.duty.separation_is_gap);
        }
        {
            auto s = top.child("beatnote");
            auto& p = c.beatnote.params;
            s.get("sample_rate_hz", p.sample_rate, positive, "must be positive");
            s.get("beat_frequency_hz", p.beat_frequency, positive, "must be positive");
            s.get("amplitude_noise", p.amplitude_noise, non_negative, "must be non-negative");
            s.get("phase_noise_rad", p.phase_noise, non_negative, "must be non-negative");
            s.get("drift_rad_per_s", p.phase_drift_rate);
            s.get("guard_fraction", p.guard_fraction, [](double g) { return g >= 0.0 && g < 0.5; },
                  "must lie in [0, 0.5)");
            s.get("level", c.beatnote.level);
            s.get("signal_power_w", c.beatnote.signal_power_w, positive, "must be positive");
        }
        {
            auto s = top.child("sweep");
            auto& w = c.sweep;
            s.get("levels", w.levels);
            s.get("signal_powers_w", w.signal_powers_w);
            s.get("probe_power_w", w.probe_power_w, non_negative, "must be non-negative");
            s.get("shots_per_point", w.shots_per_point, [](int n) { return n >= 1; }, "must be >= 1");
            s.get("phase_noise_rad", w.phase_noise_rad, non_negative, "must be non-negative");
            s.get("od_min", w.od_min, positive, "must be positive");
            s.get("od_max", w.od_max, positive, "must be positive");
            s.get("power_drift", w.power_drift, [](double f) { return f >= 0.0 && f < 1.0; }, "must lie in [0, 1)");
            s.get("phi_pkpk_noise", w.phi_pkpk_noise, non_negative, "must be non-negative");
            s.get("saturation", w.saturation);
            s.get("substitute_phi_pkpk", w.substitute_phi_pkpk);
            s.get("target_slope_rad_per_w", w.target_slope_rad_per_w);
            s.get("calibration_level", w.calibration_level);
            s.get("phase_scale", w.phase_scale, positive, "must be positive");
            s.get("saturation_onset_w", w.saturation_onset_w, positive, "must be positive");
            if (w.levels.empty())
                fail(source, s.at("levels"), "'sweep.levels' must not be empty");
            if (w.od_max < w.od_min)
                fail(source, s.at("od_max"), "'sweep.od_max' must be >= 'sweep.od_min'");
        }
        {
            auto s = top.child("analysis");
            auto& a = c.analysis;
            s.get("linear_max_power_w", a.slope.linear_max_power, positive, "must be positive");
            s.get("linear_max_power_by_level", a.linear_max_power_by_level);
            s.get("power_drift_error", a.budget.power_drift, non_negative, "must be non-negative");
            s.get("phi_pkpk_error", a.budget.phi_pkpk, non_negative, "must be non-negative");
            s.get("inflate", a.inflate);
            s.get("log_space", a.log_space);
        }
        {
            auto s = top.child("montecarlo");
            s.get("samples", c.montecarlo.samples, [](int n) { return n >= 1000; }, "must be >= 1000");
            s.get("threads", c.montecarlo.threads);
        }
        return c;
    }

    RunConfig load_config(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str(), path);
    }

    atoms::Species RunConfig::make_species() const
    {
        return atoms::Species::make(species.name, species.probe_wavelength_m,
                                    constants::two_pi * species.linewidth_hz, species.quantum_defect);
    }

    atoms::C6Model RunConfig::make_c6() const
    {
        const auto sp = make_species();
        if (c6.mode == atoms::C6Mode::Published)
            return atoms::C6Model::published(sp);
        if (c6.reference_c6)
            return atoms::C6Model::power_law(c6.reference_n_star, *c6.reference_c6);
        return atoms::C6Model::power_law_anchored(sp, c6.reference_n_star);
    }

    eit::MediumParams RunConfig::make_medium() const
    {
        const auto sp = make_species();
        auto m = eit::MediumParams::from_geometry(sp, medium.density_m3, medium.length_m, medium.probe_waist_m,
                                                  constants::two_pi * medium.coupling_rabi_hz, medium.area);
        m.rabi_scale = medium.rabi_scale;
        if (medium.od)
            m = m.with_od(*medium.od);
        if (medium.dephasing_hz)
            m.dephasing = constants::two_pi * *medium.dephasing_hz;
        else
            m.dephasing = eit::dephasing_for_transmission(m, medium.transparency);
        return m;
    }

    sim::SweepSpec RunConfig::make_sweep() const
    {
        sim::SweepSpec s;
        s.species = make_species();
        s.c6 = make_c6();
        s.medium = make_medium();
        s.rydberg_levels = sweep.levels;
        s.signal_powers = sweep.signal_powers_w;
        s.probe_power = sweep.probe_power_w;
        s.shots_per_point = sweep.shots_per_point;
        s.phase_noise_sd = sweep.phase_noise_rad;
        s.od_min = sweep.od_min;
        s.od_max = sweep.od_max;
        s.power_drift = sweep.power_drift;
        s.phi_pkpk_noise = sweep.phi_pkpk_noise;
        s.transparency = medium.transparency;
        s.saturation = sweep.saturation;
        s.substitute_phi_pkpk = sweep.substitute_phi_pkpk;
        s.target_slope = sweep.target_slope_rad_per_w;
        s.calibration_level = sweep.calibration_level;
        s.phase_scale = sweep.phase_scale;
        s.min_level = medium.min_level;
        s.seed = seed;
        s.threads = montecarlo.threads;
        return s;
    }

    nlohmann::json RunConfig::to_json() const
    {
        using nlohmann::json;
        const auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
        json j;
        j["seed"] = opt(seed);
        j["output_dir"] = output_dir;
        j["species"] = {{"name", species.name},
                        {"probe_wavelength_m", species.probe_wavelength_m},
                        {"linewidth_hz", species.linewidth_hz},
                        {"quantum_defect", species.quantum_defect}};
        j["c6"] = {{"mode", c6.mode == atoms::C6Mode::Published ? "published" : "power_law"},
                   {"reference_n_star", c6.reference_n_star},
                   {"reference_c6", opt(c6.reference_c6)}};
        j["medium"] = {{"density_m3", medium.density_m3},
                       {"length_m", medium.length_m},
                       {"probe_waist_m", medium.probe_waist_m},
                       {"coupling_rabi_hz", medium.coupling_rabi_hz},
                       {"od", opt(medium.od)},
                       {"dephasing_hz", opt(medium.dephasing_hz)},
                       {"transparency", medium.transparency},
                       {"rabi_scale", medium.rabi_scale},
                       {"area_convention", medium.area == eit::AreaConvention::PiW2 ? "pi_w2" : "half_pi_w2"},
                       {"min_level", medium.min_level}};
        j["spectrum"] = {{"half_span_hz", spectrum.half_span_hz},
                         {"points", spectrum.points},
                         {"noise", spectrum.noise}};
        j["duty_cycle"] = {{"trap_s", duty.trap_duration},
                           {"measurement_s", duty.measurement_duration},
                           {"spectroscopy_s", duty.spectroscopy_window},
                           {"pulse_count", duty.pulse_count},
                           {"pulse_width_s", duty.pulse_width},
                           {"pulse_separation_s", duty.pulse_separation},
                           {"separation_is_gap", duty.separation_is_gap}};
        const auto& b = beatnote.params;
        j["beatnote"] = {{"sample_rate_hz", b.sample_rate},
                         {"beat_frequency_hz", b.beat_frequency},
                         {"amplitude_noise", b.amplitude_noise},
                         {"phase_noise_rad", b.phase_noise},
                         {"drift_rad_per_s", b.phase_drift_rate},
                         {"guard_fraction", b.guard_fraction},
                         {"level", beatnote.level},
                         {"signal_power_w", beatnote.signal_power_w}};
        j["sweep"] = {{"levels", sweep.levels},
                      {"signal_powers_w", sweep.signal_powers_w},
                      {"probe_power_w", sweep.probe_power_w},
                      {"shots_per_point", sweep.shots_per_point},
                      {"phase_noise_rad", sweep.phase_noise_rad},
                      {"od_min", sweep.od_min},
                      {"od_max", sweep.od_max},
                      {"power_drift", sweep.power_drift},
                      {"phi_pkpk_noise", sweep.phi_pkpk_noise},
                      {"saturation", sweep.saturation},
                      {"substitute_phi_pkpk", sweep.substitute_phi_pkpk},
                      {"target_slope_rad_per_w", opt(sweep.target_slope_rad_per_w)},
                      {"calibration_level", sweep.calibration_level},
                      {"phase_scale", sweep.phase_scale},
                      {"saturation_onset_w", sweep.saturation_onset_w}};
        json by_level = json::object();
        for (const auto& [level, p] : analysis.linear_max_power_by_level)
            by_level[std::to_string(level)] = p;
        j["analysis"] = {{"linear_max_power_w", analysis.slope.linear_max_power},
                         {"linear_max_power_by_level", by_level},
                         {"power_drift_error", analysis.budget.power_drift},
                         {"phi_pkpk_error", analysis.budget.phi_pkpk},
                         {"inflate", analysis.inflate},
                         {"log_space", analysis.log_space}};
        j["montecarlo"] = {{"samples", montecarlo.samples}, {"threads", montecarlo.threads}};
        return j;
    }
}
