#include "rydkerr/cli/commands.hpp"
#include "rydkerr/dataset.hpp"
#include "rydkerr/simulate.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace rydkerr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{
    struct Result
    {
        int code = 0;
        std::string out, err;
    };

    Result run(std::vector<std::string> args)
    {
        args.insert(args.begin(), "rydkerr");
        std::ostringstream out, err;
        Result r;
        r.code = cli::run(args, out, err);
        r.out = out.str();
        r.err = err.str();
        return r;
    }

    class TempDir
    {
    public:
        TempDir()
        {
            std::random_device rd;
            path_ = fs::temp_directory_path() / ("rydkerr_test_" + std::to_string(rd()) + std::to_string(rd()));
            fs::create_directories(path_);
        }
        ~TempDir() { fs::remove_all(path_); }
        std::string str() const { return path_.string(); }
        fs::path operator/(const std::string& name) const { return path_ / name; }

    private:
        fs::path path_;
    };

    std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    void write(const fs::path& p, const std::string& text)
    {
        std::ofstream(p) << text;
    }

    // Rows of a CSV with '#' comments and the header removed.
    std::vector<std::vector<std::string>> csv_rows(const fs::path& p)
    {
        std::ifstream in(p);
        std::string line;
        std::vector<std::vector<std::string>> rows;
        bool header = true;
        while (std::getline(in, line))
        {
            if (line.empty() || line[0] == '#')
                continue;
            if (header)
            {
                header = false;
                continue;
            }
            rows.push_back(data::split_csv(line));
        }
        return rows;
    }
}

TEST_CASE("spectrum: symmetric output and summary")
{
    TempDir dir;
    const auto r = run({"spectrum", "--n", "58", "--out", dir.str()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "spectrum_n58.csv"));
    const auto summary = json::parse(slurp(dir / "spectrum_n58.json"));
    CHECK(summary["phase_odd_residual"].get<double>() <= 1e-12);
    CHECK(summary["transmission_even_residual"].get<double>() <= 1e-12);
    CHECK(summary["resonant_transmission"].get<double>() == doctest::Approx(0.6).epsilon(1e-9));

    const auto rows = csv_rows(dir / "spectrum_n58.csv");
    CHECK(rows.size() == 401);
    for (const auto& row : rows)
    {
        const double t = std::stod(row[1]);
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
    }
}

TEST_CASE("spectrum: coupling off gives the bare absorption dip")
{
    TempDir dir;
    const auto r = run({"spectrum", "--coupling-off", "--od", "2", "--out", dir.str()});
    REQUIRE(r.code == 0);
    const auto summary = json::parse(slurp(dir / "spectrum_n58_off.json"));
    CHECK(summary["min_transmission"].get<double>() == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("spectrum: explicit dephasing and noisy copy")
{
    TempDir dir;
    CHECK(run({"spectrum", "--noise", "0.01", "--out", dir.str()}).code == 2);   // no seed

    const auto r = run({"spectrum", "--gamma-rel", "100e3", "--noise", "0.01", "--seed", "4", "--out", dir.str()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "spectrum_n58_noisy.csv"));
    const auto summary = json::parse(slurp(dir / "spectrum_n58.json"));
    const double t = summary["resonant_transmission"].get<double>();
    CHECK(t > 0.5);
    CHECK(t < 1.0);
}

TEST_CASE("xphase: closed form, quadrature and Monte Carlo agree")
{
    TempDir dir;
    const auto r = run({"xphase", "--n", "68", "--od", "1.5", "--powers", "0", "1e-12", "1e-11", "1e-9",
                        "--mc-samples", "1000", "--seed", "3", "--out", dir.str()});
    REQUIRE(r.code == 0);
    const auto summary = json::parse(slurp(dir / "xphase_n68.json"));
    CHECK(summary["max_rel_diff_closed_quadrature"].get<double>() < 1e-6);
    CHECK(summary["mc_points"].get<int>() >= 1);
    CHECK(summary["max_abs_mc_z"].get<double>() < 3.0);

    const auto rows = csv_rows(dir / "xphase_n68.csv");
    REQUIRE(rows.size() == 4);
    CHECK(std::stod(rows[0][1]) == 0.0);
    // Calibrated slope at the calibration OD is the configured 8 mrad/nW.
    CHECK(std::stod(rows[1][10]) == doctest::Approx(-8e6).epsilon(1e-6));
}

TEST_CASE("xphase: Monte Carlo requires a seed")
{
    TempDir dir;
    CHECK(run({"xphase", "--powers", "1e-12", "--mc-samples", "1000", "--out", dir.str()}).code == 2);
    CHECK(run({"xphase", "--powers", "1e-12", "--mc-samples", "10", "--seed", "1", "--out", dir.str()}).code == 2);
    CHECK(run({"xphase", "--powers", "1e-12", "--mc-samples", "0", "--out", dir.str()}).code == 0);
}

TEST_CASE("simulate: deterministic campaign with truth sidecar")
{
    TempDir a, b;
    REQUIRE(run({"simulate", "--seed", "7", "--out", a.str()}).code == 0);
    REQUIRE(run({"simulate", "--seed", "7", "--out", b.str()}).code == 0);
    for (const char* name : {"sweep.csv", "sweep.truth.csv", "beatnote_n68.bin", "spectrum_n49.csv", "campaign.json"})
    {
        CHECK(fs::exists(a / name));
        CHECK(slurp(a / name) == slurp(b / name));
    }
    const auto rows = csv_rows(a / "sweep.csv");
    CHECK(rows.size() == 7 * 13);
    const auto truth = csv_rows(a / "sweep.truth.csv");
    CHECK(truth.size() == rows.size());

    const auto header = json::parse(slurp(a / "beatnote_n68.json"));
    CHECK(header["samples"].get<std::size_t>() * 8 == fs::file_size(a / "beatnote_n68.bin"));
    CHECK(header["markers"].size() == 375);

    TempDir c;
    REQUIRE(run({"simulate", "--seed", "8", "--no-beatnote", "--out", c.str()}).code == 0);
    CHECK_FALSE(fs::exists(c / "beatnote_n68.bin"));
    CHECK(slurp(c / "sweep.csv") != slurp(a / "sweep.csv"));
}

TEST_CASE("simulate: usage errors")
{
    TempDir dir;
    CHECK(run({"simulate", "--out", dir.str()}).code == 2);
    write(dir / "gap.yaml", "duty_cycle:\n  separation_is_gap: true\n");
    const auto r = run({"simulate", "--seed", "1", "--config", (dir / "gap.yaml").string(), "--out", dir.str()});
    CHECK(r.code == 2);
    CHECK(r.err.find("duty cycle") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "sweep.csv"));
}

TEST_CASE("analyze: campaign recovers the generating exponent")
{
    TempDir dir;
    write(dir / "cfg.yaml", "c6:\n  mode: power_law\n");
    REQUIRE(run({"simulate", "--seed", "11", "--config", (dir / "cfg.yaml").string(), "--no-beatnote", "--out",
                 dir.str()})
                .code == 0);
    const auto r = run({"analyze", (dir / "sweep.csv").string(), "--out", dir.str()});
    REQUIRE(r.code == 0);
    const auto summary = json::parse(slurp(dir / "analysis.json"));
    const double p = summary["exponent"].get<double>();
    const double e = summary["exponent_error"].get<double>();
    CHECK(std::abs(p - 5.5) <= 2.0 * e);
    for (const char* name : {"slopes.csv", "slope_fits.csv", "power_law.csv"})
        CHECK(fs::exists(dir / name));
    CHECK(csv_rows(dir / "slopes.csv").size() == 7);
}

TEST_CASE("analyze: reference dataset")
{
    TempDir dir;
    {
        std::ofstream f(dir / "ref.csv");
        data::write_measurements(f, sim::reference_dataset());
    }
    const auto r = run({"analyze", (dir / "ref.csv").string(), "--out", dir.str()});
    REQUIRE(r.code == 0);
    const auto out = json::parse(r.out);
    CHECK(out["exponent"].get<double>() == doctest::Approx(5.7).epsilon(1e-6));
    CHECK(out["exponent_error"].get<double>() == doctest::Approx(1.33).epsilon(0.01 / 1.33));
    CHECK(out["chi2_reduced"].get<double>() == doctest::Approx(11.0).epsilon(1e-6));
}

TEST_CASE("analyze: bad input leaves no outputs")
{
    TempDir dir;
    write(dir / "empty.csv", std::string(data::measurement_header) + "\n");
    const auto e = run({"analyze", (dir / "empty.csv").string(), "--out", (dir / "o1").string()});
    CHECK(e.code == 2);
    CHECK_FALSE(fs::exists(dir / "o1"));

    write(dir / "bad.csv", std::string(data::measurement_header) + "\n68,65.4,1e-9\n");
    const auto b = run({"analyze", (dir / "bad.csv").string(), "--out", (dir / "o2").string()});
    CHECK(b.code == 2);
    CHECK(b.err.find("2") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o2"));

    CHECK(run({"analyze", (dir / "missing.csv").string()}).code == 2);
}

TEST_CASE("convert")
{
    const auto r = run({"convert", "--slope", "8e6", "--group-delay", "8e-9", "--wavelength", "780e-9",
                        "--length", "0.5e-3", "--waist", "20e-6"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["per_photon_phase_rad"].get<double>() == doctest::Approx(2.54672545788324e-4).epsilon(1e-12));
    CHECK(j["chi3_m2_per_v2"].get<double>() == doctest::Approx(8.83390552676056e-9).epsilon(1e-12));
    CHECK(j["photons_in_medium"].get<double>() == doctest::Approx(31.4128873814665).epsilon(1e-12));

    const auto p = run({"convert", "--slope", "8e6", "--group-delay", "8e-9", "--power", "20e-12", "--dwell",
                        "600e-9", "--wavelength", "780e-9"});
    CHECK(json::parse(p.out)["photons_in_medium"].get<double>() == doctest::Approx(47.1193310721998).epsilon(1e-12));

    const auto z = run({"convert", "--slope", "0", "--group-delay", "8e-9"});
    CHECK(json::parse(z.out)["chi3_m2_per_v2"].get<double>() == 0.0);
    CHECK(json::parse(z.out)["per_photon_phase_rad"].get<double>() == 0.0);

    CHECK(run({"convert", "--slope", "8e6"}).code == 2);
    CHECK(run({"convert", "--group-delay", "8e-9"}).code == 2);
}

TEST_CASE("configuration errors carry line numbers")
{
    TempDir dir;
    write(dir / "unknown.yaml", "seed: 3\nmedium:\n  density_m3: 3e16\n  colour: blue\n");
    const auto u = run({"convert", "--slope", "1", "--group-delay", "1e-9", "--config", (dir / "unknown.yaml").string()});
    CHECK(u.code == 2);
    CHECK(u.err.find(":4:") != std::string::npos);
    CHECK(u.err.find("colour") != std::string::npos);

    write(dir / "type.yaml", "sweep:\n  shots_per_point: many\n");
    const auto t = run({"convert", "--slope", "1", "--group-delay", "1e-9", "--config", (dir / "type.yaml").string()});
    CHECK(t.code == 2);
    CHECK(t.err.find(":2:") != std::string::npos);

    CHECK(run({"convert", "--slope", "1", "--group-delay", "1e-9", "--config", (dir / "nope.yaml").string()}).code == 2);
}

TEST_CASE("flags override the configuration")
{
    TempDir dir;
    write(dir / "cfg.yaml", "seed: 1\noutput_dir: " + (dir / "from_config").string() + "\n");
    REQUIRE(run({"simulate", "--config", (dir / "cfg.yaml").string(), "--no-beatnote"}).code == 0);
    REQUIRE(run({"simulate", "--config", (dir / "cfg.yaml").string(), "--seed", "2", "--no-beatnote", "--out",
                 (dir / "from_flag").string()})
                .code == 0);
    CHECK(fs::exists(dir / "from_config" / "sweep.csv"));
    CHECK(slurp(dir / "from_config" / "sweep.csv") != slurp(dir / "from_flag" / "sweep.csv"));
}

TEST_CASE("provenance is recorded and stable")
{
    TempDir a, b;
    REQUIRE(run({"simulate", "--seed", "5", "--no-beatnote", "--out", a.str()}).code == 0);
    REQUIRE(run({"simulate", "--seed", "5", "--no-beatnote", "--out", b.str()}).code == 0);
    const auto ja = json::parse(slurp(a / "campaign.json"));
    const auto jb = json::parse(slurp(b / "campaign.json"));
    CHECK(ja["provenance"]["config_sha256"] == jb["provenance"]["config_sha256"]);
    CHECK(ja["provenance"]["config_sha256"].get<std::string>().size() == 64);
    CHECK(slurp(a / "sweep.csv").rfind("# rydkerr ", 0) == 0);
}

TEST_CASE("unknown subcommand and help")
{
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("the shipped default configuration matches the built-in defaults")
{
    const std::string cfg = std::string(RYDKERR_SOURCE_DIR) + "/configs/default.yaml";
    const auto a = run({"convert", "--slope", "1", "--group-delay", "1e-9", "--config", cfg, "--seed", "20240131"});
    const auto b = run({"convert", "--slope", "1", "--group-delay", "1e-9", "--seed", "20240131"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(json::parse(a.out)["provenance"]["config_sha256"] == json::parse(b.out)["provenance"]["config_sha256"]);
}
