#include "rydkerr/dataset.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

namespace rydkerr::data
{
    void XPhaseMeasurement::validate() const
    {
        if (!(signal_power > 0.0))
            throw std::invalid_argument("signal power must be positive");
        if (!(sem > 0.0))
            throw std::invalid_argument("SEM must be positive");
        if (!(probe_power >= 0.0) || !(od > 0.0) || !(phi_pkpk >= 0.0) || !(n_star > 0.0))
            throw std::invalid_argument("probe power, OD, phi_pk-pk and n* out of range");
        if (!std::isfinite(phase) || !std::isfinite(validity_ratio))
            throw std::invalid_argument("phase and validity ratio must be finite");
    }

    SchemaError::SchemaError(std::size_t row, const std::string& what)
        : std::runtime_error(fmt::format("row {}: {}", row, what)), row_(row)
    {
    }

    std::string format_double(double v)
    {
        return fmt::format("{}", v);
    }

    std::vector<std::string> split_csv(const std::string& line)
    {
        std::vector<std::string> out;
        std::string cur;
        for (char c : line)
        {
            if (c == ',')
            {
                out.push_back(cur);
                cur.clear();
            }
            else if (c != '\r')
                cur.push_back(c);
        }
        out.push_back(cur);
        return out;
    }

    void write_measurements(std::ostream& out, const std::vector<XPhaseMeasurement>& rows,
                            const std::vector<std::string>& comments)
    {
        for (const auto& c : comments)
            out << "# " << c << '\n';
        out << measurement_header << '\n';
        for (const auto& r : rows)
        {
            out << r.level << ',' << format_double(r.n_star) << ',' << format_double(r.signal_power)
                << ',' << format_double(r.probe_power) << ',' << format_double(r.phase) << ','
                << format_double(r.sem) << ',' << format_double(r.od) << ','
                << format_double(r.phi_pkpk) << ',' << format_double(r.validity_ratio) << '\n';
        }
    }

    namespace
    {
        double parse_number(const std::string& s, std::size_t row, const char* column)
        {
            double v = 0.0;
            const auto* end = s.data() + s.size();
            const auto [ptr, ec] = std::from_chars(s.data(), end, v);
            if (ec != std::errc() || ptr != end || s.empty())
                throw SchemaError(row, fmt::format("column {}: '{}' is not a number", column, s));
            return v;
        }
    }

    std::vector<XPhaseMeasurement> read_measurements(std::istream& in)
    {
        std::vector<XPhaseMeasurement> rows;
        std::string line;
        std::size_t lineno = 0;
        bool header = false;
        while (std::getline(in, line))
        {
            ++lineno;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty() || line.front() == '#')
                continue;
            if (!header)
            {
                if (line != measurement_header)
                    throw SchemaError(lineno, "expected header '" + std::string(measurement_header) + "'");
                header = true;
                continue;
            }
            const auto f = split_csv(line);
            if (f.size() != 9)
                throw SchemaError(lineno, fmt::format("expected 9 columns, found {}", f.size()));
            XPhaseMeasurement m;
            const double level = parse_number(f[0], lineno, "level");
            if (level != std::floor(level))
                throw SchemaError(lineno, "level must be an integer");
            m.level = static_cast<int>(level);
            m.n_star = parse_number(f[1], lineno, "n_star");
            m.signal_power = parse_number(f[2], lineno, "signal_power_w");
            m.probe_power = parse_number(f[3], lineno, "probe_power_w");
            m.phase = parse_number(f[4], lineno, "phase_rad");
            m.sem = parse_number(f[5], lineno, "sem_rad");
            m.od = parse_number(f[6], lineno, "od");
            m.phi_pkpk = parse_number(f[7], lineno, "phi_pkpk_rad");
            m.validity_ratio = parse_number(f[8], lineno, "validity_ratio");
            try
            {
                m.validate();
            }
            catch (const std::invalid_argument& e)
            {
                throw SchemaError(lineno, e.what());
            }
            rows.push_back(m);
        }
        if (!header)
            throw SchemaError(lineno, "missing header");
        return rows;
    }
}
