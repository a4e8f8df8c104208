#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace rydkerr::data
{
    /// One point of a cross-phase power sweep.
    struct XPhaseMeasurement
    {
        int level = 0;
        double n_star = 0.0;
        double signal_power = 0.0;   // W
        double probe_power = 0.0;    // W
        double phase = 0.0;          // rad
        double sem = 0.0;            // rad
        double od = 0.0;
        double phi_pkpk = 0.0;       // rad
        double validity_ratio = 0.0;

        void validate() const;
    };

    inline constexpr const char* measurement_header =
        "level,n_star,signal_power_w,probe_power_w,phase_rad,sem_rad,od,phi_pkpk_rad,validity_ratio";

    /// Raised for malformed dataset files; `row` is the 1-based line number.
    class SchemaError : public std::runtime_error
    {
    public:
        SchemaError(std::size_t row, const std::string& what);
        std::size_t row() const { return row_; }

    private:
        std::size_t row_;
    };

    /// Lines starting with '#' are written first, each prefixed with "# ".
    void write_measurements(std::ostream& out, const std::vector<XPhaseMeasurement>& rows,
                            const std::vector<std::string>& comments = {});

    /// Skips '#' comment lines; requires the exact header.
    std::vector<XPhaseMeasurement> read_measurements(std::istream& in);

    /// Splits a CSV line on commas (no quoting in our formats).
    std::vector<std::string> split_csv(const std::string& line);

    /// Shortest text that reads back to the same double.
    std::string format_double(double v);
}
