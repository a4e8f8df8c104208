#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rydkerr::cli
{
    enum ExitCode : int
    {
        exit_ok = 0,
        exit_numerical = 1,
        exit_usage = 2
    };

    /// Entry point shared by the executable and the tests. args[0] is the
    /// program name.
    int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
}
