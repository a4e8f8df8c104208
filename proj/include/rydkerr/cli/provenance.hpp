#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace rydkerr::cli
{
    std::string toolkit_version();

    /// Lower-case hex SHA-256 of `text`.
    std::string sha256_hex(const std::string& text);

    struct Provenance
    {
        std::string tool = "rydkerr";
        std::string version;
        std::string command;
        std::string config_hash;

        static Provenance make(const std::string& command, const nlohmann::json& resolved_config);

        nlohmann::json to_json() const;
        /// Single line for CSV headers (without the leading '#').
        std::string csv_comment() const;
    };
}
