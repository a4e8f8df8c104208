#include "rydkerr/cli/provenance.hpp"

#include <openssl/evp.h>

#include <fmt/format.h>

#include <memory>
#include <stdexcept>

#ifndef RYDKERR_VERSION
#define RYDKERR_VERSION "0.0.0"
#endif

namespace rydkerr::cli
{
    std::string toolkit_version()
    {
        return RYDKERR_VERSION;
    }

    std::string sha256_hex(const std::string& text)
    {
        std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
            EVP_DigestUpdate(ctx.get(), text.data(), text.size()) != 1 ||
            EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
            throw std::runtime_error("SHA-256 computation failed");
        std::string hex;
        for (unsigned int i = 0; i < len; ++i)
            hex += fmt::format("{:02x}", digest[i]);
        return hex;
    }

    Provenance Provenance::make(const std::string& command, const nlohmann::json& resolved_config)
    {
        Provenance p;
        p.version = toolkit_version();
        p.command = command;
        // Where results are written and how many threads compute them do not
        // change the results, so they stay out of the hash.
        nlohmann::json identity = resolved_config;
        identity.erase("output_dir");
        if (identity.contains("montecarlo"))
            identity["montecarlo"].erase("threads");
        p.config_hash = sha256_hex(identity.dump());
        return p;
    }

    nlohmann::json Provenance::to_json() const
    {
        return {{"tool", tool}, {"version", version}, {"command", command}, {"config_sha256", config_hash}};
    }

    std::string Provenance::csv_comment() const
    {
        return fmt::format("{} {} {} config_sha256={}", tool, version, command, config_hash);
    }
}
