#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace qpump {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance sidecar written next to every output file; re-running the named
// command with the same config digest and seed reproduces the output
// byte-for-byte.
struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string version = kToolVersion;
    double duration_s = 0;
    std::vector<std::string> warnings;
    nlohmann::json extras;  // per-command metadata (flag counters, fit constants, ...)

    nlohmann::json to_json() const;
};

void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace qpump
