#include "qpump/manifest.hpp"

#include <fstream>
#include <stdexcept>

namespace qpump {

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j{
        {"command", command},       {"config_digest", config_digest},
        {"seed", seed},             {"version", version},
        {"duration_s", duration_s}, {"warnings", warnings},
    };
    if (!extras.is_null()) j["extras"] = extras;
    return j;
}

void write_manifest(const std::string& path, const RunManifest& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << m.to_json().dump(2) << "\n";
}

}  // namespace qpump
