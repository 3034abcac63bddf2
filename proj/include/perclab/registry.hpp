#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "perclab/error.hpp"
#include "perclab/lattice.hpp"

#ifndef PERCLAB_DATA_DIR
#define PERCLAB_DATA_DIR "data"
#endif

namespace perclab {

struct RegistryEntry {
    std::size_t d = 0;
    std::string adjacency;
    double p_c = 0;
    std::string source;
};

inline std::string default_registry_path() { return std::string(PERCLAB_DATA_DIR) + "/pc_registry.json"; }

inline std::vector<RegistryEntry> load_registry(const std::string& path = default_registry_path()) {
    std::ifstream in(path);
    if (!in) throw ResourceError("cannot open p_c registry " + path);
    try {
        const auto j = nlohmann::json::parse(in);
        std::vector<RegistryEntry> out;
        for (const auto& e : j.at("entries"))
            out.push_back({e.at("d").get<std::size_t>(), e.at("adjacency").get<std::string>(), e.at("p_c").get<double>(),
                           e.at("source").get<std::string>()});
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("malformed p_c registry " + path + ": " + e.what());
    }
}

inline RegistryEntry registry_lookup(std::size_t d, const Adjacency& adj, const std::string& path = default_registry_path()) {
    const auto key = adj.to_string();
    for (const auto& e : load_registry(path))
        if (e.d == d && e.adjacency == key) return e;
    throw SpecError("no registry p_c for d=" + std::to_string(d) + ", adjacency " + key);
}

} // namespace perclab
