#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "freebound/config.hpp"
#include "freebound/control.hpp"
#include "freebound/errors.hpp"
#include "freebound/grid.hpp"

#ifndef FREEBOUND_VERSION
#define FREEBOUND_VERSION "unknown"
#endif

namespace freebound {

inline constexpr const char* version() { return FREEBOUND_VERSION; }

/// CSV `x1,x2,value`, rows of constant x2 in order, x1 fastest.
inline void write_field_csv(std::ostream& os, const ScalarField& f) {
    os.precision(17);
    os << "x1,x2,value\n";
    const auto& g = f.grid;
    for (std::size_t j = 0; j <= g.n2; ++j)
        for (std::size_t i = 0; i <= g.n1; ++i)
            os << g.x1(i) << ',' << g.x2(j) << ',' << f.at(i, j) << '\n';
}

/// CSV `x1,x2,value,excluded`; excluded nodes carry value 0 and flag 1.
inline void write_residual_csv(std::ostream& os, const ScalarField& r) {
    os.precision(17);
    os << "x1,x2,value,excluded\n";
    const auto& g = r.grid;
    for (std::size_t j = 0; j <= g.n2; ++j)
        for (std::size_t i = 0; i <= g.n1; ++i) {
            const double v = r.at(i, j);
            const bool out = std::isnan(v);
            os << g.x1(i) << ',' << g.x2(j) << ',' << (out ? 0.0 : v) << ',' << (out ? 1 : 0)
               << '\n';
        }
}

inline nlohmann::json to_json(const GridSpec& g) {
    return {{"L1", g.L1}, {"L2", g.L2}, {"n1", g.n1}, {"n2", g.n2}, {"h1", g.h1()}, {"h2", g.h2()}};
}

inline nlohmann::json to_json(const SolveStats& s) {
    return {{"method", to_string(s.method)},
            {"iterations", s.iterations},
            {"last_change", s.last_change},
            {"residual", s.residual},
            {"seconds", s.seconds}};
}

/// Sidecar skeleton: tool version, command and the effective
/// configuration, enough to rerun the command exactly.
inline nlohmann::json metadata(const RunConfig& config, const std::string& command) {
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : effective_entries(config)) {
        const auto dot = key.find('.');
        cfg[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
    return {{"tool", "freebound"}, {"version", version()}, {"command", command}, {"config", cfg}};
}

/// Opens `dir/name` for writing, creating `dir` as needed.
inline std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
}

inline void write_json(const std::filesystem::path& dir, const std::string& name,
                       const nlohmann::json& j) {
    auto out = open_output(dir, name);
    out << j.dump(2) << '\n';
}

}  // namespace freebound
