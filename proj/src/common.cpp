#include "xbar/common.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace xbar {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string_view to_string(TechnologyKind tech) {
    switch (tech) {
        case TechnologyKind::SRAM: return "sram";
        case TechnologyKind::ReRAM: return "reram";
        case TechnologyKind::FeFET: return "fefet";
        case TechnologyKind::SOTMRAM: return "sot-mram";
    }
    return "?";
}

std::string_view to_string(Fidelity fidelity) {
    return fidelity == Fidelity::Level0Linear ? "level0" : "level1";
}

std::string_view to_string(Topology topology) {
    return topology == Topology::GateInput ? "gate" : "drain";
}

TechnologyKind parse_technology(std::string_view name) {
    const std::string s = lower(name);
    if (s == "sram") return TechnologyKind::SRAM;
    if (s == "reram" || s == "rram") return TechnologyKind::ReRAM;
    if (s == "fefet") return TechnologyKind::FeFET;
    if (s == "sot-mram" || s == "sot" || s == "sotmram" || s == "sot_mram")
        return TechnologyKind::SOTMRAM;
    throw UsageError("unknown technology '" + std::string(name) +
                     "' (expected sram, reram, fefet or sot-mram)");
}

Fidelity parse_fidelity(std::string_view name) {
    const std::string s = lower(name);
    if (s == "level0" || s == "0" || s == "linear") return Fidelity::Level0Linear;
    if (s == "level1" || s == "1" || s == "physical") return Fidelity::Level1Physical;
    throw UsageError("unknown fidelity '" + std::string(name) + "' (expected level0 or level1)");
}

Topology parse_topology(std::string_view name) {
    const std::string s = lower(name);
    if (s == "gate" || s == "gate-input") return Topology::GateInput;
    if (s == "drain" || s == "drain-input") return Topology::DrainInput;
    throw UsageError("unknown topology '" + std::string(name) + "' (expected gate or drain)");
}

}  // namespace xbar
