#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xbar {

inline constexpr std::string_view kVersion = "0.1.0";

enum class TechnologyKind { SRAM, ReRAM, FeFET, SOTMRAM };

inline constexpr std::array<TechnologyKind, 4> kAllTechnologies = {
    TechnologyKind::SRAM, TechnologyKind::ReRAM, TechnologyKind::FeFET, TechnologyKind::SOTMRAM};

enum class Fidelity { Level0Linear, Level1Physical };

enum class Topology { GateInput, DrainInput };

std::string_view to_string(TechnologyKind tech);
std::string_view to_string(Fidelity fidelity);
std::string_view to_string(Topology topology);

// Accepts the short lower-case names used on the command line ("sram",
// "reram", "fefet", "sot-mram"/"sot"), case-insensitively.
TechnologyKind parse_technology(std::string_view name);
Fidelity parse_fidelity(std::string_view name);
Topology parse_topology(std::string_view name);

// Error taxonomy shared by every module.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A model was used before it was calibrated.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// Netlist is disconnected, singular, or otherwise malformed.
struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double last_residual, int iterations)
        : std::runtime_error(what), last_residual(last_residual), iterations(iterations) {}
    double last_residual;
    int iterations;
};

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace xbar
