#pragma once

// Device-to-device conductance spread: G <- G + N(0, (s * G_ON)^2), floored.

#include <cstdint>
#include <span>
#include <vector>

#include "xbar/devices.hpp"
#include "xbar/topology.hpp"

namespace xbar::dse {

inline constexpr double kMinConductance = 1e-12;  // siemens

struct VariationConfig {
    double sigma_frac = 0.1;
    std::uint64_t seed = 1;

    void validate() const;  // 0 <= s < 1
};

// Standard normal draw per device of one array, in row-major order.
std::vector<double> variation_noise(const VariationConfig& vc, std::uint64_t array_id, std::size_t count);

// Perturbed conductances; s = 0 returns the input unchanged.
std::vector<double> apply_variations(std::span<const double> conductances, double g_on,
                                     const VariationConfig& vc, std::uint64_t array_id);

// The same perturbation expressed as per-cell current scales G'/G of the
// stored-weight (input = 1) conductance, ready for the netlist builders.
std::vector<double> variation_scales(const devices::BitCellModel& model, double v_bl,
                                     const topology::BitMatrix& weights, const VariationConfig& vc,
                                     std::uint64_t array_id);

// Conductance of the (1, w) state at the read bias.
double stored_conductance(const devices::BitCellModel& model, double v_bl, int weight);

}  // namespace xbar::dse
