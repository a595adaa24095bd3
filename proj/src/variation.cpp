#include "xbar/variation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xbar/parallel.hpp"

namespace xbar::dse {

void VariationConfig::validate() const {
    if (!(sigma_frac >= 0.0 && sigma_frac < 1.0))
        throw DomainError("variation sigma must lie in [0, 1)");
}

std::vector<double> variation_noise(const VariationConfig& vc, std::uint64_t array_id, std::size_t count) {
    auto rng = stream_rng(vc.seed, 0x56415249ull, array_id);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(count);
    for (auto& v : z) v = normal(rng);
    return z;
}

std::vector<double> apply_variations(std::span<const double> conductances, double g_on,
                                     const VariationConfig& vc, std::uint64_t array_id) {
    vc.validate();
    std::vector<double> out(conductances.begin(), conductances.end());
    if (vc.sigma_frac == 0.0) return out;
    const auto z = variation_noise(vc, array_id, out.size());
    const double sigma = vc.sigma_frac * g_on;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::max(kMinConductance, out[k] + sigma * z[k]);
    return out;
}

double stored_conductance(const devices::BitCellModel& model, double v_bl, int weight) {
    return devices::evaluate(model.curve(1, weight), v_bl).current / v_bl;
}

std::vector<double> variation_scales(const devices::BitCellModel& model, double v_bl,
                                     const topology::BitMatrix& weights, const VariationConfig& vc,
                                     std::uint64_t array_id) {
    vc.validate();
    std::vector<double> scale(weights.bits.size(), 1.0);
    if (vc.sigma_frac == 0.0) return scale;
    const double g[2] = {stored_conductance(model, v_bl, 0), stored_conductance(model, v_bl, 1)};
    std::vector<double> base(weights.bits.size());
    for (std::size_t k = 0; k < base.size(); ++k) base[k] = g[weights.bits[k] ? 1 : 0];
    const auto perturbed = apply_variations(base, devices::on_conductance(model), vc, array_id);
    for (std::size_t k = 0; k < base.size(); ++k) scale[k] = perturbed[k] / base[k];
    return scale;
}

}  // namespace xbar::dse
