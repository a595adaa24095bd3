#pragma once

// Design-space sweeps over device and array knobs, and the cross-technology
// comparison report.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xbar/inference.hpp"
#include "xbar/metrics.hpp"
#include "xbar/topology.hpp"
#include "xbar/variation.hpp"

namespace xbar::dse {

// Knob values carry fixed units: R_ON in ohms, T_FE and T_MgO and gap in nm,
// V_BIAS in volts, activation as the PWA group size (0 = FWA), topology as
// 0 (gate-input) or 1 (drain-input).
enum class Knob { RON, TFE, TMgO, VBias, Gap, Activation, Topology };

std::string to_string(Knob k);
Knob parse_knob(const std::string& s);

// Base config with one knob bound; throws DomainError outside the knob's
// domain or for a technology the knob does not apply to.
topology::CrossbarConfig apply_knob(const topology::CrossbarConfig& base, Knob knob, double value);

struct SweepSpec {
    Knob knob = Knob::RON;
    std::vector<double> values;
    topology::CrossbarConfig base;
    bool want_nf = true;
    bool want_sm = true;  // O_MAX comes with the SM curve
    std::size_t samples = 500;
    std::uint64_t seed = 1;
    metrics::WorkloadSampler sampler = metrics::WorkloadSampler::bernoulli(0.5);
    metrics::SMOptions sm;
    int sm_x_max = 0;  // 0: every active row
    double threshold = 1e-6;
    int workers = 0;
    std::string label;  // series name in reports

    void validate() const;
};

struct SweepPoint {
    double value = 0.0;
    topology::CrossbarConfig cfg;
    devices::CellStateResistances corners;
    std::optional<metrics::NFDistribution> nf;
    std::optional<metrics::SMCurve> sm;
    std::optional<int> o_max;
};

struct SweepResult {
    Knob knob = Knob::RON;
    std::string label;
    std::vector<SweepPoint> points;
};

// Every point sees the same workload samples (same seed, same sampler).
SweepResult sweep(const SweepSpec& spec);

// R_ON sweep for SRAM, ReRAM or FeFET.
SweepResult sweep_ron(TechnologyKind tech, const std::vector<double>& values, SweepSpec spec = {});
// FeFET thickness sweep with R_ON pinned at 60 kOhm.
SweepResult sweep_tfe(const std::vector<double>& values, SweepSpec spec = {});
// SOT-MRAM MgO sweep, one series per activation scheme.
std::vector<SweepResult> sweep_tmgo(const std::vector<double>& values,
                                    const std::vector<topology::Activation>& schemes, SweepSpec spec = {});

// series,knob,value,stat,nf with stat in count, excluded_zero_ideal, failed,
// min, q1, median, q3, max, mean.
void write_sweep_nf_csv(std::ostream& os, const std::vector<SweepResult>& results);
// series,knob,value,x,i_x_min,i_xm1_max,sm_x
void write_sweep_sm_csv(std::ostream& os, const std::vector<SweepResult>& results);
// series,knob,value,r_on,r_hrs,r_off,r_off_h,o_max
void write_sweep_points_csv(std::ostream& os, const std::vector<SweepResult>& results);
// Gnuplot data: box-plot columns, and SM curves as one index block per point.
void write_gnuplot_box(std::ostream& os, const std::vector<SweepResult>& results);
void write_gnuplot_sm(std::ostream& os, const std::vector<SweepResult>& results);

// ---------------------------------------------------------------------------
// Technology comparison

// Settings picked from the sweeps: SRAM R_ON 60k; ReRAM gap 0.53 nm; FeFET
// 7 nm with R_ON 60k; SOT-MRAM 1.3 nm with PWA(8).
topology::CrossbarConfig optimized_config(TechnologyKind tech, topology::CrossbarConfig base = {});
std::string optimized_description(TechnologyKind tech);

struct CompareOptions {
    std::vector<TechnologyKind> techs{kAllTechnologies.begin(), kAllTechnologies.end()};
    topology::CrossbarConfig base;
    std::size_t samples = 500;
    std::uint64_t seed = 1;
    metrics::WorkloadSampler sampler = metrics::WorkloadSampler::bernoulli(0.5);
    double threshold = 1e-6;
    bool inference = true;
    std::filesystem::path model = std::filesystem::path(XBAR_DATA_DIR) / "desk" / "model.json";
    std::filesystem::path dataset = std::filesystem::path(XBAR_DATA_DIR) / "desk" / "test.json";
    std::size_t inference_samples = 100;
    double sigma_frac = 0.1;
    int variation_seeds = 10;  // seeds seed, seed+1, ...
    int workers = 0;
};

struct TechReport {
    TechnologyKind tech = TechnologyKind::FeFET;
    std::string settings;
    topology::CrossbarConfig cfg;
    devices::CellStateResistances corners;
    metrics::NFDistribution nf;
    metrics::SMCurve sm;
    int o_max = 0;
    bool has_inference = false;
    double ideal_accuracy = 0.0;
    double nominal_accuracy = 0.0;
    std::vector<double> variation_accuracy;
    double mean_variation_accuracy = 0.0;

    double nominal_drop() const { return ideal_accuracy - nominal_accuracy; }
    double variation_drop() const { return ideal_accuracy - mean_variation_accuracy; }
};

struct ComparisonReport {
    CompareOptions options;
    std::vector<TechReport> techs;  // canonical technology order

    const TechReport& at(TechnologyKind t) const;
};

ComparisonReport compare_technologies(const CompareOptions& opts);
void write_comparison_json(std::ostream& os, const ComparisonReport& r);

}  // namespace xbar::dse
