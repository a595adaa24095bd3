#pragma once

// Robustness metrics: non-ideality factor, sense margin, O_MAX.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xbar/devices.hpp"
#include "xbar/solver.hpp"
#include "xbar/topology.hpp"
#include "xbar/variation.hpp"

namespace xbar::metrics {

struct NFSample {
    double i_ideal = 0.0;
    double i_nonideal = 0.0;
    double nf = 0.0;
    double signed_dev = 0.0;  // (I_ideal - I_nonideal) / I_ideal
    std::size_t sample = 0;
    int group = 0;
    int column = 0;
    std::uint64_t digest = 0;  // FNV-1a over the column's inputs and weights
};

// nullopt when i_ideal == 0 (the sample is excluded, not an error).
std::optional<NFSample> nonideality_factor(double i_ideal, double i_nonideal);

struct NFDistribution {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
    std::size_t excluded_zero_ideal = 0;
    std::size_t failed = 0;
};

// Linear-interpolation quantile (type 7) of sorted data, p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);
NFDistribution summarize(std::vector<double> values, std::size_t excluded = 0, std::size_t failed = 0);

struct WorkloadSampler {
    enum class Kind { Bernoulli, MixedDensity };
    Kind kind = Kind::Bernoulli;
    double p_input = 0.5;
    double p_weight = 0.5;

    static WorkloadSampler bernoulli(double p) { return {Kind::Bernoulli, p, p}; }
    // Sparse activations with dense weights, as in ReLU networks.
    static WorkloadSampler sparse(double p_input) { return {Kind::Bernoulli, p_input, 0.5}; }
    // Each sample draws its own densities uniformly from [0.05, 0.95].
    static WorkloadSampler mixed() { return {Kind::MixedDensity, 0.5, 0.5}; }

    void validate() const;
    void draw(std::mt19937_64& rng, topology::BitMatrix& weights, topology::BitVector& inputs) const;
};

std::string to_string(WorkloadSampler::Kind kind);
WorkloadSampler::Kind parse_sampler_kind(const std::string& s);

std::uint64_t column_digest(const topology::BitVector& inputs, const topology::BitMatrix& weights,
                            int column);

// What I_ideal means: the binary product count times V * G_ON, or the same
// sum with every cell's own (input, weight) state current, leakage included.
enum class NFReference { Binary, Device };
std::string to_string(NFReference r);
NFReference parse_nf_reference(const std::string& s);

struct NFOptions {
    std::size_t samples = 500;
    NFReference reference = NFReference::Device;
    std::uint64_t seed = 1;
    int workers = 1;
    bool keep_samples = false;
    solver::SolverOptions solver;
    // Optional row-major rows*cols current scales (fixed device variations).
    std::vector<double> cell_scale;
    // Device spread of one physical array (array id 0); the scales follow
    // each sample's programmed weights. Excludes cell_scale.
    std::optional<dse::VariationConfig> variation;
};

struct NFRun {
    NFDistribution pooled;
    std::vector<NFDistribution> per_column;
    std::vector<NFSample> samples;  // filled when keep_samples
};

// Monte Carlo NF over random workloads. Each (inputs, weights) draw comes
// from its own stream, so results do not depend on the worker count. Every
// activation group and column contributes one NF sample.
NFRun nf_distribution(const topology::CrossbarConfig& cfg, const devices::BitCellModel& model,
                      const WorkloadSampler& sampler, const NFOptions& opts);

// Column currents for one workload (summed over activation groups is NOT
// done here: one entry per group, each of length cols).
std::vector<std::vector<double>> solve_groups(const topology::CrossbarConfig& cfg,
                                              const devices::BitCellModel& model,
                                              const topology::BitMatrix& weights,
                                              const topology::BitVector& inputs,
                                              std::span<const double> cell_scale = {},
                                              const solver::SolverOptions& opts = {});

// Half the gap between the lowest x-output and the highest (x-1)-output current.
inline double sense_margin(double i_x_min, double i_xm1_max) { return 0.5 * (i_x_min - i_xm1_max); }

enum class SMMode { Exhaustive, Structured, Random };
std::string to_string(SMMode mode);
SMMode parse_sm_mode(const std::string& s);

struct SMOptions {
    SMMode mode = SMMode::Structured;
    std::size_t random_samples = 64;            // per x, random mode
    std::uint64_t seed = 1;
    std::size_t exhaustive_budget = 1u << 20;  // max patterns in exhaustive mode
    std::size_t placement_budget = 128;         // enumerate all placements up to this many
    int column = -1;                            // -1: last column
    int workers = 1;
    solver::SolverOptions solver;
};

struct SMPoint {
    int x = 0;
    double i_x_min = 0.0;
    double i_xm1_max = 0.0;
    double sm = 0.0;
};

struct SMCurve {
    std::vector<SMPoint> points;  // x = 1..x_max
    SMMode mode = SMMode::Structured;
    std::size_t examined = 0;
};

// Extremal currents of one column per output value x (the count of
// input=1, weight=1 cells among the active rows). x_max <= 0 or larger than
// the active-row count is clamped to it. Throws DomainError when an
// exhaustive search exceeds the budget.
SMCurve sense_margin_curve(const topology::CrossbarConfig& cfg, const devices::BitCellModel& model,
                           int x_max, const SMOptions& opts = {});

// Largest x with SM_y > threshold for all y <= x.
int o_max(const SMCurve& curve, double threshold = 1e-6);

struct AnalyticSM {
    double i0_max = 0.0;
    double i1_min = 0.0;
};

// I_0,max ~ n V / R_HRS (all active rows at input 1, weight 0), I_1,min ~ V / R_ON.
AnalyticSM analytic_sm_estimate(int n_active, double v, double r_on, double r_hrs);

// CSV emitters (headers documented in FORMATS.md).
void write_nf_samples_csv(std::ostream& os, std::span<const NFSample> samples);
void write_nf_summary_csv(std::ostream& os, const NFRun& run);
void write_sm_curve_csv(std::ostream& os, const SMCurve& curve);
SMCurve read_sm_curve_csv(std::istream& is);

}  // namespace xbar::metrics
