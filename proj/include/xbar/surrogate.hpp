#pragma once

// Per-column MLP that predicts the signed relative deviation of a gate-input
// column current from its device-level ideal.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xbar/devices.hpp"
#include "xbar/metrics.hpp"
#include "xbar/topology.hpp"

namespace xbar::surrogate {

struct TrainRecord {
    std::vector<double> features;  // n input bits, then n conductances / G_ON
    double target = 0.0;           // (I_ideal - I_nonideal) / I_ideal
    double i_ideal = 0.0;
    double i_nonideal = 0.0;
    double nf() const { return target < 0 ? -target : target; }
};

struct Dataset {
    std::vector<TrainRecord> train;
    std::vector<TrainRecord> test;
    std::size_t requested = 0;
    std::size_t excluded = 0;  // zero-ideal columns
    std::size_t failed = 0;    // solver failures
    std::size_t size() const { return train.size() + test.size(); }
};

struct DatasetOptions {
    std::size_t records = 20000;
    std::uint64_t seed = 1;
    double test_fraction = 0.2;
    // Conductance spread applied per record (0 = nominal devices), so the
    // net also covers perturbed arrays.
    double sigma_frac = 0.0;
    int workers = 1;
    solver::SolverOptions solver;
};

// Feature vector for one column: inputs (already masked to the active group)
// and the per-cell scales applied to the stored-weight conductance.
std::vector<double> column_features(const devices::BitCellModel& model, double v_bl,
                                    std::span<const std::uint8_t> inputs,
                                    std::span<const std::uint8_t> weights,
                                    std::span<const double> scale = {});

// Solver ground truth for random columns. Gate-input only.
Dataset generate_dataset(const topology::CrossbarConfig& cfg, const devices::BitCellModel& model,
                         const metrics::WorkloadSampler& sampler, const DatasetOptions& opts);

enum class Activation { Tanh, Sigmoid, Relu };
std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct SurrogateNet {
    int inputs = 0;
    int hidden = 0;
    Activation activation = Activation::Tanh;
    Eigen::MatrixXd w1;  // hidden x inputs
    Eigen::VectorXd b1;
    Eigen::RowVectorXd w2;  // 1 x hidden
    double b2 = 0.0;
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_scale;  // features are (x - mean) / scale
    double target_scale = 1.0;      // net output * target_scale = signed deviation

    // Provenance fields written to the manifest.
    std::string tech;
    int rows = 0;

    std::size_t parameter_count() const;
    // Flat view: w1 (row-major), b1, w2, b2.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> p);

    double predict(std::span<const double> features) const;
    void validate() const;
};

// Randomly initialized net (Xavier-uniform).
SurrogateNet make_net(int inputs, int hidden, Activation act, std::uint64_t seed);

// Mean squared error (in target units) and its gradient w.r.t. the flat
// parameters, over the given records.
double loss_and_gradient(const SurrogateNet& net, std::span<const TrainRecord> batch,
                         std::vector<double>* grad);
double mse(const SurrogateNet& net, std::span<const TrainRecord> records);

enum class Optimizer { Momentum, Adam };
std::string to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& s);

struct Hyper {
    int hidden = 64;
    Optimizer optimizer = Optimizer::Momentum;
    Activation activation = Activation::Tanh;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 60;
    int batch_size = 64;
    std::uint64_t seed = 1;
};

struct TrainResult {
    SurrogateNet net;
    double train_mse = 0.0;
    double test_mse = 0.0;
    std::vector<double> epoch_loss;  // accepted full-train MSE per epoch
};

// Mini-batch SGD with momentum (or Adam). After every epoch the full training loss is
// checked; an epoch that raises it is rolled back and the step halves,
// otherwise the step grows by 5%. Throws ConvergenceError on NaN loss.
TrainResult train(const Dataset& data, const Hyper& hyper);

struct Prediction {
    double signed_dev = 0.0;
    double nf = 0.0;
    double i_nonideal = 0.0;
};

// Reconstructs I_nonideal = I_ideal * (1 - signed_dev); a zero ideal current
// bypasses the net and yields 0.
Prediction predict(const SurrogateNet& net, std::span<const double> features, double i_ideal);

// manifest.json + little-endian float64 blob next to it.
void save(const SurrogateNet& net, const std::filesystem::path& manifest);
SurrogateNet load(const std::filesystem::path& manifest);

}  // namespace xbar::surrogate
