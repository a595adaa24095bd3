#pragma once

// Quantized inference with matrix-vector products offloaded to crossbar
// tiles: bit-serial inputs, bit-sliced differential weights, ADC, shift-add.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xbar/devices.hpp"
#include "xbar/metrics.hpp"
#include "xbar/solver.hpp"
#include "xbar/surrogate.hpp"
#include "xbar/topology.hpp"
#include "xbar/variation.hpp"

namespace xbar::inference {

// ---------------------------------------------------------------------------
// Fixed point

struct FixedPointTensor {
    std::vector<std::size_t> shape;
    std::vector<std::int64_t> values;
    int bits = 16;
    double scale = 1.0;  // real value = integer * scale

    void validate() const;
};

// Largest representable magnitude: 2^(bits-1) - 1, and 1 for bits = 1.
std::int64_t max_magnitude(int bits);

// Symmetric uniform quantization, scale = max|x| / max_magnitude(bits); an
// all-zero tensor uses scale 1.
FixedPointTensor quantize_tensor(std::span<const double> x, std::vector<std::size_t> shape, int bits = 16);
std::vector<double> dequantize(const FixedPointTensor& t);

// ---------------------------------------------------------------------------
// ADC and mapping

struct AdcModel {
    double i_lsb = 0.0;
    int levels = 2;  // codes 0 .. levels-1

    void validate() const;
    // Round-half-up to the nearest code; out-of-range currents clamp.
    int convert(double current, bool& clamped) const;
    // I_LSB = V_BL * G_ON, levels = active rows + 1.
    static AdcModel standard(const topology::CrossbarConfig& tile, const devices::BitCellModel& model);
};

// Expanded columns: output o, sign s (0: W+, 1: W-), magnitude slice k
// (weight 2^k) sits at column (o * 2 + s) * slices + k.
struct ArrayMapping {
    int in_features = 0;
    int out_features = 0;
    int tile_rows = 64;
    int tile_cols = 64;
    int slices = 15;

    int expanded_cols() const { return out_features * 2 * slices; }
    int row_tiles() const { return (in_features + tile_rows - 1) / tile_rows; }
    int col_tiles() const { return (expanded_cols() + tile_cols - 1) / tile_cols; }
    int column_of(int out, int sign, int slice) const { return (out * 2 + sign) * slices + slice; }
    void validate() const;
};

struct MappedLayer {
    ArrayMapping map;
    FixedPointTensor weights;                 // shape {out, in}
    std::vector<topology::BitMatrix> tiles;   // index rt * col_tiles + ct
    std::vector<std::vector<double>> scales;  // per tile; empty = nominal devices
    std::uint64_t id = 0;                     // unique per mapping; keys engine caches

    const topology::BitMatrix& tile(int rt, int ct) const { return tiles[std::size_t(rt) * map.col_tiles() + ct]; }
};

// One bit per device; tiles are padded with zero weights.
MappedLayer map_layer(const FixedPointTensor& weights, int tile_rows, int tile_cols);

// Fixed device spread for every tile of the layer.
void apply_layer_variations(MappedLayer& layer, const devices::BitCellModel& model, double v_bl,
                            const dse::VariationConfig& vc, std::uint64_t layer_id);

// ---------------------------------------------------------------------------
// Engine

enum class Mode { Ideal, Solver, Surrogate };
std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct MvmStats {
    std::size_t conversions = 0;
    std::size_t saturations = 0;
    bool collect_nf = false;
    std::vector<double> nf;
};

// Not thread-safe (owns solver buffers); use one per worker.
class CrossbarEngine {
  public:
    CrossbarEngine(const topology::CrossbarConfig& tile, const devices::BitCellModel& model, Mode mode,
                   const surrogate::SurrogateNet* net = nullptr, std::optional<AdcModel> adc = std::nullopt,
                   const solver::SolverOptions& opts = {});
    ~CrossbarEngine();
    CrossbarEngine(CrossbarEngine&&) noexcept;

    // x: signed integers representable in x_bits two's complement, streamed
    // LSB first (the sign cycle carries weight -2^(x_bits-1)).
    std::vector<std::int64_t> mvm(std::span<const std::int64_t> x, int x_bits, const MappedLayer& layer,
                                  MvmStats& stats);

    const AdcModel& adc() const { return adc_; }

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    AdcModel adc_;
};

// Direct integer product y[o] = sum_i W[o][i] * x[i].
std::vector<std::int64_t> integer_mvm(std::span<const std::int64_t> x, const FixedPointTensor& w);

// ---------------------------------------------------------------------------
// Model and dataset files

struct DenseLayer {
    std::string name;
    int in = 0;
    int out = 0;
    std::string activation = "none";  // relu | none
    std::vector<float> weights;       // [out][in]
    std::vector<float> bias;
};

struct DeskModel {
    std::vector<DenseLayer> layers;
    void validate() const;
};

struct DeskDataset {
    int features = 0;
    int classes = 0;
    std::vector<float> x;  // [count][features]
    std::vector<int> labels;
    std::size_t count() const { return labels.size(); }
    void validate() const;
};

DeskModel load_model(const std::filesystem::path& manifest);
void save_model(const DeskModel& model, const std::filesystem::path& manifest);
DeskDataset load_dataset(const std::filesystem::path& manifest);
void save_dataset(const DeskDataset& data, const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------
// Inference

struct InferenceConfig {
    topology::CrossbarConfig tile;  // rows x cols is the tile size
    Mode mode = Mode::Ideal;
    int input_bits = 16;
    int weight_bits = 16;
    std::optional<dse::VariationConfig> variation;
    std::size_t max_samples = 0;       // 0 = whole dataset
    std::size_t nf_probe_samples = 4;  // samples whose column NFs are recorded
    int workers = 1;
    solver::SolverOptions solver;
};

struct LayerReport {
    std::string name;
    metrics::NFDistribution nf;
    std::size_t conversions = 0;
    std::size_t saturations = 0;
};

struct InferenceResult {
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::vector<int> predictions;
    std::vector<LayerReport> layers;
};

InferenceResult run_inference(const DeskModel& model, const DeskDataset& data, const InferenceConfig& cfg,
                              const devices::BitCellModel& cells, const surrogate::SurrogateNet* net = nullptr);

// Same quantized arithmetic with exact integer products.
InferenceResult software_inference(const DeskModel& model, const DeskDataset& data, int input_bits,
                                   int weight_bits, std::size_t max_samples = 0);

// Unquantized float reference.
double float_accuracy(const DeskModel& model, const DeskDataset& data, std::size_t max_samples = 0);

void write_result_json(std::ostream& os, const InferenceResult& r);

}  // namespace xbar::inference
