#include "xbar/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_map>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "xbar/blob.hpp"
#include "xbar/parallel.hpp"

namespace xbar::inference {

using json = nlohmann::json;
using topology::BitMatrix;
using topology::BitVector;
using topology::CrossbarConfig;

// ---------------------------------------------------------------------------
// Fixed point

std::int64_t max_magnitude(int bits) {
    if (bits < 1 || bits > 32) throw DomainError("bit width must lie in [1, 32]");
    return std::max<std::int64_t>(1, (std::int64_t(1) << (bits - 1)) - 1);
}

void FixedPointTensor::validate() const {
    const std::int64_t q = max_magnitude(bits);
    if (!(scale > 0) || !std::isfinite(scale)) throw DomainError("fixed-point scale must be positive");
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != values.size()) throw DomainError("fixed-point shape does not match its values");
    for (auto v : values)
        if (v > q || v < -q) throw DomainError("fixed-point value outside the signed range");
}

FixedPointTensor quantize_tensor(std::span<const double> x, std::vector<std::size_t> shape, int bits) {
    const std::int64_t q = max_magnitude(bits);
    double amax = 0.0;
    for (double v : x) {
        if (!std::isfinite(v)) throw DomainError("cannot quantize a non-finite value");
        amax = std::max(amax, std::abs(v));
    }
    FixedPointTensor t;
    t.shape = std::move(shape);
    t.bits = bits;
    t.scale = amax > 0 ? amax / double(q) : 1.0;
    t.values.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        t.values[k] = std::clamp<std::int64_t>(std::llround(x[k] / t.scale), -q, q);
    t.validate();
    return t;
}

std::vector<double> dequantize(const FixedPointTensor& t) {
    std::vector<double> out(t.values.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = double(t.values[k]) * t.scale;
    return out;
}

// ---------------------------------------------------------------------------
// ADC and mapping

void AdcModel::validate() const {
    if (!(i_lsb > 0) || !std::isfinite(i_lsb)) throw DomainError("ADC LSB current must be positive");
    if (levels < 2) throw DomainError("ADC needs at least two levels");
}

int AdcModel::convert(double current, bool& clamped) const {
    const double code = std::floor(current / i_lsb + 0.5);
    clamped = false;
    if (code < 0) {
        clamped = true;
        return 0;
    }
    if (code > double(levels - 1)) {
        clamped = true;
        return levels - 1;
    }
    return static_cast<int>(code);
}

AdcModel AdcModel::standard(const CrossbarConfig& tile, const devices::BitCellModel& model) {
    return {tile.v_bl * devices::on_conductance(model), tile.active_rows() + 1};
}

void ArrayMapping::validate() const {
    if (in_features < 1 || out_features < 1 || tile_rows < 1 || tile_cols < 1 || slices < 1)
        throw DomainError("array mapping needs positive sizes");
}

namespace {
std::uint64_t next_layer_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}
}  // namespace

MappedLayer map_layer(const FixedPointTensor& w, int tile_rows, int tile_cols) {
    w.validate();
    if (w.shape.size() != 2) throw DomainError("layer weights must be a matrix {out, in}");
    MappedLayer L;
    L.map.out_features = static_cast<int>(w.shape[0]);
    L.map.in_features = static_cast<int>(w.shape[1]);
    L.map.tile_rows = tile_rows;
    L.map.tile_cols = tile_cols;
    L.map.slices = std::max(1, w.bits - 1);
    L.map.validate();
    L.weights = w;
    L.id = next_layer_id();
    const auto& m = L.map;
    L.tiles.assign(std::size_t(m.row_tiles()) * m.col_tiles(), BitMatrix(tile_rows, tile_cols));
    for (int o = 0; o < m.out_features; ++o)
        for (int i = 0; i < m.in_features; ++i) {
            const std::int64_t v = w.values[std::size_t(o) * m.in_features + i];
            const int sign = v < 0 ? 1 : 0;
            const std::uint64_t mag = static_cast<std::uint64_t>(v < 0 ? -v : v);
            for (int k = 0; k < m.slices; ++k) {
                if (!((mag >> k) & 1)) continue;
                const int c = m.column_of(o, sign, k);
                BitMatrix& t = L.tiles[std::size_t(i / tile_rows) * m.col_tiles() + c / tile_cols];
                t(i % tile_rows, c % tile_cols) = 1;
            }
        }
    return L;
}

void apply_layer_variations(MappedLayer& layer, const devices::BitCellModel& model, double v_bl,
                            const dse::VariationConfig& vc, std::uint64_t layer_id) {
    layer.scales.clear();
    for (std::size_t t = 0; t < layer.tiles.size(); ++t)
        layer.scales.push_back(dse::variation_scales(model, v_bl, layer.tiles[t], vc, (layer_id << 20) + t));
    layer.id = next_layer_id();
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Ideal: return "ideal";
        case Mode::Solver: return "solver";
        case Mode::Surrogate: return "surrogate";
    }
    return "?";
}

Mode parse_mode(const std::string& s) {
    if (s == "ideal") return Mode::Ideal;
    if (s == "solver") return Mode::Solver;
    if (s == "surrogate") return Mode::Surrogate;
    throw UsageError("unknown inference mode '" + s + "' (expected ideal, solver or surrogate)");
}

// ---------------------------------------------------------------------------
// Engine

struct CrossbarEngine::Impl {
    CrossbarConfig tile;
    const devices::BitCellModel& model;
    Mode mode;
    const surrogate::SurrogateNet* net;
    solver::SolverOptions opts;
    devices::CellCurve curves[2][2];
    double g_norm[2] = {0, 0};  // stored conductances / G_ON
    double unit = 0.0;          // V_BL * G_ON
    std::vector<topology::RowGroup> groups;
    std::unique_ptr<solver::LadderColumn> ladder;
    std::vector<devices::CellElement> cells;
    std::vector<double> features;
    // Currents of tiles whose active group has no driven row depend only on
    // the stored weights; they are computed once per (layer, tile, group).
    std::unordered_map<std::uint64_t, std::vector<double>> idle;
    // A column solve is a pure function of its stored bits, device scales and
    // driven rows, so ladder results are memoized on the driven-row pattern.
    // Only small row groups repeat patterns often enough to pay for the table.
    struct ColumnKey {
        std::uint64_t layer, slot, pattern;
        bool operator==(const ColumnKey&) const = default;
    };
    struct ColumnKeyHash {
        std::size_t operator()(const ColumnKey& k) const {
            std::uint64_t h = k.pattern * 0x9e3779b97f4a7c15ull;
            h ^= (k.slot + 0x632be59bd9b4e019ull + (h << 6) + (h >> 2));
            h ^= (k.layer + 0x85ebca6b2c2b2ae3ull + (h << 6) + (h >> 2));
            return std::size_t(h);
        }
    };
    static constexpr std::size_t kMemoLimit = std::size_t(1) << 22;
    std::unordered_map<ColumnKey, double, ColumnKeyHash> memo;

    Impl(const CrossbarConfig& t, const devices::BitCellModel& m, Mode md, const surrogate::SurrogateNet* n,
         const solver::SolverOptions& o)
        : tile(t), model(m), mode(md), net(n), opts(o) {
        for (int a : {0, 1})
            for (int b : {0, 1}) curves[a][b] = model.curve(a, b);
        const double g_on = devices::on_conductance(model);
        for (int b : {0, 1}) g_norm[b] = dse::stored_conductance(model, tile.v_bl, b) / g_on;
        unit = tile.v_bl * g_on;
        groups = tile.row_groups();
        if (mode != Mode::Ideal && solver::LadderColumn::supported(tile))
            ladder = std::make_unique<solver::LadderColumn>(solver::LadderColumn::for_config(tile));
    }

    // Currents of columns [0, used) for masked inputs.
    void currents(const BitMatrix& w, std::span<const double> scale, const BitVector& in, int used,
                  std::vector<double>& out, std::uint64_t layer_id, std::size_t tile_index) {
        const int n = tile.rows;
        out.assign(used, 0.0);
        if (mode == Mode::Ideal) {
            for (int c = 0; c < used; ++c) {
                int k = 0;
                for (int i = 0; i < n; ++i) k += (in[i] & w(i, c)) ? 1 : 0;
                out[c] = double(k) * unit;
            }
            return;
        }
        if (mode == Mode::Surrogate) {
            const auto ideal = solver::device_ideal_output(tile, model, w, in, scale);
            features.resize(2 * std::size_t(n));
            for (int c = 0; c < used; ++c) {
                for (int i = 0; i < n; ++i) {
                    features[i] = in[i] ? 1.0 : 0.0;
                    const double s = scale.empty() ? 1.0 : scale[std::size_t(i) * tile.cols + c];
                    features[n + i] = g_norm[w(i, c) ? 1 : 0] * s;
                }
                out[c] = surrogate::predict(*net, features, ideal[c]).i_nonideal;
            }
            return;
        }
        if (ladder) {
            cells.resize(n);
            const bool memoize = n <= 64 && tile.active_rows() <= 16;
            std::uint64_t pattern = 0;
            if (memoize)
                for (int i = 0; i < n; ++i) pattern |= std::uint64_t(in[i] ? 1 : 0) << i;
            for (int c = 0; c < used; ++c) {
                const ColumnKey key{layer_id, std::uint64_t(tile_index) * std::uint64_t(tile.cols) + c, pattern};
                if (memoize) {
                    if (auto it = memo.find(key); it != memo.end()) {
                        out[c] = it->second;
                        continue;
                    }
                }
                for (int i = 0; i < n; ++i) {
                    cells[i].curve = curves[in[i] ? 1 : 0][w(i, c) ? 1 : 0];
                    cells[i].scale = scale.empty() ? 1.0 : scale[std::size_t(i) * tile.cols + c];
                }
                out[c] = ladder->solve(cells, opts).current;
                if (memoize) {
                    if (memo.size() >= kMemoLimit) memo.clear();
                    memo.emplace(key, out[c]);
                }
            }
            return;
        }
        const auto r = solver::solve_dc(topology::build(tile, model, w, in, scale), opts);
        for (int c = 0; c < used; ++c) out[c] = r.column_currents[c];
    }
};

CrossbarEngine::CrossbarEngine(const CrossbarConfig& tile, const devices::BitCellModel& model, Mode mode,
                               const surrogate::SurrogateNet* net, std::optional<AdcModel> adc,
                               const solver::SolverOptions& opts) {
    tile.validate();
    opts.validate();
    if (!model.calibrated()) throw StateError("bit-cell model is not calibrated");
    if (mode == Mode::Surrogate) {
        if (!net) throw StateError("surrogate mode needs a trained surrogate net");
        if (tile.topology != Topology::GateInput) throw DomainError("surrogate mode needs gate-input tiles");
        if (net->inputs != 2 * tile.rows)
            throw DomainError("surrogate net expects " + std::to_string(net->inputs / 2) + " rows, tile has " +
                              std::to_string(tile.rows));
    }
    adc_ = adc ? *adc : AdcModel::standard(tile, model);
    adc_.validate();
    impl_ = std::make_unique<Impl>(tile, model, mode, net, opts);
}

CrossbarEngine::~CrossbarEngine() = default;
CrossbarEngine::CrossbarEngine(CrossbarEngine&&) noexcept = default;

std::vector<std::int64_t> CrossbarEngine::mvm(std::span<const std::int64_t> x, int x_bits, const MappedLayer& layer,
                                              MvmStats& stats) {
    Impl& e = *impl_;
    const auto& m = layer.map;
    if (m.tile_rows != e.tile.rows || m.tile_cols != e.tile.cols)
        throw DomainError("layer tiling does not match the engine tile");
    if (x.size() != std::size_t(m.in_features)) throw DomainError("input length does not match the layer");
    if (x_bits < 1 || x_bits > 32) throw DomainError("input bit width must lie in [1, 32]");
    const std::int64_t lo = -(std::int64_t(1) << (x_bits - 1)), hi = (std::int64_t(1) << (x_bits - 1)) - 1;
    for (auto v : x)
        if (v < lo || v > hi) throw DomainError("input value outside the two's-complement range");

    const std::uint64_t mask = x_bits == 64 ? ~0ull : ((std::uint64_t(1) << x_bits) - 1);
    std::vector<std::int64_t> acc(m.out_features, 0), cycle(m.out_features);
    BitVector bits(e.tile.rows), masked;
    std::vector<double> cur;
    const int per_out = 2 * m.slices;

    for (int b = 0; b < x_bits; ++b) {
        std::fill(cycle.begin(), cycle.end(), 0);
        for (int rt = 0; rt < m.row_tiles(); ++rt) {
            for (int r = 0; r < e.tile.rows; ++r) {
                const int i = rt * m.tile_rows + r;
                bits[r] = i < m.in_features ? ((static_cast<std::uint64_t>(x[i]) & mask) >> b) & 1 : 0;
            }
            for (const auto& g : e.groups) {
                masked = topology::mask_inputs(bits, g);
                const bool active = std::any_of(masked.begin(), masked.end(), [](auto v) { return v != 0; });
                // Without any driven row the ideal array reads exactly zero.
                if (!active && e.mode == Mode::Ideal) continue;
                for (int ct = 0; ct < m.col_tiles(); ++ct) {
                    const int used = std::min(m.tile_cols, m.expanded_cols() - ct * m.tile_cols);
                    const std::size_t t = std::size_t(rt) * m.col_tiles() + ct;
                    const std::span<const double> scale =
                        layer.scales.empty() ? std::span<const double>{} : std::span<const double>(layer.scales[t]);
                    if (active) {
                        e.currents(layer.tiles[t], scale, masked, used, cur, layer.id, t);
                    } else {
                        const std::uint64_t key = (layer.id << 32) ^ (std::uint64_t(t) << 12) ^ std::uint64_t(&g - &e.groups[0]);
                        auto it = e.idle.find(key);
                        if (it == e.idle.end()) {
                            e.currents(layer.tiles[t], scale, masked, used, cur, layer.id, t);
                            it = e.idle.emplace(key, cur).first;
                        }
                        cur = it->second;
                    }
                    if (stats.collect_nf && e.mode != Mode::Ideal) {
                        const auto ideal = solver::device_ideal_output(e.tile, e.model, layer.tiles[t], masked);
                        for (int c = 0; c < used; ++c)
                            if (auto nf = metrics::nonideality_factor(ideal[c], cur[c])) stats.nf.push_back(nf->nf);
                    }
                    for (int c = 0; c < used; ++c) {
                        bool clamped = false;
                        const int code = adc_.convert(cur[c], clamped);
                        ++stats.conversions;
                        stats.saturations += clamped ? 1 : 0;
                        if (code == 0) continue;
                        const int col = ct * m.tile_cols + c;
                        const int o = col / per_out, rem = col % per_out;
                        const int sign = rem / m.slices, slice = rem % m.slices;
                        const std::int64_t v = std::int64_t(code) << slice;
                        cycle[o] += sign ? -v : v;
                    }
                }
            }
        }
        const std::int64_t wb = std::int64_t(1) << b;
        for (int o = 0; o < m.out_features; ++o) acc[o] += (b == x_bits - 1 ? -wb : wb) * cycle[o];
    }
    return acc;
}

std::vector<std::int64_t> integer_mvm(std::span<const std::int64_t> x, const FixedPointTensor& w) {
    if (w.shape.size() != 2 || w.shape[1] != x.size()) throw DomainError("integer_mvm shape mismatch");
    std::vector<std::int64_t> y(w.shape[0], 0);
    for (std::size_t o = 0; o < w.shape[0]; ++o)
        for (std::size_t i = 0; i < x.size(); ++i) y[o] += w.values[o * x.size() + i] * x[i];
    return y;
}

// ---------------------------------------------------------------------------
// Files

void DeskModel::validate() const {
    if (layers.empty()) throw DomainError("model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.in < 1 || L.out < 1) throw DomainError("layer " + L.name + " has a non-positive size");
        if (L.weights.size() != std::size_t(L.in) * L.out || L.bias.size() != std::size_t(L.out))
            throw DomainError("layer " + L.name + " has mismatched parameter sizes");
        if (L.activation != "relu" && L.activation != "none")
            throw DomainError("layer " + L.name + ": unsupported activation '" + L.activation + "'");
        if (l > 0 && layers[l - 1].out != L.in) throw DomainError("layer " + L.name + " does not chain");
        for (float v : L.weights)
            if (!std::isfinite(v)) throw DomainError("layer " + L.name + " has non-finite weights");
    }
}

void DeskDataset::validate() const {
    if (features < 1 || classes < 2) throw DomainError("dataset needs features and at least two classes");
    if (x.size() != count() * std::size_t(features)) throw DomainError("dataset blob does not match its count");
    for (int y : labels)
        if (y < 0 || y >= classes) throw DomainError("dataset label out of range");
}

namespace {

json read_manifest(const std::filesystem::path& p, const char* format) {
    std::ifstream is(p);
    if (!is) throw UsageError("cannot read " + p.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw UsageError(p.string() + ": " + e.what());
    }
    if (j.value("format", "") != format || j.value("version", 0) != 1)
        throw UsageError(p.string() + ": not an " + std::string(format) + " v1 manifest");
    return j;
}

void write_manifest(const std::filesystem::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw UsageError("cannot write " + p.string());
    os << j.dump(1) << '\n';
}

}  // namespace

DeskModel load_model(const std::filesystem::path& manifest) {
    const json j = read_manifest(manifest, "xbar-model");
    try {
        const auto blob = blob::read<float>(manifest.parent_path() / j.at("blob").get<std::string>());
        DeskModel m;
        for (const auto& l : j.at("layers")) {
            DenseLayer L;
            L.name = l.value("name", "layer" + std::to_string(m.layers.size()));
            L.in = l.at("in").get<int>();
            L.out = l.at("out").get<int>();
            L.activation = l.value("activation", "none");
            const auto wo = l.at("weight_offset").get<std::size_t>();
            const auto bo = l.at("bias_offset").get<std::size_t>();
            const std::size_t nw = std::size_t(L.in) * L.out;
            if (wo + nw > blob.size() || bo + std::size_t(L.out) > blob.size())
                throw UsageError(manifest.string() + ": layer " + L.name + " runs past the blob");
            L.weights.assign(blob.begin() + wo, blob.begin() + wo + nw);
            L.bias.assign(blob.begin() + bo, blob.begin() + bo + L.out);
            m.layers.push_back(std::move(L));
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw UsageError(manifest.string() + ": " + e.what());
    } catch (const DomainError& e) {
        throw UsageError(manifest.string() + ": " + e.what());
    }
}

void save_model(const DeskModel& model, const std::filesystem::path& manifest) {
    model.validate();
    auto blob_path = manifest;
    blob_path.replace_extension(".bin");
    std::vector<float> all;
    json layers = json::array();
    for (const auto& L : model.layers) {
        const std::size_t wo = all.size();
        all.insert(all.end(), L.weights.begin(), L.weights.end());
        const std::size_t bo = all.size();
        all.insert(all.end(), L.bias.begin(), L.bias.end());
        layers.push_back({{"name", L.name}, {"in", L.in}, {"out", L.out}, {"activation", L.activation},
                          {"weight_offset", wo}, {"bias_offset", bo}});
    }
    blob::write<float>(blob_path, all);
    write_manifest(manifest, {{"format", "xbar-model"}, {"version", 1}, {"blob", blob_path.filename().string()},
                              {"blob_dtype", "float32-le"}, {"layers", layers}});
}

DeskDataset load_dataset(const std::filesystem::path& manifest) {
    const json j = read_manifest(manifest, "xbar-dataset");
    try {
        DeskDataset d;
        d.features = j.at("features").get<int>();
        d.classes = j.at("classes").get<int>();
        d.labels = j.at("labels").get<std::vector<int>>();
        if (j.at("count").get<std::size_t>() != d.labels.size())
            throw UsageError(manifest.string() + ": label count does not match 'count'");
        d.x = blob::read<float>(manifest.parent_path() / j.at("blob").get<std::string>());
        d.validate();
        return d;
    } catch (const json::exception& e) {
        throw UsageError(manifest.string() + ": " + e.what());
    } catch (const DomainError& e) {
        throw UsageError(manifest.string() + ": " + e.what());
    }
}

void save_dataset(const DeskDataset& data, const std::filesystem::path& manifest) {
    data.validate();
    auto blob_path = manifest;
    blob_path.replace_extension(".bin");
    blob::write<float>(blob_path, data.x);
    write_manifest(manifest, {{"format", "xbar-dataset"}, {"version", 1}, {"features", data.features},
                              {"classes", data.classes}, {"count", data.count()},
                              {"blob", blob_path.filename().string()}, {"blob_dtype", "float32-le"},
                              {"layout", "x[count][features]"}, {"labels", data.labels}});
}

// ---------------------------------------------------------------------------
// Inference

namespace {

std::size_t sample_count(const DeskDataset& d, std::size_t max_samples) {
    return max_samples == 0 ? d.count() : std::min(max_samples, d.count());
}

void check_pair(const DeskModel& model, const DeskDataset& data) {
    model.validate();
    data.validate();
    if (model.layers.front().in != data.features) throw DomainError("model input size does not match the dataset");
    if (model.layers.back().out != data.classes) throw DomainError("model output size does not match the classes");
}

std::vector<FixedPointTensor> quantize_weights(const DeskModel& model, int bits) {
    std::vector<FixedPointTensor> out;
    for (const auto& L : model.layers) {
        const std::vector<double> w(L.weights.begin(), L.weights.end());
        out.push_back(quantize_tensor(w, {std::size_t(L.out), std::size_t(L.in)}, bits));
    }
    return out;
}

// Shared forward pass; `mvm(layer, xq)` returns the integer products.
template <class Mvm>
int forward(const DeskModel& model, const float* features, int input_bits,
            const std::vector<FixedPointTensor>& wq, Mvm&& mvm) {
    std::vector<double> a(features, features + model.layers.front().in);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& L = model.layers[l];
        const auto xq = quantize_tensor(a, {a.size()}, input_bits);
        const auto acc = mvm(l, xq);
        std::vector<double> y(L.out);
        for (int o = 0; o < L.out; ++o) {
            y[o] = double(acc[o]) * (xq.scale * wq[l].scale) + double(L.bias[o]);
            if (L.activation == "relu" && y[o] < 0) y[o] = 0;
        }
        a = std::move(y);
    }
    return static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
}

void finish(InferenceResult& r, const DeskDataset& data) {
    r.total = r.predictions.size();
    r.correct = 0;
    for (std::size_t s = 0; s < r.total; ++s) r.correct += r.predictions[s] == data.labels[s] ? 1 : 0;
    r.accuracy = r.total ? double(r.correct) / double(r.total) : 0.0;
}

}  // namespace

InferenceResult run_inference(const DeskModel& model, const DeskDataset& data, const InferenceConfig& cfg,
                              const devices::BitCellModel& cells, const surrogate::SurrogateNet* net) {
    check_pair(model, data);
    cfg.tile.validate();
    const auto wq = quantize_weights(model, cfg.weight_bits);
    std::vector<MappedLayer> mapped;
    for (std::size_t l = 0; l < wq.size(); ++l) {
        mapped.push_back(map_layer(wq[l], cfg.tile.rows, cfg.tile.cols));
        if (cfg.variation && cfg.mode != Mode::Ideal)
            apply_layer_variations(mapped.back(), cells, cfg.tile.v_bl, *cfg.variation, l);
    }
    const std::size_t n = sample_count(data, cfg.max_samples);
    const int workers = resolve_workers(cfg.workers);
    std::vector<std::unique_ptr<CrossbarEngine>> engines(workers);
    struct Slot {
        int prediction = -1;
        std::vector<MvmStats> stats;
    };
    std::vector<Slot> slots(n);
    parallel_for(n, workers, [&](std::size_t s, int w) {
        if (!engines[w])
            engines[w] = std::make_unique<CrossbarEngine>(cfg.tile, cells, cfg.mode, net, std::nullopt, cfg.solver);
        Slot& slot = slots[s];
        slot.stats.resize(model.layers.size());
        for (auto& st : slot.stats) st.collect_nf = s < cfg.nf_probe_samples;
        slot.prediction = forward(model, &data.x[s * data.features], cfg.input_bits, wq,
                                  [&](std::size_t l, const FixedPointTensor& xq) {
                                      return engines[w]->mvm(xq.values, cfg.input_bits, mapped[l], slot.stats[l]);
                                  });
    });
    InferenceResult r;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        LayerReport rep;
        rep.name = model.layers[l].name;
        std::vector<double> nf;
        for (const auto& slot : slots) {
            rep.conversions += slot.stats[l].conversions;
            rep.saturations += slot.stats[l].saturations;
            nf.insert(nf.end(), slot.stats[l].nf.begin(), slot.stats[l].nf.end());
        }
        rep.nf = metrics::summarize(std::move(nf));
        r.layers.push_back(rep);
    }
    for (const auto& slot : slots) r.predictions.push_back(slot.prediction);
    finish(r, data);
    return r;
}

InferenceResult software_inference(const DeskModel& model, const DeskDataset& data, int input_bits, int weight_bits,
                                   std::size_t max_samples) {
    check_pair(model, data);
    const auto wq = quantize_weights(model, weight_bits);
    InferenceResult r;
    const std::size_t n = sample_count(data, max_samples);
    for (std::size_t s = 0; s < n; ++s)
        r.predictions.push_back(forward(model, &data.x[s * data.features], input_bits, wq,
                                        [&](std::size_t l, const FixedPointTensor& xq) {
                                            return integer_mvm(xq.values, wq[l]);
                                        }));
    for (const auto& L : model.layers) r.layers.push_back({L.name, {}, 0, 0});
    finish(r, data);
    return r;
}

double float_accuracy(const DeskModel& model, const DeskDataset& data, std::size_t max_samples) {
    check_pair(model, data);
    const std::size_t n = sample_count(data, max_samples);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> a(&data.x[s * data.features], &data.x[s * data.features] + data.features);
        for (const auto& L : model.layers) {
            std::vector<double> y(L.out);
            for (int o = 0; o < L.out; ++o) {
                double v = L.bias[o];
                for (int i = 0; i < L.in; ++i) v += double(L.weights[std::size_t(o) * L.in + i]) * a[i];
                y[o] = (L.activation == "relu" && v < 0) ? 0.0 : v;
            }
            a = std::move(y);
        }
        correct += (std::max_element(a.begin(), a.end()) - a.begin()) == data.labels[s] ? 1 : 0;
    }
    return n ? double(correct) / double(n) : 0.0;
}

void write_result_json(std::ostream& os, const InferenceResult& r) {
    json j;
    j["total"] = r.total;
    j["correct"] = r.correct;
    j["accuracy"] = r.accuracy;
    json layers = json::array();
    for (const auto& L : r.layers) {
        layers.push_back({{"name", L.name},
                          {"conversions", L.conversions},
                          {"saturations", L.saturations},
                          {"nf",
                           {{"count", L.nf.count},
                            {"min", L.nf.min},
                            {"q1", L.nf.q1},
                            {"median", L.nf.median},
                            {"q3", L.nf.q3},
                            {"max", L.nf.max},
                            {"mean", L.nf.mean}}}});
    }
    j["layers"] = layers;
    os << j.dump(2) << '\n';
}

}  // namespace xbar::inference
