#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "xbar/inference.hpp"

using namespace xbar;
using namespace xbar::inference;

namespace {

const std::filesystem::path kDesk = std::filesystem::path(XBAR_DATA_DIR) / "desk";

FixedPointTensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, int bits) {
    const std::int64_t q = max_magnitude(bits);
    std::uniform_int_distribution<std::int64_t> u(-q, q);
    FixedPointTensor t;
    t.shape = std::move(shape);
    t.bits = bits;
    std::size_t n = 1;
    for (auto d : t.shape) n *= d;
    for (std::size_t k = 0; k < n; ++k) t.values.push_back(u(rng));
    return t;
}

std::vector<std::int64_t> random_input(std::mt19937_64& rng, std::size_t n, int bits) {
    std::uniform_int_distribution<std::int64_t> u(-(std::int64_t(1) << (bits - 1)), (std::int64_t(1) << (bits - 1)) - 1);
    std::vector<std::int64_t> x(n);
    for (auto& v : x) v = u(rng);
    return x;
}

topology::CrossbarConfig tile_of(int rows, int cols, TechnologyKind tech = TechnologyKind::FeFET) {
    topology::CrossbarConfig c;
    c.rows = rows;
    c.cols = cols;
    c.tech = tech;
    return c;
}

// Bit-serial reference; by default every tile and group is a full netlist solve.
std::vector<std::int64_t> reference_mvm(const std::vector<std::int64_t>& x, int x_bits, const MappedLayer& L,
                                        const topology::CrossbarConfig& tile, const devices::BitCellModel& model,
                                        bool device_ideal = false) {
    const auto& m = L.map;
    const auto adc = AdcModel::standard(tile, model);
    std::vector<std::int64_t> y(m.out_features, 0);
    for (int b = 0; b < x_bits; ++b) {
        const std::int64_t weight = b == x_bits - 1 ? -(std::int64_t(1) << b) : (std::int64_t(1) << b);
        for (int rt = 0; rt < m.row_tiles(); ++rt) {
            topology::BitVector bits(tile.rows, 0);
            for (int r = 0; r < tile.rows; ++r) {
                const int i = rt * tile.rows + r;
                if (i < m.in_features) bits[r] = (static_cast<std::uint64_t>(x[i]) >> b) & 1;
            }
            for (const auto& g : tile.row_groups()) {
                const auto masked = topology::mask_inputs(bits, g);
                for (int ct = 0; ct < m.col_tiles(); ++ct) {
                    const auto& w = L.tile(rt, ct);
                    const auto cur = device_ideal ? solver::device_ideal_output(tile, model, w, masked)
                                                  : solver::solve_dc(topology::build(tile, model, w, masked)).column_currents;
                    for (int c = 0; c < tile.cols; ++c) {
                        const int col = ct * tile.cols + c;
                        if (col >= m.expanded_cols()) break;
                        bool clamped = false;
                        const int code = adc.convert(cur[c], clamped);
                        const int o = col / (2 * m.slices), s = (col / m.slices) % 2, k = col % m.slices;
                        y[o] += (s ? -1 : 1) * weight * (std::int64_t(code) << k);
                    }
                }
            }
        }
    }
    return y;
}

}  // namespace

TEST_CASE("symmetric quantization") {
    CHECK(max_magnitude(1) == 1);
    CHECK(max_magnitude(2) == 1);
    CHECK(max_magnitude(4) == 7);
    CHECK(max_magnitude(16) == 32767);
    CHECK_THROWS_AS(max_magnitude(0), DomainError);

    const std::vector<double> x{0.5, -1.0, 0.25, 0.0};
    const auto t = quantize_tensor(x, {4}, 4);
    CHECK(t.scale == doctest::Approx(1.0 / 7.0));
    CHECK(t.values == std::vector<std::int64_t>{4, -7, 2, 0});
    const auto back = dequantize(t);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(back[k] - x[k]) <= t.scale / 2 + 1e-15);

    const auto z = quantize_tensor(std::vector<double>{0.0, 0.0}, {2}, 8);
    CHECK(z.scale == 1.0);
    CHECK(z.values == std::vector<std::int64_t>{0, 0});
    CHECK_THROWS_AS(quantize_tensor(std::vector<double>{std::nan("")}, {1}, 8), DomainError);
    CHECK_THROWS_AS(quantize_tensor(std::vector<double>{1.0, 2.0}, {3}, 8), DomainError);
}

TEST_CASE("ADC rounding and clamping") {
    const AdcModel adc{1e-6, 5};
    bool clamped = true;
    CHECK(adc.convert(0.0, clamped) == 0);
    CHECK_FALSE(clamped);
    CHECK(adc.convert(0.49e-6, clamped) == 0);
    CHECK(adc.convert(0.5e-6, clamped) == 1);
    CHECK(adc.convert(3.4e-6, clamped) == 3);
    CHECK_FALSE(clamped);
    CHECK(adc.convert(9e-6, clamped) == 4);
    CHECK(clamped);
    CHECK(adc.convert(-2e-6, clamped) == 0);
    CHECK(clamped);
    CHECK_THROWS_AS((AdcModel{0.0, 5}.validate()), DomainError);
    CHECK_THROWS_AS((AdcModel{1e-6, 1}.validate()), DomainError);

    const auto tile = tile_of(16, 8);
    const auto model = topology::make_model(tile);
    const auto std_adc = AdcModel::standard(tile, model);
    CHECK(std_adc.levels == 17);
    CHECK(std_adc.i_lsb == doctest::Approx(tile.v_bl * devices::on_conductance(model)));
    auto pwa = tile;
    pwa.activation = topology::Activation::partial_rows(4);
    CHECK(AdcModel::standard(pwa, model).levels == 5);
}

TEST_CASE("mapping places every magnitude bit in its slice column") {
    std::mt19937_64 rng(3);
    const auto w = random_tensor(rng, {3, 10}, 6);
    const auto L = map_layer(w, 4, 8);
    CHECK(L.map.slices == 5);
    CHECK(L.map.expanded_cols() == 30);
    CHECK(L.map.row_tiles() == 3);
    CHECK(L.map.col_tiles() == 4);
    for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 10; ++i) {
            const auto v = w.values[std::size_t(o) * 10 + i];
            std::int64_t rebuilt = 0;
            for (int s = 0; s < 2; ++s)
                for (int k = 0; k < L.map.slices; ++k) {
                    const int c = L.map.column_of(o, s, k);
                    if (L.tile(i / 4, c / 8)(i % 4, c % 8)) rebuilt += (s ? -1 : 1) * (std::int64_t(1) << k);
                }
            CHECK(rebuilt == v);
        }
    // Padding rows and columns stay empty.
    const auto& corner = L.tile(2, 3);
    for (int r = 2; r < 4; ++r)
        for (int c = 0; c < 8; ++c) CHECK(corner(r, c) == 0);
    const auto other = map_layer(w, 4, 8);
    CHECK(other.id != L.id);
}

TEST_CASE("ideal shift-add equals the integer product") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> dim(1, 12), bits(1, 8);
    for (int trial = 0; trial < 1000; ++trial) {
        const int in = dim(rng), out = dim(rng) % 5 + 1;
        const int wb = bits(rng), xb = bits(rng);
        const auto w = random_tensor(rng, {std::size_t(out), std::size_t(in)}, wb);
        const auto x = random_input(rng, in, xb);
        auto tile = tile_of(trial % 2 ? 4 : 8, trial % 3 ? 8 : 6);
        if (trial % 4 == 0) tile.activation = topology::Activation::partial_rows(2);
        const auto model = topology::make_model(tile);
        const auto L = map_layer(w, tile.rows, tile.cols);
        CrossbarEngine e(tile, model, Mode::Ideal);
        MvmStats st;
        const auto y = e.mvm(x, xb, L, st);
        CAPTURE(trial);
        REQUIRE(y == integer_mvm(x, w));
        CHECK(st.saturations == 0);
    }
}

TEST_CASE("zero input reads zero in every mode") {
    std::mt19937_64 rng(5);
    const auto tile = tile_of(8, 8);
    const auto model = topology::make_model(tile);
    const auto L = map_layer(random_tensor(rng, {2, 8}, 8), 8, 8);
    const std::vector<std::int64_t> x(8, 0);
    for (auto mode : {Mode::Ideal, Mode::Solver}) {
        CrossbarEngine e(tile, model, mode);
        MvmStats st;
        CHECK(e.mvm(x, 8, L, st) == std::vector<std::int64_t>{0, 0});
    }
}

TEST_CASE("solver mode matches a netlist-level reference") {
    std::mt19937_64 rng(23);
    for (auto tech : kAllTechnologies)
        for (int group : {0, 2}) {
            auto tile = tile_of(4, 8, tech);
            if (group) tile.activation = topology::Activation::partial_rows(group);
            const auto model = topology::make_model(tile);
            const auto w = random_tensor(rng, {2, 6}, 4);
            const auto L = map_layer(w, tile.rows, tile.cols);
            CrossbarEngine e(tile, model, Mode::Solver);
            for (int rep = 0; rep < 3; ++rep) {
                const auto x = random_input(rng, 6, 4);
                MvmStats st;
                CAPTURE(std::string(to_string(tech)));
                CAPTURE(group);
                CHECK(e.mvm(x, 4, L, st) == reference_mvm(x, 4, L, tile, model));
            }
        }
}

TEST_CASE("zero-parasitic solver mode reads the device currents") {
    std::mt19937_64 rng(29);
    for (auto tech : kAllTechnologies) {
        auto tile = tile_of(4, 4, tech);
        tile.parasitics = topology::ParasiticsConfig::zero();
        const auto model = topology::make_model(tile);
        const auto w = random_tensor(rng, {2, 7}, 5);
        const auto L = map_layer(w, 4, 4);
        // Below half an LSB of total leakage the ADC hides the devices entirely.
        auto current = [&](int in, int w) { return devices::evaluate(model.curve(in, w), tile.v_bl).current; };
        const double leak = std::max({current(1, 0), current(0, 1), current(0, 0)});
        const bool exact = 4 * leak < 0.5 * AdcModel::standard(tile, model).i_lsb;
        CrossbarEngine ideal(tile, model, Mode::Ideal), solved(tile, model, Mode::Solver);
        for (int rep = 0; rep < 20; ++rep) {
            const auto x = random_input(rng, 7, 6);
            MvmStats a, b;
            const auto y = solved.mvm(x, 6, L, b);
            CAPTURE(std::string(to_string(tech)));
            CHECK(y == reference_mvm(x, 6, L, tile, model, true));
            if (exact) CHECK(y == ideal.mvm(x, 6, L, a));
        }
    }
}

TEST_CASE("PWA and FWA agree in ideal mode") {
    std::mt19937_64 rng(31);
    const auto w = random_tensor(rng, {4, 16}, 8);
    auto fwa = tile_of(16, 16);
    auto pwa = fwa;
    pwa.activation = topology::Activation::partial_rows(4);
    const auto model = topology::make_model(fwa);
    const auto L = map_layer(w, 16, 16);
    CrossbarEngine a(fwa, model, Mode::Ideal), b(pwa, model, Mode::Ideal);
    for (int rep = 0; rep < 50; ++rep) {
        const auto x = random_input(rng, 16, 8);
        MvmStats sa, sb;
        CHECK(a.mvm(x, 8, L, sa) == b.mvm(x, 8, L, sb));
    }
}

TEST_CASE("MVM error grows with the parasitic scale") {
    std::mt19937_64 rng(37);
    const auto w = random_tensor(rng, {4, 32}, 8);
    std::vector<std::vector<std::int64_t>> xs;
    for (int rep = 0; rep < 4; ++rep) xs.push_back(random_input(rng, 32, 8));
    double prev = -1.0;
    for (double k : {0.0, 1.0, 2.0}) {
        auto tile = tile_of(32, 32, TechnologyKind::SRAM);
        tile.parasitics = tile.parasitics.scaled(k);
        const auto model = topology::make_model(tile);
        const auto L = map_layer(w, 32, 32);
        CrossbarEngine e(tile, model, Mode::Solver);
        double err = 0.0;
        for (const auto& x : xs) {
            MvmStats st;
            const auto y = e.mvm(x, 8, L, st);
            const auto ref = integer_mvm(x, w);
            for (std::size_t o = 0; o < y.size(); ++o) err += std::abs(double(y[o] - ref[o]));
        }
        CAPTURE(k);
        if (k == 0.0) CHECK(err == 0.0);
        CHECK(err >= prev);
        prev = err;
    }
    CHECK(prev > 0.0);
}

TEST_CASE("zero-spread variations leave solver results unchanged") {
    std::mt19937_64 rng(41);
    const auto tile = tile_of(8, 8, TechnologyKind::ReRAM);
    const auto model = topology::make_model(tile);
    const auto w = random_tensor(rng, {2, 8}, 6);
    const auto L = map_layer(w, 8, 8);
    auto V = L;
    apply_layer_variations(V, model, tile.v_bl, dse::VariationConfig{0.0, 3}, 0);
    CHECK(V.id != L.id);
    for (const auto& s : V.scales)
        for (double v : s) CHECK(v == 1.0);
    auto S = L;
    apply_layer_variations(S, model, tile.v_bl, dse::VariationConfig{0.3, 3}, 0);
    CrossbarEngine e(tile, model, Mode::Solver);
    const auto x = random_input(rng, 8, 6);
    MvmStats a, b;
    CHECK(e.mvm(x, 6, V, a) == e.mvm(x, 6, L, b));
    MvmStats c;
    (void)e.mvm(x, 6, S, c);
}

TEST_CASE("engine input checks") {
    std::mt19937_64 rng(43);
    const auto tile = tile_of(8, 8);
    const auto model = topology::make_model(tile);
    const auto L = map_layer(random_tensor(rng, {2, 8}, 6), 8, 8);
    CrossbarEngine e(tile, model, Mode::Ideal);
    MvmStats st;
    CHECK_THROWS_AS(e.mvm(std::vector<std::int64_t>(7, 0), 4, L, st), DomainError);
    CHECK_THROWS_AS(e.mvm(std::vector<std::int64_t>(8, 8), 4, L, st), DomainError);
    const auto other = map_layer(random_tensor(rng, {2, 8}, 6), 4, 8);
    CHECK_THROWS_AS(e.mvm(std::vector<std::int64_t>(8, 0), 4, other, st), DomainError);
    CHECK_THROWS_AS(CrossbarEngine(tile, model, Mode::Surrogate), StateError);
    CHECK_THROWS_AS(parse_mode("analog"), UsageError);
    CHECK(parse_mode(to_string(Mode::Surrogate)) == Mode::Surrogate);
}

TEST_CASE("bundled model: ideal mode reproduces software quantization") {
    const auto model = load_model(kDesk / "model.json");
    const auto data = load_dataset(kDesk / "test.json");
    CHECK(model.layers.size() == 2);
    CHECK(data.features == 64);
    CHECK(data.count() == 400);
    InferenceConfig cfg;
    cfg.max_samples = 60;
    const auto cells = topology::make_model(cfg.tile);
    const auto ideal = run_inference(model, data, cfg, cells);
    const auto soft = software_inference(model, data, 16, 16, 60);
    CHECK(ideal.predictions == soft.predictions);
    CHECK(ideal.accuracy == soft.accuracy);
    CHECK(ideal.total == 60);
    CHECK(std::abs(soft.accuracy - float_accuracy(model, data, 60)) <= 0.05);
}

TEST_CASE("run_inference is independent of the worker count") {
    const auto model = load_model(kDesk / "model.json");
    const auto data = load_dataset(kDesk / "test.json");
    InferenceConfig cfg;
    cfg.tile.tech = TechnologyKind::SOTMRAM;
    cfg.tile.activation = topology::Activation::partial_rows(8);
    cfg.mode = Mode::Solver;
    cfg.max_samples = 3;
    cfg.nf_probe_samples = 2;
    const auto cells = topology::make_model(cfg.tile);
    cfg.workers = 1;
    const auto a = run_inference(model, data, cfg, cells);
    cfg.workers = 2;
    const auto b = run_inference(model, data, cfg, cells);
    CHECK(a.predictions == b.predictions);
    REQUIRE(a.layers.size() == 2);
    CHECK(a.layers[0].nf.count == b.layers[0].nf.count);
    CHECK(a.layers[0].nf.median == b.layers[0].nf.median);
    CHECK(a.layers[0].nf.count > 0);
    std::ostringstream os;
    write_result_json(os, a);
    CHECK(os.str().find("\"accuracy\"") != std::string::npos);
}

TEST_CASE("model and dataset files round-trip and reject malformed input") {
    const auto dir = std::filesystem::temp_directory_path() / "xbar_inference_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    DeskModel m;
    m.layers.push_back({"a", 3, 2, "relu", {1, 2, 3, 4, 5, 6}, {0.5f, -0.5f}});
    m.layers.push_back({"b", 2, 2, "none", {1, 0, 0, 1}, {0, 0}});
    save_model(m, dir / "m.json");
    const auto mb = load_model(dir / "m.json");
    REQUIRE(mb.layers.size() == 2);
    CHECK(mb.layers[0].weights == m.layers[0].weights);
    CHECK(mb.layers[1].bias == m.layers[1].bias);
    CHECK(mb.layers[0].activation == "relu");

    DeskDataset d;
    d.features = 3;
    d.classes = 2;
    d.x = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f};
    d.labels = {0, 1};
    save_dataset(d, dir / "d.json");
    const auto db = load_dataset(dir / "d.json");
    CHECK(db.x == d.x);
    CHECK(db.labels == d.labels);

    std::filesystem::resize_file(dir / "d.bin", 8);
    CHECK_THROWS_AS(load_dataset(dir / "d.json"), UsageError);
    std::filesystem::resize_file(dir / "m.bin", 8);
    CHECK_THROWS_AS(load_model(dir / "m.json"), UsageError);
    {
        std::ofstream(dir / "bad.json") << "{\"format\": \"xbar-model\", \"version\": 2}";
    }
    CHECK_THROWS_AS(load_model(dir / "bad.json"), UsageError);
    {
        std::ofstream(dir / "junk.json") << "{not json";
    }
    CHECK_THROWS_AS(load_dataset(dir / "junk.json"), UsageError);
    CHECK_THROWS_AS(load_model(dir / "missing.json"), UsageError);
    m.layers[1].activation = "softmax";
    CHECK_THROWS_AS(m.validate(), DomainError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("surrogate mode with a zero-deviation net reads the device currents") {
    std::mt19937_64 rng(47);
    const auto tile = tile_of(8, 8);
    const auto model = topology::make_model(tile);
    auto net = surrogate::make_net(16, 4, surrogate::Activation::Tanh, 1);
    auto p = net.parameters();
    std::fill(p.end() - 5, p.end(), 0.0);  // output layer: 4 weights and the bias
    net.set_parameters(p);
    const auto w = random_tensor(rng, {2, 8}, 5);
    const auto L = map_layer(w, 8, 8);
    CrossbarEngine e(tile, model, Mode::Surrogate, &net);
    for (int rep = 0; rep < 5; ++rep) {
        const auto x = random_input(rng, 8, 5);
        MvmStats st;
        CHECK(e.mvm(x, 5, L, st) == reference_mvm(x, 5, L, tile, model, true));
    }
    auto wrong = surrogate::make_net(10, 4, surrogate::Activation::Tanh, 1);
    CHECK_THROWS_AS(CrossbarEngine(tile, model, Mode::Surrogate, &wrong), DomainError);
}
