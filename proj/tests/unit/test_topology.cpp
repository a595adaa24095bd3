#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "xbar/topology.hpp"

using namespace xbar;
using namespace xbar::topology;

namespace {

CrossbarConfig small(TechnologyKind tech, Topology topo, int n, int m) {
    CrossbarConfig c;
    c.tech = tech;
    c.topology = topo;
    c.rows = n;
    c.cols = m;
    return c;
}

BitMatrix random_bits(int n, int m, std::mt19937_64& rng) {
    BitMatrix w(n, m);
    for (auto& b : w.bits) b = rng() & 1;
    return w;
}

BitVector random_inputs(int n, std::mt19937_64& rng) {
    BitVector v(n);
    for (auto& b : v) b = rng() & 1;
    return v;
}

}  // namespace

TEST_CASE("segment resistance follows the bit-cell height") {
    const ParasiticsConfig p;
    CHECK(segment_resistance(TechnologyKind::FeFET, p, Axis::Vertical) == doctest::Approx(9.828));
    CHECK(segment_resistance(TechnologyKind::SRAM, p, Axis::Vertical) == doctest::Approx(19.656));
    CHECK(segment_resistance(TechnologyKind::ReRAM, p, Axis::Vertical) == doctest::Approx(14.742));
    CHECK(segment_resistance(TechnologyKind::SOTMRAM, p, Axis::Vertical) == doctest::Approx(19.656));
    CHECK(segment_resistance(TechnologyKind::FeFET, p, Axis::Horizontal) ==
          segment_resistance(TechnologyKind::FeFET, p, Axis::Vertical));
    ParasiticsConfig q;
    q.horizontal_pitch_um = 0.2;
    CHECK(segment_resistance(TechnologyKind::FeFET, q, Axis::Horizontal) == doctest::Approx(36.4));
}

TEST_CASE("1x1 gate-input chain is the series sum") {
    const auto cfg = small(TechnologyKind::FeFET, Topology::GateInput, 1, 1);
    const auto model = make_model(cfg);
    const auto net = build_gate_input(cfg, model, BitMatrix(1, 1, 1), BitVector{1});
    double total = 0.0;
    for (const auto& e : net.elements) {
        if (e.kind == ElementKind::Cell)
            total += 1.0 / std::get<devices::LinearCurve>(net.cells[e.cell].curve).conductance;
        else
            total += e.ohms;
    }
    CHECK(total == doctest::Approx(60731.656).epsilon(1e-9));
    CHECK(net.drivers.size() == 1);
    CHECK(net.sink_elements.size() == 1);
}

TEST_CASE("builder counts match the closed form") {
    std::mt19937_64 rng(3);
    for (auto topo : {Topology::GateInput, Topology::DrainInput})
        for (int n = 1; n <= 8; ++n)
            for (int m = 1; m <= 8; ++m) {
                const auto cfg = small(TechnologyKind::SRAM, topo, n, m);
                const auto model = make_model(cfg);
                const auto net = build(cfg, model, random_bits(n, m, rng), random_inputs(n, rng));
                CHECK(std::size_t(net.num_nodes) == expected_node_count(topo, n, m));
                CHECK(net.elements.size() == expected_element_count(topo, n, m));
                CHECK(net.cells.size() == std::size_t(n) * m);
                CHECK(net.sink_elements.size() == std::size_t(m));
            }
    CHECK(expected_node_count(Topology::GateInput, 64, 64) == 64u * (2 * 64 + 2) + 2 * 64);
}

TEST_CASE("zero inputs only select cell states") {
    const auto cfg = small(TechnologyKind::FeFET, Topology::GateInput, 4, 3);
    const auto model = make_model(cfg);
    std::mt19937_64 rng(5);
    const auto w = random_bits(4, 3, rng);
    const auto a = build(cfg, model, w, BitVector(4, 0));
    const auto b = build(cfg, model, w, BitVector(4, 1));
    CHECK(a.elements.size() == b.elements.size());
    for (std::size_t k = 0; k < a.sites.size(); ++k) {
        CHECK(a.sites[k].input == 0);
        const auto& s = a.sites[k];
        const double g = std::get<devices::LinearCurve>(a.cells[k].curve).conductance;
        CHECK(g == 1.0 / model.corners().at(0, s.weight));
        CHECK(a.elements[k].a == b.elements[k].a);
    }
}

TEST_CASE("drain-input cells ignore the input bit") {
    const auto cfg = small(TechnologyKind::FeFET, Topology::DrainInput, 3, 3);
    const auto model = make_model(cfg);
    std::mt19937_64 rng(8);
    const auto w = random_bits(3, 3, rng);
    const auto net = build(cfg, model, w, BitVector{1, 0, 1});
    for (std::size_t k = 0; k < net.sites.size(); ++k) {
        const double g = std::get<devices::LinearCurve>(net.cells[k].curve).conductance;
        CHECK(g == 1.0 / model.corners().at(1, net.sites[k].weight));
    }
    CHECK(net.elements[net.drivers[1]].volts == 0.0);
    CHECK(net.elements[net.drivers[0]].volts == 0.25);
}

TEST_CASE("dimension and config errors") {
    auto cfg = small(TechnologyKind::FeFET, Topology::GateInput, 4, 4);
    const auto model = make_model(cfg);
    CHECK_THROWS_AS(build(cfg, model, BitMatrix(3, 4), BitVector(4)), DomainError);
    CHECK_THROWS_AS(build(cfg, model, BitMatrix(4, 4), BitVector(5)), DomainError);
    cfg.activation = Activation::partial_rows(3);
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg.activation = Activation::partial_rows(2);
    CHECK_NOTHROW(cfg.validate());
    cfg.v_bl = 0.8;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("activation groups") {
    auto cfg = small(TechnologyKind::SOTMRAM, Topology::GateInput, 16, 2);
    cfg.activation = Activation::partial_rows(8);
    const auto groups = cfg.row_groups();
    REQUIRE(groups.size() == 2);
    CHECK(groups[1].begin == 8);
    CHECK(groups[1].end == 16);
    BitVector in(16, 1);
    const auto masked = mask_inputs(in, groups[1]);
    for (int i = 0; i < 16; ++i) CHECK(masked[i] == (i >= 8 ? 1 : 0));
    const auto model = make_model(cfg);
    const auto nets = build_activation_groups(cfg, model, BitMatrix(16, 2, 1), in);
    CHECK(nets.size() == 2);
    CHECK(cfg.active_rows() == 8);
}

TEST_CASE("netlist text round trip") {
    std::mt19937_64 rng(21);
    for (auto tech : kAllTechnologies)
        for (auto fid : {Fidelity::Level0Linear, Fidelity::Level1Physical})
            for (auto topo : {Topology::GateInput, Topology::DrainInput}) {
                auto cfg = small(tech, topo, 3, 2);
                cfg.fidelity = fid;
                const auto model = make_model(cfg);
                const auto net = build(cfg, model, random_bits(3, 2, rng), random_inputs(3, rng));
                std::stringstream ss;
                write_netlist(ss, net);
                const auto back = read_netlist(ss);
                CHECK(back.num_nodes == net.num_nodes);
                REQUIRE(back.elements.size() == net.elements.size());
                for (std::size_t k = 0; k < net.elements.size(); ++k) {
                    CHECK(back.elements[k].a == net.elements[k].a);
                    CHECK(back.elements[k].b == net.elements[k].b);
                    CHECK(back.elements[k].ohms == net.elements[k].ohms);
                    CHECK(back.elements[k].volts == net.elements[k].volts);
                }
                for (std::size_t k = 0; k < net.cells.size(); ++k)
                    for (double v : {0.05, 0.25})
                        CHECK(back.cells[k].at(v).current == net.cells[k].at(v).current);
                CHECK(back.sink_elements == net.sink_elements);
                CHECK(back.sense_nodes == net.sense_nodes);
                CHECK(back.drivers == net.drivers);
                std::stringstream again;
                write_netlist(again, back);
                std::stringstream first;
                write_netlist(first, net);
                CHECK(again.str() == first.str());
            }
    std::istringstream bad("Q 1 2 3\n");
    CHECK_THROWS_AS(read_netlist(bad), StructuralError);
}
