#pragma once

// Crossbar netlist construction for gate-input and drain-input arrays.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xbar/common.hpp"
#include "xbar/devices.hpp"

namespace xbar::topology {

inline constexpr int kGround = -1;

struct ParasiticsConfig {
    double wire_res = 182.0;  // ohm per um
    double via_res = 56.0;    // ohm
    double r_driver = 500.0;  // ohm
    double r_sink = 100.0;    // ohm
    std::optional<double> vertical_pitch_um;    // default: per technology
    std::optional<double> horizontal_pitch_um;  // default: vertical pitch

    // Multiply every resistance by k.
    ParasiticsConfig scaled(double k) const;
    static ParasiticsConfig zero();
};

// Bit-cell heights: FeFET 1 GP, ReRAM 1.5 GP, SRAM and SOT-MRAM 2 GP (GP = 54 nm).
double default_vertical_pitch(TechnologyKind tech);

enum class Axis { Vertical, Horizontal };

double segment_resistance(TechnologyKind tech, const ParasiticsConfig& p, Axis axis);

// Word-line activation: all rows at once (FWA) or groups of consecutive rows (PWA).
struct Activation {
    int group_size = 0;  // 0 = all rows

    bool partial() const { return group_size > 0; }
    static Activation full() { return {}; }
    static Activation partial_rows(int g) { return {g}; }
};

struct RowGroup {
    int begin = 0;
    int end = 0;  // exclusive
};

struct CrossbarConfig {
    int rows = 64;
    int cols = 64;
    Topology topology = Topology::GateInput;
    double v_wl = 0.7;
    double v_bl = 0.25;
    Activation activation;
    TechnologyKind tech = TechnologyKind::FeFET;
    Fidelity fidelity = Fidelity::Level0Linear;
    ParasiticsConfig parasitics;
    devices::DeviceKnobs knobs;

    void validate() const;
    std::vector<RowGroup> row_groups() const;
    int active_rows() const { return activation.partial() ? activation.group_size : rows; }
};

devices::BitCellModel make_model(const CrossbarConfig& cfg);

// Row-major bit matrix.
struct BitMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> bits;

    BitMatrix() = default;
    BitMatrix(int r, int c, std::uint8_t fill = 0) : rows(r), cols(c), bits(std::size_t(r) * c, fill) {}
    std::uint8_t operator()(int i, int j) const { return bits[std::size_t(i) * cols + j]; }
    std::uint8_t& operator()(int i, int j) { return bits[std::size_t(i) * cols + j]; }
};

using BitVector = std::vector<std::uint8_t>;

enum class ElementKind { Resistor, Source, Cell };

// Source: Thevenin driver from ground to node a (b is always ground);
// delivers (volts - v_a) / ohms into a. Cell: nonlinear element, current
// flows a -> b.
struct Element {
    ElementKind kind = ElementKind::Resistor;
    int a = kGround;
    int b = kGround;
    double ohms = 0.0;
    double volts = 0.0;
    int cell = -1;
};

struct CellSite {
    int row = 0;
    int col = 0;
    int input = 0;
    int weight = 0;
};

struct NodeLabel {
    char kind = '?';  // A driver side, T via top, b BL rail, s SL rail, U rail end, K sense
    int i = 0;
    int j = 0;
};

struct NetlistGraph {
    Topology topology = Topology::GateInput;
    int rows = 0;
    int cols = 0;
    int num_nodes = 0;
    std::vector<NodeLabel> labels;
    std::vector<Element> elements;
    std::vector<devices::CellElement> cells;
    std::vector<CellSite> sites;
    std::vector<int> drivers;       // element index per driver
    std::vector<int> sink_elements;  // element index of R_S per column
    std::vector<int> sense_nodes;    // node K per column

    int add_node(NodeLabel label);
    int add_resistor(int a, int b, double ohms);
    int add_source(int a, double volts, double ohms);
    int add_cell(int a, int b, devices::CellElement element, CellSite site);
    std::string node_name(int node) const;
};

// Closed-form counts (the builders audit themselves against these).
std::size_t expected_node_count(Topology topo, int rows, int cols);
std::size_t expected_element_count(Topology topo, int rows, int cols);

// `cell_scale`, if not empty, is a row-major rows*cols vector of
// multiplicative current scales (device variations).
NetlistGraph build_gate_input(const CrossbarConfig& cfg, const devices::BitCellModel& model,
                              const BitMatrix& weights, const BitVector& inputs,
                              std::span<const double> cell_scale = {});
NetlistGraph build_drain_input(const CrossbarConfig& cfg, const devices::BitCellModel& model,
                               const BitMatrix& weights, const BitVector& inputs,
                               std::span<const double> cell_scale = {});
NetlistGraph build(const CrossbarConfig& cfg, const devices::BitCellModel& model,
                   const BitMatrix& weights, const BitVector& inputs,
                   std::span<const double> cell_scale = {});

// Inputs outside the group are forced to 0.
BitVector mask_inputs(const BitVector& inputs, RowGroup group);

// One netlist per activation group (a single one for FWA).
std::vector<NetlistGraph> build_activation_groups(const CrossbarConfig& cfg,
                                                  const devices::BitCellModel& model,
                                                  const BitMatrix& weights, const BitVector& inputs,
                                                  std::span<const double> cell_scale = {});

// Plain-text element list.
void write_netlist(std::ostream& os, const NetlistGraph& net);
NetlistGraph read_netlist(std::istream& is);

}  // namespace xbar::topology
