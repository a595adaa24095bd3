#include "xbar/topology.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace xbar::topology {

using devices::BitCellModel;
using devices::CellElement;

ParasiticsConfig ParasiticsConfig::scaled(double k) const {
    ParasiticsConfig p = *this;
    p.wire_res *= k;
    p.via_res *= k;
    p.r_driver *= k;
    p.r_sink *= k;
    return p;
}

ParasiticsConfig ParasiticsConfig::zero() { return ParasiticsConfig{}.scaled(0.0); }

double default_vertical_pitch(TechnologyKind tech) {
    constexpr double gp = 0.054;
    switch (tech) {
        case TechnologyKind::FeFET: return gp;
        case TechnologyKind::ReRAM: return 1.5 * gp;
        case TechnologyKind::SRAM:
        case TechnologyKind::SOTMRAM: return 2.0 * gp;
    }
    return gp;
}

double segment_resistance(TechnologyKind tech, const ParasiticsConfig& p, Axis axis) {
    const double vertical = p.vertical_pitch_um.value_or(default_vertical_pitch(tech));
    const double pitch =
        axis == Axis::Vertical ? vertical : p.horizontal_pitch_um.value_or(vertical);
    return pitch * p.wire_res;
}

void CrossbarConfig::validate() const {
    if (rows < 1 || cols < 1) throw DomainError("crossbar needs at least one row and one column");
    if (activation.group_size < 0) throw DomainError("PWA group size must be positive");
    if (activation.partial() && rows % activation.group_size != 0)
        throw DomainError("PWA group size " + std::to_string(activation.group_size) +
                          " does not divide " + std::to_string(rows) + " rows");
    if (!(v_wl >= 0 && v_wl <= 0.7) || !(v_bl >= 0 && v_bl <= 0.7))
        throw DomainError("array voltages must lie in [0, 0.7] V");
    const auto& p = parasitics;
    if (!(p.wire_res >= 0 && p.via_res >= 0 && p.r_driver >= 0 && p.r_sink >= 0))
        throw DomainError("parasitic resistances must be non-negative");
    if ((p.vertical_pitch_um && !(*p.vertical_pitch_um > 0)) ||
        (p.horizontal_pitch_um && !(*p.horizontal_pitch_um > 0)))
        throw DomainError("bit-cell pitches must be positive");
}

std::vector<RowGroup> CrossbarConfig::row_groups() const {
    std::vector<RowGroup> groups;
    if (!activation.partial()) {
        groups.push_back({0, rows});
        return groups;
    }
    for (int r = 0; r < rows; r += activation.group_size)
        groups.push_back({r, r + activation.group_size});
    return groups;
}

BitCellModel make_model(const CrossbarConfig& cfg) {
    return BitCellModel::calibrate(cfg.tech, cfg.fidelity, cfg.knobs);
}

// ---------------------------------------------------------------------------

int NetlistGraph::add_node(NodeLabel label) {
    labels.push_back(label);
    return num_nodes++;
}

int NetlistGraph::add_resistor(int a, int b, double ohms) {
    elements.push_back({ElementKind::Resistor, a, b, ohms, 0.0, -1});
    return static_cast<int>(elements.size()) - 1;
}

int NetlistGraph::add_source(int a, double volts, double ohms) {
    elements.push_back({ElementKind::Source, a, kGround, ohms, volts, -1});
    return static_cast<int>(elements.size()) - 1;
}

int NetlistGraph::add_cell(int a, int b, CellElement element, CellSite site) {
    cells.push_back(std::move(element));
    sites.push_back(site);
    elements.push_back({ElementKind::Cell, a, b, 0.0, 0.0, static_cast<int>(cells.size()) - 1});
    return static_cast<int>(elements.size()) - 1;
}

std::string NetlistGraph::node_name(int node) const {
    if (node == kGround) return "0";
    const NodeLabel& l = labels.at(node);
    switch (l.kind) {
        case 'b':
        case 's': return std::string(1, l.kind) + std::to_string(l.i) + "_" + std::to_string(l.j);
        default: return std::string(1, l.kind) + std::to_string(l.j);
    }
}

std::size_t expected_node_count(Topology topo, int rows, int cols) {
    const std::size_t n = rows, m = cols;
    if (topo == Topology::GateInput) return m * (2 * n + 4);
    return 2 * n * m + 2 * n + 2 * m;
}

std::size_t expected_element_count(Topology topo, int rows, int cols) {
    const std::size_t n = rows, m = cols;
    if (topo == Topology::GateInput) return m * (3 * n + 4);
    return 3 * n * m + 2 * n + 2 * m;
}

namespace {

void check_dims(const CrossbarConfig& cfg, const BitMatrix& weights, const BitVector& inputs,
                std::span<const double> cell_scale) {
    cfg.validate();
    if (weights.rows != cfg.rows || weights.cols != cfg.cols ||
        weights.bits.size() != std::size_t(cfg.rows) * cfg.cols)
        throw DomainError("weight matrix is " + std::to_string(weights.rows) + "x" +
                          std::to_string(weights.cols) + ", config expects " +
                          std::to_string(cfg.rows) + "x" + std::to_string(cfg.cols));
    if (inputs.size() != std::size_t(cfg.rows))
        throw DomainError("input vector has " + std::to_string(inputs.size()) + " bits, expected " +
                          std::to_string(cfg.rows));
    if (!cell_scale.empty() && cell_scale.size() != std::size_t(cfg.rows) * cfg.cols)
        throw DomainError("variation field does not match the array size");
}

void audit(const NetlistGraph& net, const CrossbarConfig& cfg) {
    if (std::size_t(net.num_nodes) != expected_node_count(cfg.topology, cfg.rows, cfg.cols) ||
        net.elements.size() != expected_element_count(cfg.topology, cfg.rows, cfg.cols))
        throw StructuralError("netlist builder audit failed");
}

CellElement make_cell(const BitCellModel& model, int input, int weight,
                      std::span<const double> scale, std::size_t k) {
    return CellElement{model.curve(input, weight), scale.empty() ? 1.0 : scale[k]};
}

}  // namespace

NetlistGraph build_gate_input(const CrossbarConfig& cfg, const BitCellModel& model,
                              const BitMatrix& weights, const BitVector& inputs,
                              std::span<const double> cell_scale) {
    check_dims(cfg, weights, inputs, cell_scale);
    const int n = cfg.rows, m = cfg.cols;
    const auto& p = cfg.parasitics;
    const double seg = segment_resistance(cfg.tech, p, Axis::Vertical);

    NetlistGraph net;
    net.topology = Topology::GateInput;
    net.rows = n;
    net.cols = m;
    net.labels.reserve(expected_node_count(Topology::GateInput, n, m));
    net.elements.reserve(expected_element_count(Topology::GateInput, n, m));
    net.cells.reserve(std::size_t(n) * m);
    net.sites.reserve(std::size_t(n) * m);

    std::vector<int> bl(n), sl(n);
    for (int j = 0; j < m; ++j) {
        const int a = net.add_node({'A', 0, j});
        const int t = net.add_node({'T', 0, j});
        for (int i = 0; i < n; ++i) {
            bl[i] = net.add_node({'b', i, j});
            sl[i] = net.add_node({'s', i, j});
        }
        const int u = net.add_node({'U', 0, j});
        const int k = net.add_node({'K', 0, j});

        net.drivers.push_back(net.add_source(a, cfg.v_bl, p.r_driver));
        net.add_resistor(a, t, p.via_res);
        net.add_resistor(t, bl[0], seg);
        for (int i = 0; i + 1 < n; ++i) net.add_resistor(bl[i], bl[i + 1], seg);
        for (int i = 0; i < n; ++i) {
            const int in = inputs[i] ? 1 : 0;
            const int w = weights(i, j) ? 1 : 0;
            net.add_cell(bl[i], sl[i], make_cell(model, in, w, cell_scale, std::size_t(i) * m + j),
                         {i, j, in, w});
        }
        for (int i = 0; i + 1 < n; ++i) net.add_resistor(sl[i], sl[i + 1], seg);
        net.add_resistor(sl[n - 1], u, seg);
        net.add_resistor(u, k, p.via_res);
        net.sink_elements.push_back(net.add_resistor(k, kGround, p.r_sink));
        net.sense_nodes.push_back(k);
    }
    audit(net, cfg);
    return net;
}

NetlistGraph build_drain_input(const CrossbarConfig& cfg, const BitCellModel& model,
                               const BitMatrix& weights, const BitVector& inputs,
                               std::span<const double> cell_scale) {
    check_dims(cfg, weights, inputs, cell_scale);
    const int n = cfg.rows, m = cfg.cols;
    const auto& p = cfg.parasitics;
    const double seg_v = segment_resistance(cfg.tech, p, Axis::Vertical);
    const double seg_h = segment_resistance(cfg.tech, p, Axis::Horizontal);

    NetlistGraph net;
    net.topology = Topology::DrainInput;
    net.rows = n;
    net.cols = m;
    net.labels.reserve(expected_node_count(Topology::DrainInput, n, m));
    net.elements.reserve(expected_element_count(Topology::DrainInput, n, m));

    std::vector<int> bl(std::size_t(n) * m), sl(std::size_t(n) * m);
    for (int i = 0; i < n; ++i) {
        const int a = net.add_node({'A', 0, i});
        const int t = net.add_node({'T', 0, i});
        for (int j = 0; j < m; ++j) bl[std::size_t(i) * m + j] = net.add_node({'b', i, j});
        net.drivers.push_back(net.add_source(a, inputs[i] ? cfg.v_bl : 0.0, p.r_driver));
        net.add_resistor(a, t, p.via_res);
        net.add_resistor(t, bl[std::size_t(i) * m], seg_h);
        for (int j = 0; j + 1 < m; ++j)
            net.add_resistor(bl[std::size_t(i) * m + j], bl[std::size_t(i) * m + j + 1], seg_h);
    }
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) sl[std::size_t(i) * m + j] = net.add_node({'s', i, j});
        const int u = net.add_node({'U', 0, j});
        const int k = net.add_node({'K', 0, j});
        for (int i = 0; i < n; ++i) {
            const int w = weights(i, j) ? 1 : 0;
            const std::size_t idx = std::size_t(i) * m + j;
            // Gate held at V_WL: the cell sits in its (1, w) state.
            net.add_cell(bl[idx], sl[idx], make_cell(model, 1, w, cell_scale, idx),
                         {i, j, inputs[i] ? 1 : 0, w});
        }
        for (int i = 0; i + 1 < n; ++i)
            net.add_resistor(sl[std::size_t(i) * m + j], sl[std::size_t(i + 1) * m + j], seg_v);
        net.add_resistor(sl[std::size_t(n - 1) * m + j], u, seg_v);
        net.add_resistor(u, k, p.via_res);
        net.sink_elements.push_back(net.add_resistor(k, kGround, p.r_sink));
        net.sense_nodes.push_back(k);
    }
    audit(net, cfg);
    return net;
}

NetlistGraph build(const CrossbarConfig& cfg, const BitCellModel& model, const BitMatrix& weights,
                   const BitVector& inputs, std::span<const double> cell_scale) {
    return cfg.topology == Topology::GateInput
               ? build_gate_input(cfg, model, weights, inputs, cell_scale)
               : build_drain_input(cfg, model, weights, inputs, cell_scale);
}

BitVector mask_inputs(const BitVector& inputs, RowGroup group) {
    BitVector out(inputs.size(), 0);
    for (int i = group.begin; i < group.end && i < static_cast<int>(inputs.size()); ++i)
        out[i] = inputs[i];
    return out;
}

std::vector<NetlistGraph> build_activation_groups(const CrossbarConfig& cfg,
                                                  const BitCellModel& model,
                                                  const BitMatrix& weights, const BitVector& inputs,
                                                  std::span<const double> cell_scale) {
    std::vector<NetlistGraph> nets;
    for (const RowGroup& g : cfg.row_groups())
        nets.push_back(build(cfg, model, weights, mask_inputs(inputs, g), cell_scale));
    return nets;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int ext(int node) { return node == kGround ? 0 : node + 1; }
int internal(int id) { return id == 0 ? kGround : id - 1; }

}  // namespace

void write_netlist(std::ostream& os, const NetlistGraph& net) {
    os << "# xbar-netlist v1\n";
    os << "topology " << to_string(net.topology) << " rows " << net.rows << " cols " << net.cols
       << " nodes " << net.num_nodes << " elements " << net.elements.size() << "\n";
    for (int v = 0; v < net.num_nodes; ++v) {
        const NodeLabel& l = net.labels[v];
        os << "N " << ext(v) << " " << l.kind << " " << l.i << " " << l.j << " " << net.node_name(v)
           << "\n";
    }
    for (const Element& e : net.elements) {
        switch (e.kind) {
            case ElementKind::Resistor:
                os << "R " << ext(e.a) << " " << ext(e.b) << " " << fmt(e.ohms) << "\n";
                break;
            case ElementKind::Source:
                os << "V " << ext(e.a) << " 0 " << fmt(e.volts) << " " << fmt(e.ohms) << "\n";
                break;
            case ElementKind::Cell: {
                const CellSite& s = net.sites[e.cell];
                const CellElement& c = net.cells[e.cell];
                os << "C " << ext(e.a) << " " << ext(e.b) << " " << s.row << " " << s.col << " "
                   << s.input << " " << s.weight << " " << fmt(c.scale) << " ";
                if (const auto* lin = std::get_if<devices::LinearCurve>(&c.curve)) {
                    os << "linear " << fmt(lin->conductance);
                } else if (const auto* rr = std::get_if<devices::ReramSeriesCurve>(&c.curve)) {
                    os << "reram " << fmt(rr->i_scale) << " " << fmt(rr->v0) << " "
                       << fmt(rr->r_series);
                } else {
                    const auto& fe = std::get<devices::FefetCurve>(c.curve);
                    os << "fefet " << fmt(fe.channel.i_spec) << " " << fmt(fe.channel.slope_n) << " "
                       << fmt(fe.channel.threshold(fe.state)) << " " << fmt(fe.v_gs);
                }
                os << "\n";
                break;
            }
        }
    }
    for (int d : net.drivers) os << "driver " << d << "\n";
    for (std::size_t j = 0; j < net.sink_elements.size(); ++j)
        os << "sink " << j << " " << net.sink_elements[j] << " " << ext(net.sense_nodes[j]) << "\n";
}

NetlistGraph read_netlist(std::istream& is) {
    NetlistGraph net;
    std::string line;
    auto fail = [&](const std::string& why) {
        throw StructuralError("malformed netlist line '" + line + "': " + why);
    };
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "topology") {
            std::string topo, k;
            int nodes = 0;
            std::size_t elems = 0;
            ls >> topo >> k >> net.rows >> k >> net.cols >> k >> nodes >> k >> elems;
            if (!ls) fail("bad header");
            net.topology = parse_topology(topo);
        } else if (tag == "N") {
            int id;
            NodeLabel l;
            ls >> id >> l.kind >> l.i >> l.j;
            if (!ls || id != net.num_nodes + 1) fail("node ids must be consecutive from 1");
            net.add_node(l);
        } else if (tag == "R") {
            int a, b;
            double ohms;
            ls >> a >> b >> ohms;
            if (!ls) fail("expected a b ohms");
            net.add_resistor(internal(a), internal(b), ohms);
        } else if (tag == "V") {
            int a, b;
            double volts, ohms;
            ls >> a >> b >> volts >> ohms;
            if (!ls || b != 0) fail("expected a 0 volts ohms");
            net.add_source(internal(a), volts, ohms);
        } else if (tag == "C") {
            int a, b;
            CellSite s;
            double scale;
            std::string kind;
            ls >> a >> b >> s.row >> s.col >> s.input >> s.weight >> scale >> kind;
            devices::CellElement c;
            c.scale = scale;
            if (kind == "linear") {
                double g;
                ls >> g;
                c.curve = devices::LinearCurve{g};
            } else if (kind == "reram") {
                devices::ReramSeriesCurve r;
                ls >> r.i_scale >> r.v0 >> r.r_series;
                c.curve = r;
            } else if (kind == "fefet") {
                devices::FefetCurve f;
                double vt;
                ls >> f.channel.i_spec >> f.channel.slope_n >> vt >> f.v_gs;
                f.channel.vt_set = f.channel.vt_reset = vt;
                f.state = devices::FefetState::Set;
                c.curve = f;
            } else {
                fail("unknown cell kind");
            }
            if (!ls) fail("truncated cell");
            net.add_cell(internal(a), internal(b), c, s);
        } else if (tag == "driver") {
            int d;
            ls >> d;
            if (!ls) fail("expected element index");
            net.drivers.push_back(d);
        } else if (tag == "sink") {
            int j, e, k;
            ls >> j >> e >> k;
            if (!ls) fail("expected column element node");
            net.sink_elements.push_back(e);
            net.sense_nodes.push_back(internal(k));
        } else {
            fail("unknown record");
        }
    }
    return net;
}

}  // namespace xbar::topology
