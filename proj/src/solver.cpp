#include "xbar/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace xbar::solver {

using topology::Element;
using topology::ElementKind;
using topology::kGround;
using topology::NetlistGraph;

void SolverOptions::validate() const {
    if (!(residual_tol > 0)) throw DomainError("solver tolerance must be positive");
    if (max_iterations < 1) throw DomainError("solver needs at least one iteration");
    if (!(min_damping > 0 && min_damping <= 1)) throw DomainError("damping floor must be in (0, 1]");
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Newton stops once the residual is below tolerance; while it is still far
// above the round-off floor, extra quadratic steps are taken as long as they
// keep paying off, since tiny leakage-dominated currents need more than an
// absolute 1e-12 A residual to be accurate in relative terms.
bool keep_going(double r, int it, const SolverOptions& opts) {
    if (r <= 1e-3 * opts.residual_tol) return false;
    if (it >= opts.max_iterations) {
        if (r <= opts.residual_tol) return false;
        throw ConvergenceError("Newton iteration did not converge (residual " + std::to_string(r) +
                                   " A)",
                               r, it);
    }
    return true;
}

class NodalSystem {
  public:
    NodalSystem(const NetlistGraph& net, const SolverOptions& opts) : net_(net), opts_(opts) {
        const int n = net.num_nodes;
        ground_ = n;
        for (const Element& e : net.elements) {
            if (e.a < kGround || e.a >= n || e.b < kGround || e.b >= n)
                throw StructuralError("element refers to a node outside the netlist");
            if (e.kind == ElementKind::Source && e.b != kGround)
                throw StructuralError("driver must return to ground");
            if (e.kind == ElementKind::Cell && (e.cell < 0 || e.cell >= int(net.cells.size())))
                throw StructuralError("cell element without a device model");
            if (e.kind != ElementKind::Cell && !(e.ohms >= 0))
                throw StructuralError("negative or NaN resistance in netlist");
        }
        merge_nodes();
        check_connected();
        build_pattern();
    }

    SolveResult run() {
        const int u = unknowns_;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(u), f(u), xt(u), ft(u), dx(u);
        evaluate(x, f, true);
        double r = max_abs(f);
        int it = 0;
        bool analyzed = false;
        while (keep_going(r, it, opts_)) {
            dx = linear_solve(-f, analyzed);
            double lambda = 1.0;
            double rt = 0.0;
            for (;;) {
                xt = x + lambda * dx;
                evaluate(xt, ft, false);
                rt = max_abs(ft);
                if (rt < r || lambda <= opts_.min_damping) break;
                lambda *= 0.5;
            }
            if (!std::isfinite(rt)) throw ConvergenceError("Newton step produced non-finite values", r, it);
            if (r <= opts_.residual_tol && !(rt < 0.5 * r)) break;  // polishing stalled
            ++it;
            x = xt;
            r = rt;
            evaluate(x, f, true);
        }
        return finish(x, it, r);
    }

  private:
    void merge_nodes() {
        const int n = net_.num_nodes;
        UnionFind uf(n + 1);
        auto idx = [&](int v) { return v == kGround ? ground_ : v; };
        for (const Element& e : net_.elements)
            if (e.kind == ElementKind::Resistor && e.ohms == 0.0) uf.unite(idx(e.a), idx(e.b));
        root_.resize(n + 1);
        for (int v = 0; v <= n; ++v) root_[v] = uf.find(v);

        fixed_.assign(n + 1, false);
        fixed_value_.assign(n + 1, 0.0);
        fixed_[root_[ground_]] = true;
        for (const Element& e : net_.elements) {
            if (e.kind != ElementKind::Source || e.ohms != 0.0) continue;
            const int r = root_[idx(e.a)];
            if (fixed_[r] && fixed_value_[r] != e.volts)
                throw StructuralError("conflicting ideal sources on node " + net_.node_name(e.a));
            fixed_[r] = true;
            fixed_value_[r] = e.volts;
        }
        unknown_of_.assign(n + 1, -1);
        unknowns_ = 0;
        for (int v = 0; v <= n; ++v)
            if (root_[v] == v && !fixed_[v]) unknown_of_[v] = unknowns_++;
    }

    int term(int node) const { return root_[node == kGround ? ground_ : node]; }

    void check_connected() {
        const int n = net_.num_nodes;
        std::vector<std::vector<int>> adj(n + 1);
        for (const Element& e : net_.elements) {
            const int a = term(e.a), b = term(e.b);
            if (e.kind == ElementKind::Source && e.ohms == 0.0) continue;
            if (a == b) continue;
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::vector<char> seen(n + 1, 0);
        std::vector<int> queue;
        for (int v = 0; v <= n; ++v)
            if (root_[v] == v && fixed_[v]) {
                seen[v] = 1;
                queue.push_back(v);
            }
        for (std::size_t q = 0; q < queue.size(); ++q)
            for (int w : adj[queue[q]])
                if (!seen[w]) {
                    seen[w] = 1;
                    queue.push_back(w);
                }
        for (int v = 0; v < n; ++v)
            if (!seen[root_[v]])
                throw StructuralError("node " + net_.node_name(v) +
                                      " is floating (no path to ground or a source)");
    }

    // Jacobian sparsity is fixed; remember where each stamp lands.
    void build_pattern() {
        std::vector<Eigen::Triplet<double>> trip;
        for (int v = 0; v < unknowns_; ++v) trip.emplace_back(v, v, 1.0);
        for (const Element& e : net_.elements) {
            if (e.kind == ElementKind::Source) continue;
            const int p = unknown_of_[term(e.a)], q = unknown_of_[term(e.b)];
            if (p >= 0 && q >= 0 && p != q) {
                trip.emplace_back(p, q, 1.0);
                trip.emplace_back(q, p, 1.0);
            }
        }
        jac_.resize(unknowns_, unknowns_);
        jac_.setFromTriplets(trip.begin(), trip.end());
        jac_.makeCompressed();
        auto slot = [&](int r, int c) {
            return static_cast<int>(&jac_.coeffRef(r, c) - jac_.valuePtr());
        };
        stamps_.resize(net_.elements.size());
        for (std::size_t k = 0; k < net_.elements.size(); ++k) {
            const Element& e = net_.elements[k];
            Stamp s;
            s.p = unknown_of_[term(e.a)];
            s.q = e.kind == ElementKind::Source ? -1 : unknown_of_[term(e.b)];
            s.pa = term(e.a);
            s.qa = term(e.b);
            if (s.p >= 0) s.pp = slot(s.p, s.p);
            if (s.q >= 0) s.qq = slot(s.q, s.q);
            if (s.p >= 0 && s.q >= 0 && s.p != s.q) {
                s.pq = slot(s.p, s.q);
                s.qp = slot(s.q, s.p);
            }
            stamps_[k] = s;
        }
    }

    double voltage(const Eigen::VectorXd& x, int root) const {
        const int k = unknown_of_[root];
        return k >= 0 ? x[k] : fixed_value_[root];
    }

    // KCL residual (current leaving each unknown supernode) and optionally
    // the Jacobian values.
    void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& f, bool jacobian) {
        f.setZero();
        double* val = jac_.valuePtr();
        if (jacobian) std::fill(val, val + jac_.nonZeros(), 0.0);
        for (std::size_t k = 0; k < net_.elements.size(); ++k) {
            const Element& e = net_.elements[k];
            const Stamp& s = stamps_[k];
            if (e.kind == ElementKind::Source) {
                if (e.ohms == 0.0 || s.p < 0) continue;
                const double g = 1.0 / e.ohms;
                f[s.p] += g * (x[s.p] - e.volts);
                if (jacobian) val[s.pp] += g;
                continue;
            }
            if (s.pa == s.qa) continue;
            if (e.kind == ElementKind::Resistor && e.ohms == 0.0) continue;
            const double vd = voltage(x, s.pa) - voltage(x, s.qa);
            double i, g;
            if (e.kind == ElementKind::Resistor) {
                g = 1.0 / e.ohms;
                i = g * vd;
            } else {
                const auto pt = net_.cells[e.cell].at(vd);
                i = pt.current;
                g = pt.conductance;
            }
            if (s.p >= 0) f[s.p] += i;
            if (s.q >= 0) f[s.q] -= i;
            if (jacobian) {
                if (s.p >= 0) val[s.pp] += g;
                if (s.q >= 0) val[s.qq] += g;
                if (s.pq >= 0) {
                    val[s.pq] -= g;
                    val[s.qp] -= g;
                }
            }
        }
    }

    Eigen::VectorXd linear_solve(const Eigen::VectorXd& rhs, bool& analyzed) {
        if (!use_lu_) {
            if (!analyzed) {
                ldlt_.analyzePattern(jac_);
                analyzed = true;
            }
            ldlt_.factorize(jac_);
            if (ldlt_.info() == Eigen::Success) {
                Eigen::VectorXd sol = ldlt_.solve(rhs);
                if (sol.allFinite()) return sol;
            }
            use_lu_ = true;
        }
        lu_.analyzePattern(jac_);
        lu_.factorize(jac_);
        if (lu_.info() != Eigen::Success) throw StructuralError("singular nodal matrix");
        Eigen::VectorXd sol = lu_.solve(rhs);
        if (!sol.allFinite()) throw StructuralError("singular nodal matrix");
        return sol;
    }

    SolveResult finish(const Eigen::VectorXd& x, int iterations, double residual) {
        const int n = net_.num_nodes;
        SolveResult res;
        res.newton_iterations = iterations;
        res.max_residual = residual;
        res.node_voltages.resize(n);
        for (int v = 0; v < n; ++v) res.node_voltages[v] = voltage(x, root_[v]);
        const auto vn = [&](int node) { return node == kGround ? 0.0 : res.node_voltages[node]; };

        const std::size_t ne = net_.elements.size();
        res.element_currents.assign(ne, 0.0);
        std::vector<double> inj(n + 1, 0.0);
        auto ix = [&](int v) { return v == kGround ? ground_ : v; };
        std::vector<std::vector<std::pair<int, int>>> zero_adj(n + 1);  // (neighbour, element)
        for (std::size_t k = 0; k < ne; ++k) {
            const Element& e = net_.elements[k];
            if (e.ohms == 0.0 && e.kind != ElementKind::Cell) {
                zero_adj[ix(e.a)].push_back({ix(e.b), int(k)});
                zero_adj[ix(e.b)].push_back({ix(e.a), int(k)});
                continue;
            }
            double i;
            if (e.kind == ElementKind::Source) {
                i = (e.volts - vn(e.a)) / e.ohms;
                inj[ix(e.a)] += i;
                inj[ground_] -= i;
            } else {
                const double vd = vn(e.a) - vn(e.b);
                i = e.kind == ElementKind::Resistor ? vd / e.ohms : net_.cells[e.cell].at(vd).current;
                inj[ix(e.a)] -= i;
                inj[ix(e.b)] += i;
            }
            res.element_currents[k] = i;
        }
        route_zero_elements(zero_adj, inj, res.element_currents);

        res.column_currents.resize(net_.sink_elements.size());
        for (std::size_t j = 0; j < net_.sink_elements.size(); ++j)
            res.column_currents[j] = res.element_currents[net_.sink_elements[j]];
        return res;
    }

    // Currents through zero-ohm elements follow from KCL on a spanning
    // forest of those elements (chords of any zero-ohm loop carry none).
    void route_zero_elements(const std::vector<std::vector<std::pair<int, int>>>& adj,
                             std::vector<double>& inj, std::vector<double>& cur) {
        const int total = net_.num_nodes + 1;
        std::vector<int> parent(total, -2), via(total, -1), order;
        auto bfs = [&](int root) {
            parent[root] = -1;
            std::size_t start = order.size();
            order.push_back(root);
            for (std::size_t q = start; q < order.size(); ++q)
                for (auto [w, k] : adj[order[q]])
                    if (parent[w] == -2) {
                        parent[w] = order[q];
                        via[w] = k;
                        order.push_back(w);
                    }
        };
        if (!adj[ground_].empty()) bfs(ground_);
        for (int v = 0; v < total; ++v)
            if (parent[v] == -2 && !adj[v].empty()) bfs(v);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int v = *it;
            if (parent[v] < 0) continue;
            const double flow = inj[v];  // leaves v toward its parent
            inj[parent[v]] += flow;
            const Element& e = net_.elements[via[v]];
            const int a = e.a == kGround ? ground_ : e.a;
            if (e.kind == ElementKind::Source)
                cur[via[v]] = a == v ? -flow : flow;
            else
                cur[via[v]] = a == v ? flow : -flow;
        }
    }

    struct Stamp {
        int p = -1, q = -1;    // unknown indices
        int pa = -1, qa = -1;  // supernode roots
        int pp = -1, qq = -1, pq = -1, qp = -1;
    };

    const NetlistGraph& net_;
    SolverOptions opts_;
    int ground_ = 0;
    int unknowns_ = 0;
    std::vector<int> root_;
    std::vector<char> fixed_;
    std::vector<double> fixed_value_;
    std::vector<int> unknown_of_;
    std::vector<Stamp> stamps_;
    Eigen::SparseMatrix<double> jac_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    bool use_lu_ = false;
};

}  // namespace

SolveResult solve_dc(const NetlistGraph& net, const SolverOptions& opts) {
    opts.validate();
    NodalSystem sys(net, opts);
    return sys.run();
}

void write_voltages_csv(std::ostream& os, const NetlistGraph& net, const SolveResult& r) {
    os << "node_id,name,volts\n";
    char buf[64];
    for (int v = 0; v < net.num_nodes; ++v) {
        std::snprintf(buf, sizeof buf, "%.17g", r.node_voltages[v]);
        os << v + 1 << "," << net.node_name(v) << "," << buf << "\n";
    }
}

std::vector<double> ideal_output(const topology::BitVector& inputs,
                                 const topology::BitMatrix& weights, double v, double g_on) {
    if (inputs.size() != std::size_t(weights.rows))
        throw DomainError("input length does not match weight rows");
    std::vector<double> out(weights.cols, 0.0);
    for (int j = 0; j < weights.cols; ++j) {
        int count = 0;
        for (int i = 0; i < weights.rows; ++i) count += (inputs[i] && weights(i, j)) ? 1 : 0;
        out[j] = count * v * g_on;
    }
    return out;
}

double nominal_cell_current(const topology::CrossbarConfig& cfg, const devices::CellElement& cell,
                            int input) {
    const double v = cfg.topology == Topology::GateInput ? cfg.v_bl : (input ? cfg.v_bl : 0.0);
    return v == 0.0 ? 0.0 : cell.at(v).current;
}

std::vector<double> device_ideal_output(const topology::CrossbarConfig& cfg,
                                        const devices::BitCellModel& model,
                                        const topology::BitMatrix& weights,
                                        const topology::BitVector& inputs,
                                        std::span<const double> cell_scale) {
    if (inputs.size() != std::size_t(weights.rows))
        throw DomainError("input length does not match weight rows");
    const bool gate = cfg.topology == Topology::GateInput;
    // Per-state currents under the nominal bias, computed once.
    double table[2][2];
    for (int in : {0, 1})
        for (int w : {0, 1}) {
            const int state_in = gate ? in : 1;
            const double v = gate ? cfg.v_bl : (in ? cfg.v_bl : 0.0);
            table[in][w] = v == 0.0 ? 0.0 : devices::evaluate(model.curve(state_in, w), v).current;
        }
    std::vector<double> out(weights.cols, 0.0);
    for (int j = 0; j < weights.cols; ++j) {
        double sum = 0.0;
        for (int i = 0; i < weights.rows; ++i) {
            const int in = inputs[i] ? 1 : 0;
            const int w = weights(i, j) ? 1 : 0;
            const double s = cell_scale.empty() ? 1.0 : cell_scale[std::size_t(i) * weights.cols + j];
            sum += s * table[in][w];
        }
        out[j] = sum;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ladder kernel

LadderColumn::LadderColumn(int rows, double r_driver, double r_via, double r_seg, double r_sink,
                           double v_bl)
    : n_(rows), size_(2 * rows + 4) {
    if (rows < 1) throw DomainError("ladder needs at least one row");
    if (!(r_driver > 0 && r_via > 0 && r_seg > 0 && r_sink > 0))
        throw DomainError("ladder kernel needs positive parasitic resistances");
    g_d_ = 1.0 / r_driver;
    g_via_ = 1.0 / r_via;
    g_seg_ = 1.0 / r_seg;
    g_s_ = 1.0 / r_sink;
    v_bl_ = v_bl;
    for (auto* v : {&x_, &xt_, &f_, &ft_, &dx_, &diag_, &e1_, &e2_, &d_, &l1_, &l2_})
        v->assign(size_, 0.0);
}

bool LadderColumn::supported(const topology::CrossbarConfig& cfg) {
    const auto& p = cfg.parasitics;
    return cfg.topology == Topology::GateInput && p.r_driver > 0 && p.via_res > 0 &&
           p.r_sink > 0 &&
           topology::segment_resistance(cfg.tech, p, topology::Axis::Vertical) > 0;
}

LadderColumn LadderColumn::for_config(const topology::CrossbarConfig& cfg) {
    const auto& p = cfg.parasitics;
    return LadderColumn(cfg.rows, p.r_driver, p.via_res,
                        topology::segment_resistance(cfg.tech, p, topology::Axis::Vertical),
                        p.r_sink, cfg.v_bl);
}

double LadderColumn::residual(std::span<const devices::CellElement> cells,
                              const std::vector<double>& x, std::vector<double>& f, bool jacobian) {
    const int n = n_;
    const int last = size_ - 1;  // K
    const int u = size_ - 2;
    std::fill(f.begin(), f.end(), 0.0);
    if (jacobian) {
        std::fill(diag_.begin(), diag_.end(), 0.0);
        std::fill(e1_.begin(), e1_.end(), 0.0);
        std::fill(e2_.begin(), e2_.end(), 0.0);
    }
    auto link = [&](int p, int q, double g) {  // q > p
        const double i = g * (x[p] - x[q]);
        f[p] += i;
        f[q] -= i;
        if (jacobian) {
            diag_[p] += g;
            diag_[q] += g;
            if (q - p == 1)
                e1_[q] -= g;
            else
                e2_[q] -= g;
        }
    };
    f[0] += g_d_ * (x[0] - v_bl_);
    if (jacobian) diag_[0] += g_d_;
    link(0, 1, g_via_);
    link(1, 2, g_seg_);
    for (int i = 0; i < n; ++i) {
        const int b = 2 + 2 * i, s = b + 1;
        if (i + 1 < n) {
            link(b, b + 2, g_seg_);
            link(s, s + 2, g_seg_);
        }
        const auto pt = cells[i].at(x[b] - x[s]);
        f[b] += pt.current;
        f[s] -= pt.current;
        if (jacobian) {
            diag_[b] += pt.conductance;
            diag_[s] += pt.conductance;
            e1_[s] -= pt.conductance;
        }
    }
    link(2 * n + 1, u, g_seg_);
    link(u, last, g_via_);
    f[last] += g_s_ * x[last];
    if (jacobian) diag_[last] += g_s_;
    double r = 0.0;
    for (double v : f) r = std::max(r, std::abs(v));
    return r;
}

void LadderColumn::factor_solve(std::vector<double>& rhs) {
    const int m = size_;
    for (int k = 0; k < m; ++k) {
        l2_[k] = k >= 2 ? e2_[k] / d_[k - 2] : 0.0;
        double a1 = e1_[k];
        if (k >= 2) a1 -= l2_[k] * d_[k - 2] * l1_[k - 1];
        l1_[k] = k >= 1 ? a1 / d_[k - 1] : 0.0;
        double dk = diag_[k];
        if (k >= 1) dk -= l1_[k] * l1_[k] * d_[k - 1];
        if (k >= 2) dk -= l2_[k] * l2_[k] * d_[k - 2];
        if (!(dk > 0)) throw StructuralError("ladder matrix is not positive definite");
        d_[k] = dk;
    }
    for (int k = 1; k < m; ++k) {
        rhs[k] -= l1_[k] * rhs[k - 1];
        if (k >= 2) rhs[k] -= l2_[k] * rhs[k - 2];
    }
    for (int k = 0; k < m; ++k) rhs[k] /= d_[k];
    for (int k = m - 2; k >= 0; --k) {
        rhs[k] -= l1_[k + 1] * rhs[k + 1];
        if (k + 2 < m) rhs[k] -= l2_[k + 2] * rhs[k + 2];
    }
}

ColumnSolve LadderColumn::solve(std::span<const devices::CellElement> cells,
                                const SolverOptions& opts) {
    if (cells.size() != std::size_t(n_)) throw DomainError("ladder column expects one cell per row");
    std::fill(x_.begin(), x_.end(), 0.0);
    double r = residual(cells, x_, f_, true);
    int it = 0;
    bool have_jacobian = true;
    while (keep_going(r, it, opts)) {
        // The Jacobian at an accepted point is only built when another step follows.
        if (!have_jacobian) residual(cells, x_, f_, true);
        for (int k = 0; k < size_; ++k) dx_[k] = -f_[k];
        factor_solve(dx_);
        double lambda = 1.0;
        double rt = 0.0;
        for (;;) {
            for (int k = 0; k < size_; ++k) xt_[k] = x_[k] + lambda * dx_[k];
            rt = residual(cells, xt_, ft_, false);
            if (rt < r || lambda <= opts.min_damping) break;
            lambda *= 0.5;
        }
        if (!std::isfinite(rt)) throw ConvergenceError("column Newton step diverged", r, it);
        if (r <= opts.residual_tol && !(rt < 0.5 * r)) break;
        ++it;
        x_.swap(xt_);
        r = rt;
        have_jacobian = false;
    }
    return {g_s_ * x_[size_ - 1], it, r};
}

}  // namespace xbar::solver
