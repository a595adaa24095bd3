#pragma once

// DC operating point of crossbar netlists (nodal analysis + damped Newton).

#include <iosfwd>
#include <span>
#include <vector>

#include "xbar/devices.hpp"
#include "xbar/topology.hpp"

namespace xbar::solver {

struct SolverOptions {
    double residual_tol = 1e-12;  // amps
    int max_iterations = 100;
    double min_damping = 1.0 / 64.0;

    void validate() const;
};

struct SolveResult {
    std::vector<double> node_voltages;
    std::vector<double> column_currents;   // into R_S, per column
    std::vector<double> element_currents;  // a -> b; sources: current delivered into a
    int newton_iterations = 0;
    double max_residual = 0.0;
};

// Zero-ohm resistors and drivers are handled by node merging; nets must be
// connected to ground through finite elements or fixed sources.
SolveResult solve_dc(const topology::NetlistGraph& net, const SolverOptions& opts = {});

// node-id,volts (ids as in the text netlist, ground = 0 omitted).
void write_voltages_csv(std::ostream& os, const topology::NetlistGraph& net, const SolveResult& r);

// Binary multiply-accumulate: I_j = sum_i inputs[i] * V * weights[i][j] * G_ON.
std::vector<double> ideal_output(const topology::BitVector& inputs,
                                 const topology::BitMatrix& weights, double v, double g_on);

// Same sum with the actual cell conductances: every cell sees its full
// nominal bias (V_BL for gate-input; input * V_BL for drain-input) and
// contributes the current of its (input, weight) state, leakage included.
std::vector<double> device_ideal_output(const topology::CrossbarConfig& cfg,
                                        const devices::BitCellModel& model,
                                        const topology::BitMatrix& weights,
                                        const topology::BitVector& inputs,
                                        std::span<const double> cell_scale = {});

// Current of one cell under the nominal bias.
double nominal_cell_current(const topology::CrossbarConfig& cfg, const devices::CellElement& cell,
                            int input);

struct ColumnSolve {
    double current = 0.0;
    int iterations = 0;
    double max_residual = 0.0;
};

// Single gate-input column solved with a banded (half-bandwidth 2) LDL^T
// factorization. Node order: A, T, b0, s0, b1, s1, ..., U, K. Requires every
// parasitic resistance to be positive; buffers are reused between solves.
class LadderColumn {
  public:
    LadderColumn(int rows, double r_driver, double r_via, double r_seg, double r_sink, double v_bl);

    // False when the config is not gate-input or has a zero parasitic.
    static bool supported(const topology::CrossbarConfig& cfg);
    static LadderColumn for_config(const topology::CrossbarConfig& cfg);

    ColumnSolve solve(std::span<const devices::CellElement> cells, const SolverOptions& opts = {});

    int rows() const { return n_; }
    // Node voltages of the last solve, in ladder order.
    const std::vector<double>& voltages() const { return x_; }

  private:
    double residual(std::span<const devices::CellElement> cells, const std::vector<double>& x,
                    std::vector<double>& f, bool jacobian);
    void factor_solve(std::vector<double>& rhs);

    int n_;
    int size_;
    double g_d_, g_via_, g_seg_, g_s_, v_bl_;
    std::vector<double> x_, xt_, f_, ft_, dx_;
    std::vector<double> diag_, e1_, e2_;  // Jacobian: A[k][k], A[k][k-1], A[k][k-2]
    std::vector<double> d_, l1_, l2_;
};

}  // namespace xbar::solver
