#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "gridisle/grid_model.hpp"

namespace gridisle {

// Per-branch service overrides and extra bus shunts; describes the network
// state at one instant of a transient run.
struct Topology {
    std::vector<char> branch_live;                            // by branch position; empty = as-filed
    std::vector<std::pair<int, std::complex<double>>> shunts;  // (bus id, extra admittance)

    static Topology of(const GridCase& c);
    bool live(const GridCase& c, int branch_pos) const;
};

struct AdmittanceMatrix {
    Eigen::MatrixXcd y;         // indexed like GridCase bus order
    std::vector<int> bus_ids;
};

AdmittanceMatrix build_ybus(const GridCase& c);
AdmittanceMatrix build_ybus(const GridCase& c, const Topology& topo);

struct PowerFlowSolution {
    Eigen::VectorXd v_mag;  // pu
    Eigen::VectorXd v_ang;  // rad
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;  // pu
};

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 50;
};

// Full Newton-Raphson in polar form, flat start.
PowerFlowSolution solve_power_flow(const GridCase& c, const PowerFlowOptions& opt = {});
PowerFlowSolution solve_power_flow(const GridCase& c, const Topology& topo,
                                   const PowerFlowOptions& opt = {});

struct BranchFlow {
    int branch_id = 0;
    double p_from = 0, q_from = 0, s_from = 0;  // pu
    double p_to = 0, q_to = 0, s_to = 0;
};

std::vector<BranchFlow> branch_flows(const GridCase& c, const PowerFlowSolution& sol);
std::vector<BranchFlow> branch_flows(const GridCase& c, const PowerFlowSolution& sol,
                                     const Topology& topo);

enum class SUnit { PerUnit, KiloVoltAmpere };

struct SMatrix {
    Eigen::MatrixXd s;          // symmetric, nonnegative
    std::vector<int> bus_ids;
    SUnit unit = SUnit::PerUnit;
};

// Entry (i,j) = sum over branches joining i,j of max(s_from, s_to).
SMatrix apparent_power_matrix(const GridCase& c, const std::vector<BranchFlow>& flows);

// Completes a partial measured matrix: zero entries take the engine's own
// power-flow value, nonzero entries are kept verbatim. Result in kVA.
SMatrix complete_smatrix(const SMatrix& given, const GridCase& c, const Topology& topo = {});

struct ReducedNetwork {
    Eigen::MatrixXcd y;               // m x m over generator internal nodes
    std::vector<std::string> labels;  // generator order as in the case
    Eigen::VectorXd emf;              // |E'| pu
    Eigen::VectorXd delta;            // rad
};

// Constant-impedance load conversion at the given operating point, generator
// transient reactances to internal nodes, then elimination of all bus nodes.
ReducedNetwork kron_reduce(const GridCase& c, const PowerFlowSolution& sol);
ReducedNetwork kron_reduce(const GridCase& c, const PowerFlowSolution& sol, const Topology& topo);

// Y_red for an arbitrary set of retained node indices; exposed for the
// composability property.
Eigen::MatrixXcd eliminate_nodes(const Eigen::MatrixXcd& y, const std::vector<int>& keep);

}  // namespace gridisle
