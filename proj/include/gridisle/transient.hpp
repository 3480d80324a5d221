#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "gridisle/grid_model.hpp"
#include "gridisle/power_flow.hpp"

namespace gridisle {

struct MachineState {
    Eigen::VectorXd delta;  // rad
    Eigen::VectorXd omega;  // rad/s deviation from synchronous
};

// Classical-model swing system over a reduced network; the integrator works
// on this directly so tests can drive hand-built networks.
struct SwingSystem {
    Eigen::MatrixXcd y;      // reduced admittance over internal nodes
    Eigen::VectorXd emf;     // |E'|, constant
    Eigen::VectorXd p_mech;  // constant
    Eigen::VectorXd h;       // s, system base
    Eigen::VectorXd damping;
    double omega_s = 2.0 * 3.14159265358979323846 * 60.0;

    Eigen::VectorXd electrical_power(const Eigen::VectorXd& delta) const;
    MachineState rk4_step(const MachineState& s, double dt) const;
};

struct SimConfig {
    double dt = 1e-3;          // s
    double horizon = 8.0;      // s
    double f0 = 60.0;          // Hz
    double fault_shunt = 1e6;  // pu admittance magnitude at the faulted end
};

struct Trajectories {
    std::vector<double> t;
    std::vector<MachineState> states;
    std::vector<double> max_spread;            // per step: max within-island |delta_i - delta_j|
    std::vector<Event> applied;                // events actually applied
    std::vector<std::string> labels;
    double dt = 0.0;

    std::size_t nearest_index(double time) const;
};

struct SyncLossReport {
    bool unstable = false;
    std::optional<double> t_loss;
};

Trajectories simulate(const GridCase& c, const EventSchedule& events, const SimConfig& cfg = {});

struct Snapshot {
    MachineState state;
    ReducedNetwork reduced;   // topology active at the snapshot, EMFs constant, delta at t
    SMatrix smatrix;          // bus-level apparent flows from the algebraic solution (pu)
    Topology topology;
    double t = 0.0;
};

Snapshot snapshot_at(const GridCase& c, const EventSchedule& events, const Trajectories& traj,
                     double t, const SimConfig& cfg = {});

SyncLossReport detect_loss_of_sync(const Trajectories& traj, double threshold_rad);

// Topology after all events with time <= t (fault shunts active only inside
// their fault window).
Topology topology_at(const GridCase& c, const EventSchedule& events, double t,
                     const SimConfig& cfg = {});

// Bus voltages given machine internal EMFs, loads as constant impedances from
// the base solution.
Eigen::VectorXcd network_voltages(const GridCase& c, const PowerFlowSolution& base,
                                  const Topology& topo, const Eigen::VectorXcd& internal_emf);

}  // namespace gridisle
