#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gridisle/errors.hpp"
#include "gridisle/grid_model.hpp"
#include "gridisle/power_flow.hpp"
#include "gridisle/transient.hpp"

using namespace gridisle;
using cplx = std::complex<double>;

namespace {

const std::string kData = GRIDISLE_DATA_DIR;
constexpr double kPi = std::numbers::pi;

// Single machine against a stiff equivalent through two parallel lines.
GridCase smib_case() {
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0, 0},
                           {2, BusKind::PV, 1.0, 0, 0, 0, 0, 0}};
    std::vector<Branch> branches{{1, 2, 1, 0.0, 0.4, 0.0, true},
                                 {2, 2, 1, 0.0, 0.4, 0.0, true}};
    std::vector<Generator> gens{{"INF", 1, 0.0, 1.0, 1e6, 0.0, 1e-4, 100.0},
                                {"GEN", 2, 0.8, 1.0, 3.5, 0.0, 0.3, 100.0}};
    return GridCase(100.0, buses, branches, gens);
}

SwingSystem two_machine_system(double b_coupling, double pm1, double h1 = 3.0,
                               double h2 = 3.0) {
    SwingSystem sys;
    sys.y = Eigen::MatrixXcd::Zero(2, 2);
    sys.y(0, 0) = cplx(0, -b_coupling);
    sys.y(1, 1) = cplx(0, -b_coupling);
    sys.y(0, 1) = sys.y(1, 0) = cplx(0, b_coupling);
    sys.emf = Eigen::VectorXd::Ones(2);
    sys.p_mech = Eigen::VectorXd::Zero(2);
    sys.p_mech << pm1, -pm1;
    sys.h = Eigen::VectorXd::Zero(2);
    sys.h << h1, h2;
    sys.damping = Eigen::VectorXd::Zero(2);
    return sys;
}

}  // namespace

TEST_CASE("simulate: equilibrium is a fixpoint over the full horizon") {
    const GridCase c = load_case(kData + "/ieee39");
    SimConfig cfg;
    cfg.horizon = 8.0;
    cfg.dt = 2e-3;
    const Trajectories traj = simulate(c, EventSchedule{}, cfg);
    const Eigen::VectorXd d0 = traj.states.front().delta;
    double drift = 0.0;
    for (const MachineState& s : traj.states)
        drift = std::max(drift, (s.delta - d0).cwiseAbs().maxCoeff());
    CHECK(drift < 1e-6);
}

TEST_CASE("simulate: case I schedule runs the full horizon with all events applied") {
    const GridCase c = load_case(kData + "/ieee39");
    const EventSchedule ev = load_events(kData + "/ieee39/events_case1.csv", c);
    SimConfig cfg;
    cfg.horizon = 8.0;
    const Trajectories traj = simulate(c, ev, cfg);
    CHECK(traj.t.back() == doctest::Approx(8.0));
    REQUIRE(traj.applied.size() == 4);
    CHECK(traj.applied[0].t == doctest::Approx(2.0));
    CHECK(traj.applied[3].t == doctest::Approx(3.4));
}

TEST_CASE("simulate: dt bounds and horizon checks") {
    const GridCase c = load_case(kData + "/ieee39");
    const EventSchedule ev = load_events(kData + "/ieee39/events_case1.csv", c);
    SimConfig cfg;
    cfg.dt = 0.01;  // above the 5 ms cap
    CHECK_THROWS_AS(simulate(c, ev, cfg), ValidationError);
    cfg.dt = 1e-3;
    cfg.horizon = 2.0;  // before the last event
    CHECK_THROWS_AS(simulate(c, ev, cfg), ValidationError);
}

TEST_CASE("swing system: two uncoupled machines separate on the closed-form schedule") {
    SwingSystem sys = two_machine_system(0.0, 0.0);
    sys.p_mech << 0.5, -0.3;
    // delta_12(t) = 0.5 * (a1 - a2) t^2 with a_i = omega_s * Pm_i / (2 H_i)
    const double a1 = sys.omega_s * 0.5 / (2 * 3.0);
    const double a2 = sys.omega_s * -0.3 / (2 * 3.0);
    const double t_pi = std::sqrt(2 * kPi / (a1 - a2));

    MachineState s;
    s.delta = Eigen::VectorXd::Zero(2);
    s.omega = Eigen::VectorXd::Zero(2);
    const double dt = 1e-3;
    double t = 0.0;
    while (std::abs(s.delta(0) - s.delta(1)) < kPi) {
        s = sys.rk4_step(s, dt);
        t += dt;
        REQUIRE(t < 5.0);
    }
    CHECK(t == doctest::Approx(t_pi).epsilon(2e-3));
}

TEST_CASE("swing system: lossless two-machine energy stays constant") {
    const double b = 2.0;
    SwingSystem sys = two_machine_system(b, 0.0);
    MachineState s;
    s.delta = Eigen::VectorXd::Zero(2);
    s.delta << 0.4, -0.4;  // displaced from equilibrium, Pm = 0
    s.omega = Eigen::VectorXd::Zero(2);

    auto energy = [&](const MachineState& st) {
        const double m1 = 2 * sys.h(0) / sys.omega_s, m2 = 2 * sys.h(1) / sys.omega_s;
        const double kinetic = 0.5 * m1 * st.omega(0) * st.omega(0) +
                               0.5 * m2 * st.omega(1) * st.omega(1);
        const double potential = -b * std::cos(st.delta(0) - st.delta(1));
        return kinetic + potential;
    };
    const double e0 = energy(s);
    double max_drift = 0.0;
    const double dt = 1e-3;
    for (int i = 0; i < 8000; ++i) {
        s = sys.rk4_step(s, dt);
        max_drift = std::max(max_drift, std::abs(energy(s) - e0));
    }
    CHECK(max_drift / std::abs(e0) < 1e-3);
}

TEST_CASE("swing system: mirrored machines stay mirrored") {
    SwingSystem sys = two_machine_system(1.5, 0.2);
    MachineState s;
    s.delta = Eigen::VectorXd::Zero(2);
    s.omega = Eigen::VectorXd::Zero(2);
    double worst = 0.0;
    for (int i = 0; i < 4000; ++i) {
        s = sys.rk4_step(s, 1e-3);
        worst = std::max(worst, std::abs(s.delta(0) + s.delta(1)));
        worst = std::max(worst, std::abs(s.omega(0) + s.omega(1)));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("swing system: angle increments bounded by observed speeds") {
    SwingSystem sys = two_machine_system(1.5, 0.3);
    MachineState s;
    s.delta = Eigen::VectorXd::Zero(2);
    s.omega = Eigen::VectorXd::Zero(2);
    const double dt = 1e-3;
    // Worst acceleration over any stage: omega_s/(2H) * (|Pm| + |E|^2 B).
    const double accel_max = sys.omega_s / (2.0 * sys.h.minCoeff()) * (0.3 + 1.5);
    for (int i = 0; i < 2000; ++i) {
        const MachineState nxt = sys.rk4_step(s, dt);
        const double omega_max =
            std::max(s.omega.cwiseAbs().maxCoeff(), nxt.omega.cwiseAbs().maxCoeff());
        CHECK((nxt.delta - s.delta).cwiseAbs().maxCoeff() <=
              omega_max * dt + accel_max * dt * dt + 1e-12);
        s = nxt;
    }
}

TEST_CASE("simulate: critical clearing time matches the equal-area value within 5%") {
    const GridCase c = smib_case();
    const PowerFlowSolution pf = solve_power_flow(c);
    REQUIRE(pf.converged);

    // Equal-area inputs from the engine's own reduced networks: pre-fault
    // (both lines) and post-fault (one line opened).
    const ReducedNetwork pre = kron_reduce(c, pf);
    Topology post_topo = Topology::of(c);
    post_topo.branch_live[1] = 0;
    const ReducedNetwork post = kron_reduce(c, pf, post_topo);
    const double pmax_pre = pre.emf(0) * pre.emf(1) * std::abs(pre.y(0, 1).imag());
    const double pmax_post = post.emf(0) * post.emf(1) * std::abs(post.y(0, 1).imag());

    // Pm of the machine at equilibrium equals its electrical output.
    const double pm = pmax_pre * std::sin(pre.delta(1) - pre.delta(0));
    const double d0 = pre.delta(1) - pre.delta(0);
    const double dmax = kPi - std::asin(pm / pmax_post);
    const double dcr =
        std::acos((pm * (dmax - d0) + pmax_post * std::cos(dmax)) / pmax_post);
    const double h = 3.5;
    const double omega_s = 2 * kPi * 60.0;
    const double t_eac = std::sqrt(4.0 * h * (dcr - d0) / (omega_s * pm));

    // Bisection on the simulator: stable vs unstable clearing time.
    auto stable_with_clearing = [&](double t_clear) {
        EventSchedule ev;
        ev.events.push_back({0.2, EventKind::FaultOnLine, 2});
        ev.events.push_back({0.2 + t_clear, EventKind::ClearAndOpenLine, 2});
        SimConfig cfg;
        cfg.dt = 5e-4;
        cfg.horizon = 3.0;
        const Trajectories traj = simulate(c, ev, cfg);
        return !detect_loss_of_sync(traj, kPi).unstable;
    };
    double lo = 0.01, hi = 1.0;
    REQUIRE(stable_with_clearing(lo));
    REQUIRE_FALSE(stable_with_clearing(hi));
    while (hi - lo > 2e-3) {
        const double mid = (lo + hi) / 2;
        (stable_with_clearing(mid) ? lo : hi) = mid;
    }
    const double t_sim = (lo + hi) / 2;
    CHECK(std::abs(t_sim - t_eac) / t_eac < 0.05);
    MESSAGE("EAC ", t_eac, " s vs simulated ", t_sim, " s");
}

TEST_CASE("simulate: halving dt changes final angles below 1e-4 rad") {
    const GridCase c = smib_case();
    EventSchedule ev;
    ev.events.push_back({0.2, EventKind::FaultOnLine, 2});
    ev.events.push_back({0.4, EventKind::ClearAndOpenLine, 2});
    SimConfig cfg;
    cfg.horizon = 2.0;
    cfg.dt = 1e-3;
    const Trajectories a = simulate(c, ev, cfg);
    cfg.dt = 5e-4;
    const Trajectories b = simulate(c, ev, cfg);
    CHECK((a.states.back().delta - b.states.back().delta).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("snapshot: t = 0 on an unfaulted case matches the static quantities") {
    const GridCase c = load_case(kData + "/ieee39");
    SimConfig cfg;
    cfg.horizon = 0.1;
    const Trajectories traj = simulate(c, EventSchedule{}, cfg);
    const Snapshot snap = snapshot_at(c, EventSchedule{}, traj, 0.0, cfg);

    const PowerFlowSolution pf = solve_power_flow(c);
    const ReducedNetwork red = kron_reduce(c, pf);
    CHECK((snap.reduced.delta - red.delta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((snap.reduced.emf - red.emf).cwiseAbs().maxCoeff() < 1e-12);

    const SMatrix stat = apparent_power_matrix(c, branch_flows(c, pf));
    CHECK((snap.smatrix.s - stat.s).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("snapshot: nearest grid point is chosen and bounds are checked") {
    const GridCase c = load_case(kData + "/ieee39");
    SimConfig cfg;
    cfg.horizon = 0.1;
    cfg.dt = 1e-3;
    const Trajectories traj = simulate(c, EventSchedule{}, cfg);
    const Snapshot s = snapshot_at(c, EventSchedule{}, traj, 0.0433, cfg);
    CHECK(s.t == doctest::Approx(0.043));
    CHECK_THROWS_AS(snapshot_at(c, EventSchedule{}, traj, 0.5, cfg), ValidationError);
}

TEST_CASE("detect_loss_of_sync: equilibrium trajectory is stable") {
    const GridCase c = load_case(kData + "/ieee39");
    SimConfig cfg;
    cfg.horizon = 1.0;
    const Trajectories traj = simulate(c, EventSchedule{}, cfg);
    const SyncLossReport rep = detect_loss_of_sync(traj, kPi);
    CHECK_FALSE(rep.unstable);
    CHECK_FALSE(rep.t_loss.has_value());
}

TEST_CASE("detect_loss_of_sync: zero threshold trips on the first spread") {
    const GridCase c = load_case(kData + "/ieee39");
    SimConfig cfg;
    cfg.horizon = 0.05;
    const Trajectories traj = simulate(c, EventSchedule{}, cfg);
    const SyncLossReport rep = detect_loss_of_sync(traj, 0.0);
    REQUIRE(rep.unstable);
    CHECK(*rep.t_loss == doctest::Approx(0.0));  // equilibrium angles already differ
}
