#include "gridisle/transient.hpp"

#include <algorithm>
#include <cmath>

#include "gridisle/errors.hpp"

namespace gridisle {

using cplx = std::complex<double>;

Eigen::VectorXd SwingSystem::electrical_power(const Eigen::VectorXd& delta) const {
    const int m = static_cast<int>(emf.size());
    Eigen::VectorXd pe = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
        double p = emf(i) * emf(i) * y(i, i).real();
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            const double th = delta(i) - delta(j);
            p += emf(i) * emf(j) *
                 (y(i, j).real() * std::cos(th) + y(i, j).imag() * std::sin(th));
        }
        pe(i) = p;
    }
    return pe;
}

MachineState SwingSystem::rk4_step(const MachineState& s, double dt) const {
    auto accel = [&](const Eigen::VectorXd& delta, const Eigen::VectorXd& omega) {
        const Eigen::VectorXd pe = electrical_power(delta);
        Eigen::VectorXd a(delta.size());
        for (int i = 0; i < delta.size(); ++i)
            a(i) = omega_s / (2.0 * h(i)) *
                   (p_mech(i) - pe(i) - damping(i) * omega(i) / omega_s);
        return a;
    };
    const Eigen::VectorXd k1d = s.omega, k1w = accel(s.delta, s.omega);
    const Eigen::VectorXd k2d = s.omega + 0.5 * dt * k1w,
                          k2w = accel(s.delta + 0.5 * dt * k1d, s.omega + 0.5 * dt * k1w);
    const Eigen::VectorXd k3d = s.omega + 0.5 * dt * k2w,
                          k3w = accel(s.delta + 0.5 * dt * k2d, s.omega + 0.5 * dt * k2w);
    const Eigen::VectorXd k4d = s.omega + dt * k3w,
                          k4w = accel(s.delta + dt * k3d, s.omega + dt * k3w);
    MachineState out;
    out.delta = s.delta + dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d);
    out.omega = s.omega + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
    return out;
}

std::size_t Trajectories::nearest_index(double time) const {
    if (t.empty()) throw ValidationError("empty trajectory");
    const auto it = std::lower_bound(t.begin(), t.end(), time);
    if (it == t.begin()) return 0;
    if (it == t.end()) return t.size() - 1;
    const std::size_t hi = it - t.begin();
    return (time - t[hi - 1] <= t[hi] - time) ? hi - 1 : hi;
}

namespace {

// Generator islands under the current topology: indices of generators whose
// buses share a connected component.
std::vector<std::vector<int>> generator_islands(const GridCase& c, const Topology& topo) {
    const int n = c.n_buses();
    std::vector<std::vector<int>> adj(n);
    for (std::size_t p = 0; p < c.branches().size(); ++p) {
        if (!topo.live(c, static_cast<int>(p))) continue;
        const Branch& br = c.branches()[p];
        adj[c.bus_index(br.from)].push_back(c.bus_index(br.to));
        adj[c.bus_index(br.to)].push_back(c.bus_index(br.from));
    }
    std::vector<int> comp(n, -1);
    int nc = 0;
    for (int s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<int> stack{s};
        comp[s] = nc;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v : adj[u])
                if (comp[v] < 0) {
                    comp[v] = nc;
                    stack.push_back(v);
                }
        }
        ++nc;
    }
    std::vector<std::vector<int>> islands(nc);
    for (std::size_t g = 0; g < c.generators().size(); ++g)
        islands[comp[c.bus_index(c.generators()[g].bus)]].push_back(static_cast<int>(g));
    std::vector<std::vector<int>> out;
    for (auto& isl : islands)
        if (!isl.empty()) out.push_back(std::move(isl));
    return out;
}

double island_spread(const Eigen::VectorXd& delta, const std::vector<std::vector<int>>& islands) {
    double spread = 0.0;
    for (const auto& isl : islands)
        for (std::size_t i = 0; i < isl.size(); ++i)
            for (std::size_t j = i + 1; j < isl.size(); ++j)
                spread = std::max(spread, std::abs(delta(isl[i]) - delta(isl[j])));
    return spread;
}

SwingSystem make_swing(const GridCase& c, const PowerFlowSolution& base, const Topology& topo,
                       const Eigen::VectorXd& emf, const Eigen::VectorXd& p_mech, double f0) {
    SwingSystem sys;
    const ReducedNetwork red = kron_reduce(c, base, topo);
    sys.y = red.y;
    sys.emf = emf;
    sys.p_mech = p_mech;
    sys.omega_s = 2.0 * 3.14159265358979323846 * f0;
    const int m = static_cast<int>(c.generators().size());
    sys.h.resize(m);
    sys.damping.resize(m);
    for (int g = 0; g < m; ++g) {
        sys.h(g) = c.gen_h_sys(g);
        sys.damping(g) = c.generators()[g].d * c.generators()[g].mva / c.base_mva();
    }
    return sys;
}

}  // namespace

Topology topology_at(const GridCase& c, const EventSchedule& events, double t,
                     const SimConfig& cfg) {
    Topology topo = Topology::of(c);
    for (const Event& e : events.events) {
        if (e.t > t) break;
        const int p = c.branch_index(e.branch);
        switch (e.kind) {
            case EventKind::FaultOnLine:
                topo.shunts.emplace_back(c.branches()[p].from, cplx(cfg.fault_shunt, 0.0));
                break;
            case EventKind::ClearAndOpenLine: {
                const int from = c.branches()[p].from;
                auto it = std::find_if(topo.shunts.begin(), topo.shunts.end(),
                                       [&](const auto& s) { return s.first == from; });
                if (it != topo.shunts.end()) topo.shunts.erase(it);
                topo.branch_live[p] = 0;
                break;
            }
            case EventKind::OpenLine:
                topo.branch_live[p] = 0;
                break;
        }
    }
    return topo;
}

Trajectories simulate(const GridCase& c, const EventSchedule& events, const SimConfig& cfg) {
    if (cfg.dt <= 0 || cfg.dt > 5e-3) throw ValidationError("dt must be in (0, 5ms]");
    if (!events.events.empty() && cfg.horizon < events.last_time())
        throw ValidationError("horizon ends before the last event");
    for (const Event& e : events.events)
        if (!c.branches()[c.branch_index(e.branch)].in_service)
            throw ValidationError("event references out-of-service branch " +
                                  std::to_string(e.branch));

    const PowerFlowSolution base = solve_power_flow(c);
    if (!base.converged) throw NumericError("pre-fault power flow did not converge");

    const ReducedNetwork red0 = kron_reduce(c, base);
    const int m = static_cast<int>(c.generators().size());

    Trajectories traj;
    traj.dt = cfg.dt;
    traj.labels = red0.labels;

    MachineState state;
    state.delta = red0.delta;
    state.omega = Eigen::VectorXd::Zero(m);

    // Mechanical power balances the initial electrical power exactly, so the
    // no-event run is a fixpoint.
    SwingSystem sys = make_swing(c, base, Topology::of(c), red0.emf, Eigen::VectorXd::Zero(m),
                                 cfg.f0);
    sys.p_mech = sys.electrical_power(state.delta);
    const Eigen::VectorXd p_mech = sys.p_mech;

    auto islands = generator_islands(c, Topology::of(c));

    const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
    std::size_t next_event = 0;
    for (std::size_t step = 0; step <= steps; ++step) {
        const double t = step * cfg.dt;
        // Apply events due at or before this grid point.
        bool topo_changed = false;
        while (next_event < events.events.size() &&
               events.events[next_event].t <= t + cfg.dt * 0.5) {
            traj.applied.push_back(events.events[next_event]);
            ++next_event;
            topo_changed = true;
        }
        if (topo_changed) {
            const Topology topo = topology_at(c, events, t + cfg.dt * 0.5, cfg);
            sys = make_swing(c, base, topo, red0.emf, p_mech, cfg.f0);
            islands = generator_islands(c, topo);
        }
        traj.t.push_back(t);
        traj.states.push_back(state);
        traj.max_spread.push_back(island_spread(state.delta, islands));
        if (step < steps) state = sys.rk4_step(state, cfg.dt);
    }
    return traj;
}

Eigen::VectorXcd network_voltages(const GridCase& c, const PowerFlowSolution& base,
                                  const Topology& topo, const Eigen::VectorXcd& internal_emf) {
    const int n = c.n_buses();
    const int m = static_cast<int>(c.generators().size());
    const AdmittanceMatrix ybus = build_ybus(c, topo);

    Eigen::MatrixXcd ybb = ybus.y;
    Eigen::MatrixXcd ybg = Eigen::MatrixXcd::Zero(n, m);
    for (int i = 0; i < n; ++i) {
        const Bus& b = c.buses()[i];
        if (b.p_load != 0.0 || b.q_load != 0.0) {
            const double v2 = base.v_mag(i) * base.v_mag(i);
            ybb(i, i) += cplx(b.p_load, -b.q_load) / v2;
        }
    }
    for (int g = 0; g < m; ++g) {
        const int t = c.bus_index(c.generators()[g].bus);
        const cplx yg = 1.0 / cplx(0.0, c.gen_xdp_sys(g));
        ybb(t, t) += yg;
        ybg(t, g) = -yg;
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(ybb);
    if (!lu.isInvertible()) throw NumericError("network solution singular");
    return lu.solve((-ybg * internal_emf).eval());
}

Snapshot snapshot_at(const GridCase& c, const EventSchedule& events, const Trajectories& traj,
                     double t, const SimConfig& cfg) {
    if (traj.t.empty()) throw ValidationError("empty trajectory");
    if (t < traj.t.front() - 1e-9 || t > traj.t.back() + 1e-9)
        throw ValidationError("snapshot time outside horizon");
    const std::size_t idx = traj.nearest_index(t);

    Snapshot snap;
    snap.t = traj.t[idx];
    snap.state = traj.states[idx];
    snap.topology = topology_at(c, events, snap.t + traj.dt * 0.5, cfg);

    const PowerFlowSolution base = solve_power_flow(c);
    if (!base.converged) throw NumericError("base power flow did not converge");
    const ReducedNetwork red0 = kron_reduce(c, base);

    snap.reduced = kron_reduce(c, base, snap.topology);
    snap.reduced.emf = red0.emf;
    snap.reduced.delta = snap.state.delta;

    const int m = static_cast<int>(c.generators().size());
    Eigen::VectorXcd eg(m);
    for (int g = 0; g < m; ++g) eg(g) = std::polar(red0.emf(g), snap.state.delta(g));
    const Eigen::VectorXcd v = network_voltages(c, base, snap.topology, eg);

    // Branch flows from the algebraic bus voltages.
    std::vector<BranchFlow> flows;
    for (std::size_t p = 0; p < c.branches().size(); ++p) {
        const Branch& br = c.branches()[p];
        BranchFlow f;
        f.branch_id = br.id;
        if (snap.topology.live(c, static_cast<int>(p))) {
            const int i = c.bus_index(br.from), j = c.bus_index(br.to);
            const cplx ys = 1.0 / cplx(br.r, br.x);
            const cplx bc(0.0, br.b_ch / 2.0);
            const cplx sf = v(i) * std::conj((v(i) - v(j)) * ys + v(i) * bc);
            const cplx st = v(j) * std::conj((v(j) - v(i)) * ys + v(j) * bc);
            f.p_from = sf.real();
            f.q_from = sf.imag();
            f.s_from = std::abs(sf);
            f.p_to = st.real();
            f.q_to = st.imag();
            f.s_to = std::abs(st);
        }
        flows.push_back(f);
    }
    snap.smatrix = apparent_power_matrix(c, flows);
    return snap;
}

SyncLossReport detect_loss_of_sync(const Trajectories& traj, double threshold_rad) {
    SyncLossReport rep;
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        if (traj.max_spread[i] > threshold_rad) {
            rep.unstable = true;
            rep.t_loss = traj.t[i];
            return rep;
        }
    }
    return rep;
}

}  // namespace gridisle
