#include "gridisle/power_flow.hpp"

#include <algorithm>
#include <cmath>

#include "gridisle/errors.hpp"

namespace gridisle {

using cplx = std::complex<double>;

Topology Topology::of(const GridCase& c) {
    Topology t;
    t.branch_live.resize(c.branches().size());
    for (std::size_t i = 0; i < c.branches().size(); ++i)
        t.branch_live[i] = c.branches()[i].in_service ? 1 : 0;
    return t;
}

bool Topology::live(const GridCase& c, int branch_pos) const {
    if (branch_live.empty()) return c.branches()[branch_pos].in_service;
    return branch_live[branch_pos] != 0;
}

AdmittanceMatrix build_ybus(const GridCase& c) { return build_ybus(c, Topology{}); }

AdmittanceMatrix build_ybus(const GridCase& c, const Topology& topo) {
    const int n = c.n_buses();
    AdmittanceMatrix m;
    m.y = Eigen::MatrixXcd::Zero(n, n);
    m.bus_ids.reserve(n);
    for (const Bus& b : c.buses()) m.bus_ids.push_back(b.id);

    for (std::size_t p = 0; p < c.branches().size(); ++p) {
        const Branch& br = c.branches()[p];
        if (!topo.live(c, static_cast<int>(p))) continue;
        if (br.r == 0.0 && br.x == 0.0)
            throw ValidationError("branch " + std::to_string(br.id) + ": zero impedance");
        const cplx ys = 1.0 / cplx(br.r, br.x);
        const cplx bc(0.0, br.b_ch / 2.0);
        const int f = c.bus_index(br.from), t = c.bus_index(br.to);
        m.y(f, f) += ys + bc;
        m.y(t, t) += ys + bc;
        m.y(f, t) -= ys;
        m.y(t, f) -= ys;
    }
    for (int i = 0; i < n; ++i) m.y(i, i) += cplx(c.buses()[i].g_sh, c.buses()[i].b_sh);
    for (const auto& [bus_id, y_extra] : topo.shunts) m.y(c.bus_index(bus_id), c.bus_index(bus_id)) += y_extra;
    return m;
}

namespace {

struct Spec {
    Eigen::VectorXd p, q;       // scheduled injections, pu
    std::vector<int> ang_idx;   // non-slack buses
    std::vector<int> pq_idx;
};

Spec make_spec(const GridCase& c) {
    const int n = c.n_buses();
    Spec s;
    s.p = Eigen::VectorXd::Zero(n);
    s.q = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        s.p(i) -= c.buses()[i].p_load;
        s.q(i) -= c.buses()[i].q_load;
        if (i != c.slack_index()) s.ang_idx.push_back(i);
        if (c.buses()[i].kind == BusKind::PQ) s.pq_idx.push_back(i);
    }
    for (const Generator& g : c.generators()) s.p(c.bus_index(g.bus)) += g.p_set;
    return s;
}

}  // namespace

PowerFlowSolution solve_power_flow(const GridCase& c, const PowerFlowOptions& opt) {
    return solve_power_flow(c, Topology{}, opt);
}

PowerFlowSolution solve_power_flow(const GridCase& c, const Topology& topo,
                                   const PowerFlowOptions& opt) {
    const int n = c.n_buses();
    const AdmittanceMatrix ybus = build_ybus(c, topo);
    const Eigen::MatrixXd G = ybus.y.real(), B = ybus.y.imag();
    const Spec spec = make_spec(c);

    PowerFlowSolution sol;
    sol.v_mag = Eigen::VectorXd::Ones(n);
    sol.v_ang = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        if (c.buses()[i].kind != BusKind::PQ) sol.v_mag(i) = c.buses()[i].v_mag;
    for (const Generator& g : c.generators()) sol.v_mag(c.bus_index(g.bus)) = g.v_set;

    const int na = static_cast<int>(spec.ang_idx.size());
    const int nq = static_cast<int>(spec.pq_idx.size());
    Eigen::VectorXd pcal(n), qcal(n);

    auto injections = [&] {
        for (int i = 0; i < n; ++i) {
            double pi = 0, qi = 0;
            for (int j = 0; j < n; ++j) {
                const double th = sol.v_ang(i) - sol.v_ang(j);
                const double vv = sol.v_mag(i) * sol.v_mag(j);
                pi += vv * (G(i, j) * std::cos(th) + B(i, j) * std::sin(th));
                qi += vv * (G(i, j) * std::sin(th) - B(i, j) * std::cos(th));
            }
            pcal(i) = pi;
            qcal(i) = qi;
        }
    };

    for (sol.iterations = 0; sol.iterations <= opt.max_iterations; ++sol.iterations) {
        injections();
        Eigen::VectorXd mism(na + nq);
        for (int r = 0; r < na; ++r) mism(r) = spec.p(spec.ang_idx[r]) - pcal(spec.ang_idx[r]);
        for (int r = 0; r < nq; ++r) mism(na + r) = spec.q(spec.pq_idx[r]) - qcal(spec.pq_idx[r]);
        sol.max_mismatch = (na + nq) ? mism.cwiseAbs().maxCoeff() : 0.0;
        if (sol.max_mismatch < opt.tolerance) {
            sol.converged = true;
            return sol;
        }
        if (sol.iterations == opt.max_iterations) break;

        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(na + nq, na + nq);
        for (int r = 0; r < na; ++r) {
            const int i = spec.ang_idx[r];
            for (int cidx = 0; cidx < na; ++cidx) {
                const int j = spec.ang_idx[cidx];
                if (i == j)
                    J(r, cidx) = -qcal(i) - B(i, i) * sol.v_mag(i) * sol.v_mag(i);
                else {
                    const double th = sol.v_ang(i) - sol.v_ang(j);
                    J(r, cidx) = sol.v_mag(i) * sol.v_mag(j) *
                                 (G(i, j) * std::sin(th) - B(i, j) * std::cos(th));
                }
            }
            for (int cidx = 0; cidx < nq; ++cidx) {
                const int j = spec.pq_idx[cidx];
                if (i == j)
                    J(r, na + cidx) = pcal(i) / sol.v_mag(i) + G(i, i) * sol.v_mag(i);
                else {
                    const double th = sol.v_ang(i) - sol.v_ang(j);
                    J(r, na + cidx) =
                        sol.v_mag(i) * (G(i, j) * std::cos(th) + B(i, j) * std::sin(th));
                }
            }
        }
        for (int r = 0; r < nq; ++r) {
            const int i = spec.pq_idx[r];
            for (int cidx = 0; cidx < na; ++cidx) {
                const int j = spec.ang_idx[cidx];
                if (i == j)
                    J(na + r, cidx) = pcal(i) - G(i, i) * sol.v_mag(i) * sol.v_mag(i);
                else {
                    const double th = sol.v_ang(i) - sol.v_ang(j);
                    J(na + r, cidx) = -sol.v_mag(i) * sol.v_mag(j) *
                                      (G(i, j) * std::cos(th) + B(i, j) * std::sin(th));
                }
            }
            for (int cidx = 0; cidx < nq; ++cidx) {
                const int j = spec.pq_idx[cidx];
                if (i == j)
                    J(na + r, na + cidx) = qcal(i) / sol.v_mag(i) - B(i, i) * sol.v_mag(i);
                else {
                    const double th = sol.v_ang(i) - sol.v_ang(j);
                    J(na + r, na + cidx) =
                        sol.v_mag(i) * (G(i, j) * std::sin(th) - B(i, j) * std::cos(th));
                }
            }
        }

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
        const Eigen::VectorXd dx = lu.solve(mism);
        if (!dx.allFinite()) throw NumericError("singular power-flow Jacobian");
        for (int r = 0; r < na; ++r) sol.v_ang(spec.ang_idx[r]) += dx(r);
        for (int r = 0; r < nq; ++r) sol.v_mag(spec.pq_idx[r]) += dx(na + r);
    }
    sol.converged = false;
    return sol;
}

std::vector<BranchFlow> branch_flows(const GridCase& c, const PowerFlowSolution& sol) {
    return branch_flows(c, sol, Topology{});
}

std::vector<BranchFlow> branch_flows(const GridCase& c, const PowerFlowSolution& sol,
                                     const Topology& topo) {
    std::vector<BranchFlow> out;
    out.reserve(c.branches().size());
    for (std::size_t p = 0; p < c.branches().size(); ++p) {
        const Branch& br = c.branches()[p];
        BranchFlow f;
        f.branch_id = br.id;
        if (topo.live(c, static_cast<int>(p))) {
            const int i = c.bus_index(br.from), j = c.bus_index(br.to);
            const cplx vi = std::polar(sol.v_mag(i), sol.v_ang(i));
            const cplx vj = std::polar(sol.v_mag(j), sol.v_ang(j));
            const cplx ys = 1.0 / cplx(br.r, br.x);
            const cplx bc(0.0, br.b_ch / 2.0);
            const cplx sf = vi * std::conj((vi - vj) * ys + vi * bc);
            const cplx st = vj * std::conj((vj - vi) * ys + vj * bc);
            f.p_from = sf.real();
            f.q_from = sf.imag();
            f.s_from = std::abs(sf);
            f.p_to = st.real();
            f.q_to = st.imag();
            f.s_to = std::abs(st);
        }
        out.push_back(f);
    }
    return out;
}

SMatrix apparent_power_matrix(const GridCase& c, const std::vector<BranchFlow>& flows) {
    const int n = c.n_buses();
    SMatrix m;
    m.s = Eigen::MatrixXd::Zero(n, n);
    for (const Bus& b : c.buses()) m.bus_ids.push_back(b.id);
    for (const BranchFlow& f : flows) {
        const Branch& br = c.branch(f.branch_id);
        const int i = c.bus_index(br.from), j = c.bus_index(br.to);
        const double w = std::max(f.s_from, f.s_to);
        m.s(i, j) += w;
        m.s(j, i) += w;
    }
    return m;
}

SMatrix complete_smatrix(const SMatrix& given, const GridCase& c, const Topology& topo) {
    const PowerFlowSolution sol = solve_power_flow(c, topo);
    if (!sol.converged)
        throw NumericError("power flow for apparent-power matrix completion did not converge");
    const SMatrix computed = apparent_power_matrix(c, branch_flows(c, sol, topo));
    const double given_to_kva = given.unit == SUnit::PerUnit ? c.base_mva() * 1000.0 : 1.0;
    const double comp_to_kva = c.base_mva() * 1000.0;
    SMatrix merged;
    merged.bus_ids = given.bus_ids;
    merged.unit = SUnit::KiloVoltAmpere;
    merged.s = given.s * given_to_kva;
    for (int i = 0; i < merged.s.rows(); ++i)
        for (int j = 0; j < merged.s.cols(); ++j)
            if (merged.s(i, j) == 0.0) merged.s(i, j) = computed.s(i, j) * comp_to_kva;
    return merged;
}

Eigen::MatrixXcd eliminate_nodes(const Eigen::MatrixXcd& y, const std::vector<int>& keep) {
    const int n = static_cast<int>(y.rows());
    std::vector<char> keep_mask(n, 0);
    for (int k : keep) keep_mask[k] = 1;
    std::vector<int> drop;
    for (int i = 0; i < n; ++i)
        if (!keep_mask[i]) drop.push_back(i);
    const int nk = static_cast<int>(keep.size()), nd = static_cast<int>(drop.size());
    if (nd == 0) {
        Eigen::MatrixXcd out(nk, nk);
        for (int i = 0; i < nk; ++i)
            for (int j = 0; j < nk; ++j) out(i, j) = y(keep[i], keep[j]);
        return out;
    }
    Eigen::MatrixXcd ykk(nk, nk), ykd(nk, nd), ydk(nd, nk), ydd(nd, nd);
    for (int i = 0; i < nk; ++i)
        for (int j = 0; j < nk; ++j) ykk(i, j) = y(keep[i], keep[j]);
    for (int i = 0; i < nk; ++i)
        for (int j = 0; j < nd; ++j) ykd(i, j) = y(keep[i], drop[j]);
    for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nk; ++j) ydk(i, j) = y(drop[i], keep[j]);
    for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) ydd(i, j) = y(drop[i], drop[j]);

    Eigen::FullPivLU<Eigen::MatrixXcd> lu(ydd);
    if (!lu.isInvertible())
        throw NumericError("Kron reduction: eliminated subnetwork is singular");
    return ykk - ykd * lu.solve(ydk);
}

ReducedNetwork kron_reduce(const GridCase& c, const PowerFlowSolution& sol) {
    return kron_reduce(c, sol, Topology{});
}

ReducedNetwork kron_reduce(const GridCase& c, const PowerFlowSolution& sol,
                           const Topology& topo) {
    const int n = c.n_buses();
    const int m = static_cast<int>(c.generators().size());
    AdmittanceMatrix ybus = build_ybus(c, topo);

    // Loads to constant shunts at the operating-point voltage.
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n + m, n + m);
    y.topLeftCorner(n, n) = ybus.y;
    for (int i = 0; i < n; ++i) {
        const Bus& b = c.buses()[i];
        if (b.p_load != 0.0 || b.q_load != 0.0) {
            const double v2 = sol.v_mag(i) * sol.v_mag(i);
            y(i, i) += cplx(b.p_load, -b.q_load) / v2;
        }
    }

    ReducedNetwork red;
    red.emf = Eigen::VectorXd::Zero(m);
    red.delta = Eigen::VectorXd::Zero(m);
    for (int g = 0; g < m; ++g) {
        const Generator& gen = c.generators()[g];
        red.labels.push_back(gen.label);
        const int t = c.bus_index(gen.bus);
        const cplx yg = 1.0 / cplx(0.0, c.gen_xdp_sys(g));
        y(n + g, n + g) += yg;
        y(t, t) += yg;
        y(n + g, t) -= yg;
        y(t, n + g) -= yg;

        // Internal EMF from the terminal conditions: E = V + j xd' I.
        const cplx vt = std::polar(sol.v_mag(t), sol.v_ang(t));
        // Net generator injection at its terminal = bus injection + local load.
        cplx s_inj = 0.0;
        {
            const Eigen::VectorXcd vall =
                sol.v_mag.array() * (sol.v_ang.array().cos() + cplx(0, 1) * sol.v_ang.array().sin());
            cplx i_inj = 0.0;
            for (int j = 0; j < n; ++j) i_inj += ybus.y(t, j) * vall(j);
            s_inj = vt * std::conj(i_inj);
        }
        const cplx s_gen = s_inj + cplx(c.buses()[t].p_load, c.buses()[t].q_load);
        const cplx i_gen = std::conj(s_gen) / std::conj(vt);
        const cplx e = vt + cplx(0.0, c.gen_xdp_sys(g)) * i_gen;
        red.emf(g) = std::abs(e);
        red.delta(g) = std::arg(e);
    }

    std::vector<int> keep;
    for (int g = 0; g < m; ++g) keep.push_back(n + g);
    red.y = eliminate_nodes(y, keep);
    return red;
}

}  // namespace gridisle
