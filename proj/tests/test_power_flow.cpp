#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "gridisle/csv.hpp"
#include "gridisle/errors.hpp"
#include "gridisle/grid_model.hpp"
#include "gridisle/power_flow.hpp"

using namespace gridisle;
using cplx = std::complex<double>;

namespace {

const std::string kData = GRIDISLE_DATA_DIR;

GridCase two_bus_case() {
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0, 0},
                           {2, BusKind::PQ, 1.0, 0, 0.5, 0.0, 0, 0}};
    std::vector<Branch> branches{{1, 1, 2, 0.0, 0.1, 0.0, true}};
    std::vector<Generator> gens{{"G1", 1, 0.0, 1.0, 5.0, 0.0, 0.1, 100.0}};
    return GridCase(100.0, buses, branches, gens);
}

// Two generators feeding one common load bus through their reactances.
GridCase star_case(double p2 = 0.3, double load_p = 0.8, double load_q = 0.2) {
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0, 0},
                           {2, BusKind::PV, 1.0, 0, 0, 0, 0, 0},
                           {3, BusKind::PQ, 1.0, 0, load_p, load_q, 0, 0}};
    std::vector<Branch> branches{{1, 1, 3, 0.0, 0.15, 0.0, true},
                                 {2, 2, 3, 0.0, 0.2, 0.0, true}};
    std::vector<Generator> gens{{"G1", 1, 0.0, 1.0, 5.0, 0.0, 0.25, 100.0},
                                {"G2", 2, p2 * 100.0 / 100.0, 1.0, 4.0, 0.0, 0.3, 100.0}};
    std::vector<Generator> gens_fixed = gens;
    gens_fixed[1].p_set = p2;
    return GridCase(100.0, buses, branches, gens_fixed);
}

}  // namespace

TEST_CASE("ybus: single-bus case gives only the shunt") {
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0.0, 0.0}};
    const GridCase c(100.0, buses, {}, {});
    const AdmittanceMatrix y = build_ybus(c);
    CHECK(std::abs(y.y(0, 0)) == 0.0);
}

TEST_CASE("ybus: hand-computed two-bus line") {
    const GridCase c = two_bus_case();
    const AdmittanceMatrix y = build_ybus(c);
    CHECK(y.y(0, 0).imag() == doctest::Approx(-10.0));
    CHECK(y.y(1, 1).imag() == doctest::Approx(-10.0));
    CHECK(y.y(0, 1).imag() == doctest::Approx(10.0));
    CHECK(y.y(1, 0).imag() == doctest::Approx(10.0));
    CHECK(y.y(0, 0).real() == doctest::Approx(0.0));
}

TEST_CASE("ybus: removing one branch changes exactly four entries") {
    const GridCase c = load_case(kData + "/ieee39");
    const AdmittanceMatrix y0 = build_ybus(c);
    Topology topo = Topology::of(c);
    topo.branch_live[c.branch_index(25)] = 0;  // line 15-16
    const AdmittanceMatrix y1 = build_ybus(c, topo);
    int changed = 0;
    for (int i = 0; i < y0.y.rows(); ++i)
        for (int j = 0; j < y0.y.cols(); ++j)
            if (std::abs(y0.y(i, j) - y1.y(i, j)) > 1e-14) ++changed;
    CHECK(changed == 4);
}

TEST_CASE("ybus: row sums equal total shunt at each bus") {
    const GridCase c = load_case(kData + "/ieee39");
    const AdmittanceMatrix y = build_ybus(c);
    for (int i = 0; i < y.y.rows(); ++i) {
        cplx row_sum = 0.0;
        for (int j = 0; j < y.y.cols(); ++j) row_sum += y.y(i, j);
        // Series terms cancel; what remains is charging plus bus shunts.
        cplx shunt = cplx(c.buses()[i].g_sh, c.buses()[i].b_sh);
        for (const Branch& br : c.branches()) {
            if (!br.in_service) continue;
            if (br.from == c.buses()[i].id || br.to == c.buses()[i].id)
                shunt += cplx(0.0, br.b_ch / 2.0);
        }
        CHECK(std::abs(row_sum - shunt) < 1e-10);
    }
}

TEST_CASE("power flow: slack-only case converges in zero iterations") {
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0, 0}};
    const GridCase c(100.0, buses, {}, {});
    const PowerFlowSolution s = solve_power_flow(c);
    CHECK(s.converged);
    CHECK(s.iterations == 0);
    CHECK(s.max_mismatch == doctest::Approx(0.0));
}

TEST_CASE("power flow: two-bus case matches the closed-form solution") {
    // P2 = -0.5, Q2 = 0 over x = 0.1: 10 v sin(th) = -0.5 and v = cos(th),
    // so th = -asin(0.1)/2 and v = cos(th).
    const double theta = -std::asin(0.1) / 2.0;
    const double v = std::cos(theta);
    const GridCase c = two_bus_case();
    const PowerFlowSolution s = solve_power_flow(c);
    REQUIRE(s.converged);
    CHECK(s.v_ang(0) == doctest::Approx(0.0));
    CHECK(s.v_mag(1) == doctest::Approx(v).epsilon(1e-8));
    CHECK(s.v_ang(1) == doctest::Approx(theta).epsilon(1e-8));
}

TEST_CASE("power flow: 39-bus fixture against the frozen reference") {
    const GridCase c = load_case(kData + "/ieee39");
    const PowerFlowSolution s = solve_power_flow(c);
    REQUIRE(s.converged);
    CHECK(s.iterations <= 10);
    CHECK(s.max_mismatch < 1e-8);

    const auto flows = branch_flows(c, s);
    const csv::Table ref = csv::read_file(kData + "/reference/pf39_flows.csv");
    REQUIRE(ref.rows.size() == flows.size());
    const int c_id = ref.column("branch_id"), c_sf = ref.column("s_from_mva"),
              c_st = ref.column("s_to_mva");
    double max_rel = 0.0;
    for (std::size_t r = 0; r < ref.rows.size(); ++r) {
        const int bid = static_cast<int>(csv::to_long(ref, r, c_id));
        const double sf_ref = csv::to_double(ref, r, c_sf);
        const double st_ref = csv::to_double(ref, r, c_st);
        const BranchFlow* f = nullptr;
        for (const auto& bf : flows)
            if (bf.branch_id == bid) f = &bf;
        REQUIRE(f != nullptr);
        const double scale = std::max(1.0, std::abs(sf_ref));
        max_rel = std::max(max_rel, std::abs(f->s_from * 100.0 - sf_ref) / scale);
        max_rel = std::max(max_rel, std::abs(f->s_to * 100.0 - st_ref) / std::max(1.0, st_ref));
    }
    CHECK(max_rel < 0.01);
}

TEST_CASE("power flow: power conservation at the solution") {
    const GridCase c = load_case(kData + "/ieee39");
    const PowerFlowSolution s = solve_power_flow(c);
    REQUIRE(s.converged);
    const auto flows = branch_flows(c, s);
    double losses = 0.0;
    for (const auto& f : flows) losses += f.p_from + f.p_to;
    // Generation = injections at gen buses; recompute from the solution.
    const AdmittanceMatrix y = build_ybus(c);
    Eigen::VectorXcd v(c.n_buses());
    for (int i = 0; i < c.n_buses(); ++i) v(i) = std::polar(s.v_mag(i), s.v_ang(i));
    double gen = 0.0, load = 0.0;
    for (int i = 0; i < c.n_buses(); ++i) {
        const cplx inj = v(i) * std::conj((y.y.row(i) * v)(0));
        gen += inj.real() + c.buses()[i].p_load;
        load += c.buses()[i].p_load;
    }
    CHECK(gen - load - losses == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("power flow: infeasible case reports non-convergence") {
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0, 0},
                           {2, BusKind::PQ, 1.0, 0, 50.0, 0.0, 0, 0}};  // 5000 MW over one line
    std::vector<Branch> branches{{1, 1, 2, 0.0, 0.1, 0.0, true}};
    const GridCase c(100.0, buses, branches, {});
    const PowerFlowSolution s = solve_power_flow(c);
    CHECK_FALSE(s.converged);
}

TEST_CASE("branch flows: open branch reports zero") {
    GridCase c = load_case(kData + "/fig2");
    const PowerFlowSolution s = solve_power_flow(c);
    REQUIRE(s.converged);
    const auto flows = branch_flows(c, s);
    for (const auto& f : flows)
        if (f.branch_id == 6 || f.branch_id == 26) {
            CHECK(f.s_from == 0.0);
            CHECK(f.s_to == 0.0);
        }
}

TEST_CASE("branch flows: lossless line conserves active power") {
    const GridCase c = two_bus_case();
    const PowerFlowSolution s = solve_power_flow(c);
    REQUIRE(s.converged);
    const auto flows = branch_flows(c, s);
    CHECK(flows[0].p_from == doctest::Approx(-flows[0].p_to).epsilon(1e-10));
    CHECK(flows[0].p_to == doctest::Approx(-0.5).epsilon(1e-8));
}

TEST_CASE("branch flows: s fields satisfy the apparent-power identity") {
    const GridCase c = load_case(kData + "/ieee39");
    const PowerFlowSolution s = solve_power_flow(c);
    const auto flows = branch_flows(c, s);
    for (const auto& f : flows) {
        CHECK(f.s_from ==
              doctest::Approx(std::hypot(f.p_from, f.q_from)).epsilon(1e-12));
        CHECK(f.s_to == doctest::Approx(std::hypot(f.p_to, f.q_to)).epsilon(1e-12));
        CHECK(f.s_from >= 0.0);
    }
}

TEST_CASE("apparent power matrix: symmetric, nonnegative, orientation-invariant") {
    GridCase c = load_case(kData + "/ieee39");
    const PowerFlowSolution s = solve_power_flow(c);
    const auto flows = branch_flows(c, s);
    const SMatrix m = apparent_power_matrix(c, flows);
    CHECK((m.s - m.s.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(m.s.minCoeff() >= 0.0);
    CHECK(m.s(c.bus_index(7), c.bus_index(12)) == 0.0);  // no branch 7-12

    // Orientation swap: flows with from/to exchanged give the same matrix.
    std::vector<Bus> buses = c.buses();
    std::vector<Branch> branches = c.branches();
    for (auto& br : branches) std::swap(br.from, br.to);
    std::vector<Generator> gens = c.generators();
    const GridCase swapped(100.0, buses, branches, gens);
    const PowerFlowSolution s2 = solve_power_flow(swapped);
    const SMatrix m2 = apparent_power_matrix(swapped, branch_flows(swapped, s2));
    CHECK((m.s - m2.s).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("kron reduction: star network matches the hand elimination formula") {
    const GridCase c = star_case();
    const PowerFlowSolution s = solve_power_flow(c);
    REQUIRE(s.converged);
    const ReducedNetwork red = kron_reduce(c, s);
    REQUIRE(red.y.rows() == 2);

    // Hand-applied single-node eliminations of the 5-node augmented network:
    // internal1 -(1/j.25)- bus1 -(1/j.15)- bus3 -(1/j.2)- bus2 -(1/j.3)- internal2,
    // load shunt at bus3. Eliminating buses one at a time collapses the chain.
    const cplx y_g1 = 1.0 / cplx(0, 0.25), y_l1 = 1.0 / cplx(0, 0.15);
    const cplx y_g2 = 1.0 / cplx(0, 0.3), y_l2 = 1.0 / cplx(0, 0.2);
    const double v3 = s.v_mag(2);
    const cplx y_load = cplx(0.8, -0.2) / (v3 * v3);
    // series combine towards bus3
    const cplx y_a = y_g1 * y_l1 / (y_g1 + y_l1);  // internal1 -> bus3
    const cplx y_b = y_g2 * y_l2 / (y_g2 + y_l2);  // internal2 -> bus3
    const cplx denom = y_a + y_b + y_load;
    Eigen::MatrixXcd expected(2, 2);
    expected(0, 0) = y_a - y_a * y_a / denom;
    expected(1, 1) = y_b - y_b * y_b / denom;
    expected(0, 1) = expected(1, 0) = -y_a * y_b / denom;
    CHECK((red.y - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("kron reduction: internal EMF of an unloaded generator equals its terminal") {
    // Generator at zero output with terminal near 1 p.u.: E' = V_t.
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0, 0},
                           {2, BusKind::PV, 1.0, 0, 0, 0, 0, 0}};
    std::vector<Branch> branches{{1, 1, 2, 0.0, 0.1, 0.0, true}};
    std::vector<Generator> gens{{"G1", 1, 0, 1.0, 5, 0, 0.2, 100},
                                {"G2", 2, 0, 1.0, 5, 0, 0.2, 100}};
    const GridCase c(100.0, buses, branches, gens);
    const PowerFlowSolution s = solve_power_flow(c);
    REQUIRE(s.converged);
    const ReducedNetwork red = kron_reduce(c, s);
    CHECK(red.emf(1) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(red.delta(1) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("kron reduction: near-zero transient reactance leaves the bus matrix") {
    // With vanishing xd' and no loads the reduced matrix approaches Ybus.
    std::vector<Bus> buses{{1, BusKind::Slack, 1.0, 0, 0, 0, 0, 0},
                           {2, BusKind::PV, 1.0, 0, 0, 0, 0, 0}};
    std::vector<Branch> branches{{1, 1, 2, 0.0, 0.5, 0.0, true}};
    std::vector<Generator> gens{{"G1", 1, 0, 1.0, 5, 0, 1e-7, 100},
                                {"G2", 2, 0, 1.0, 5, 0, 1e-7, 100}};
    const GridCase c(100.0, buses, branches, gens);
    const PowerFlowSolution s = solve_power_flow(c);
    const ReducedNetwork red = kron_reduce(c, s);
    const AdmittanceMatrix y = build_ybus(c);
    CHECK((red.y - y.y).cwiseAbs().maxCoeff() / y.y.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("kron reduction: symmetry and two-stage composability") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    const GridCase c = load_case(kData + "/ieee39");
    const PowerFlowSolution s = solve_power_flow(c);
    const ReducedNetwork red = kron_reduce(c, s);
    CHECK((red.y - red.y.transpose()).cwiseAbs().maxCoeff() < 1e-10);

    // Composability on random complex symmetric matrices with dominant diagonal.
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 8;
        Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const cplx w(u(rng) * 0.3, -u(rng));
                y(i, j) = y(j, i) = -w;
                y(i, i) += w;
                y(j, j) += w;
            }
        for (int i = 0; i < n; ++i) y(i, i) += cplx(u(rng) * 0.1, u(rng) * 0.05);
        // keep nodes {0,1,2}: one shot vs. two stages
        const Eigen::MatrixXcd one = eliminate_nodes(y, {0, 1, 2});
        const Eigen::MatrixXcd half = eliminate_nodes(y, {0, 1, 2, 3, 4});
        const Eigen::MatrixXcd two = eliminate_nodes(half, {0, 1, 2});
        CHECK((one - two).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((one - one.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("kron reduction: singular interior subnetwork is reported") {
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(3, 3);
    y(0, 0) = cplx(0, -5);  // nodes 1,2 isolated: Ydd singular
    CHECK_THROWS_AS(eliminate_nodes(y, {0}), NumericError);
}
