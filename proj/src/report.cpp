#include "gridisle/report.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "gridisle/csv.hpp"
#include "gridisle/errors.hpp"

namespace gridisle {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot write " + path);
    return f;
}

std::string fmt(double v) { return csv::format_double(v); }

}  // namespace

void write_flows_csv(const std::string& path, const GridCase& c,
                     const std::vector<BranchFlow>& flows) {
    auto f = open_out(path);
    const double base = c.base_mva();
    f << "branch_id,from,to,p_from_mw,q_from_mvar,s_from_mva,p_to_mw,q_to_mvar,s_to_mva\n";
    for (const BranchFlow& bf : flows) {
        const Branch& br = c.branch(bf.branch_id);
        f << bf.branch_id << ',' << br.from << ',' << br.to << ',' << fmt(bf.p_from * base) << ','
          << fmt(bf.q_from * base) << ',' << fmt(bf.s_from * base) << ',' << fmt(bf.p_to * base)
          << ',' << fmt(bf.q_to * base) << ',' << fmt(bf.s_to * base) << '\n';
    }
}

void write_smatrix_csv(const std::string& path, const GridCase& c, const SMatrix& m) {
    auto f = open_out(path);
    const double to_kva = m.unit == SUnit::PerUnit ? c.base_mva() * 1000.0 : 1.0;
    f << "bus";
    for (int id : m.bus_ids) f << ',' << id;
    f << '\n';
    for (int i = 0; i < m.s.rows(); ++i) {
        f << m.bus_ids[i];
        for (int j = 0; j < m.s.cols(); ++j) f << ',' << fmt(m.s(i, j) * to_kva);
        f << '\n';
    }
}

SMatrix load_smatrix_csv(const std::string& path, const GridCase& c) {
    csv::Table t = csv::read_file(path);
    const int n = c.n_buses();
    if (static_cast<int>(t.rows.size()) != n)
        throw ParseError(path, 1, "expected " + std::to_string(n) + " matrix rows");
    SMatrix m;
    m.unit = SUnit::KiloVoltAmpere;
    m.s = Eigen::MatrixXd::Zero(n, n);
    for (const Bus& b : c.buses()) m.bus_ids.push_back(b.id);

    std::vector<int> col_of_bus(n, -1);
    for (std::size_t h = 1; h < t.header.size(); ++h) {
        const int bus = std::stoi(t.header[h]);
        col_of_bus[c.bus_index(bus)] = static_cast<int>(h);
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const int bus = static_cast<int>(csv::to_long(t, r, 0));
        const int i = c.bus_index(bus);
        for (int jbus = 0; jbus < n; ++jbus) {
            const int col = col_of_bus[jbus];
            if (col < 0) throw ParseError(path, 1, "matrix header misses a bus");
            m.s(i, jbus) = csv::to_double(t, r, col);
        }
    }
    if ((m.s - m.s.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ValidationError("apparent power matrix in " + path + " is not symmetric");
    return m;
}

void write_labeled_matrix_csv(const std::string& path, const std::string& corner,
                              const std::vector<std::string>& labels, const Eigen::MatrixXd& m) {
    auto f = open_out(path);
    f << corner;
    for (const auto& l : labels) f << ',' << l;
    f << '\n';
    for (int i = 0; i < m.rows(); ++i) {
        f << labels[i];
        for (int j = 0; j < m.cols(); ++j) f << ',' << fmt(m(i, j));
        f << '\n';
    }
}

Eigen::MatrixXd load_labeled_matrix_csv(const std::string& path,
                                        std::vector<std::string>& labels) {
    csv::Table t = csv::read_file(path);
    const int n = static_cast<int>(t.rows.size());
    if (static_cast<int>(t.header.size()) != n + 1)
        throw ParseError(path, 1, "matrix is not square");
    labels.assign(t.header.begin() + 1, t.header.end());
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        if (t.rows[i][0] != labels[i])
            throw ParseError(path, t.row_lines[i], "row label order differs from header");
        for (int j = 0; j < n; ++j) m(i, j) = csv::to_double(t, i, j + 1);
    }
    return m;
}

void write_groups_txt(const std::string& path, const CoherencyGroups& groups) {
    auto f = open_out(path);
    for (const auto& g : groups.groups) {
        for (std::size_t i = 0; i < g.size(); ++i) f << (i ? "," : "") << g[i];
        f << '\n';
    }
}

CoherencyGroups load_groups_txt(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path);
    CoherencyGroups out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> group;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            std::string tok = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                            : comma - start);
            const std::size_t b = tok.find_first_not_of(" \t\r");
            if (b != std::string::npos)
                group.push_back(tok.substr(b, tok.find_last_not_of(" \t\r") - b + 1));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!group.empty()) out.groups.push_back(std::move(group));
    }
    return out;
}

void write_partition_json(const std::string& path, const IslandingResult& res) {
    nlohmann::ordered_json j;
    j["islands"] = res.partition.islands;
    nlohmann::ordered_json cut = nlohmann::ordered_json::array();
    for (const CutBranch& b : res.cut.branches)
        cut.push_back({{"branch", b.branch_id}, {"from", b.from}, {"to", b.to},
                       {"s_kva", b.s_kva}});
    j["cutset"] = cut;
    j["total_disruption_kva"] = res.cut.total_disruption;
    j["island_p_imbalance_mw"] = res.cut.island_p_mw;
    j["island_q_load_mvar"] = res.cut.island_q_mvar;

    nlohmann::ordered_json cons;
    cons["must_link_pairs"] = res.constraints.ml_pairs.size();
    nlohmann::ordered_json cl = nlohmann::ordered_json::array();
    for (const auto& [a, b] : res.constraints.cl_pairs) {
        const bool ok = res.partition.island_of(a) != res.partition.island_of(b);
        cl.push_back({{"a", a}, {"b", b}, {"separated", ok}});
    }
    cons["cannot_link"] = cl;
    cons["keep_branches"] = res.constraints.keep_branches;
    j["constraints"] = cons;

    auto f = open_out(path);
    f << j.dump(2) << '\n';
}

void write_islands_dot(const std::string& path, const GridCase& c, const IslandPartition& part,
                       const Cutset& cut, const std::vector<int>& keep_branches) {
    static const char* kColors[] = {"lightblue", "lightsalmon", "palegreen", "khaki",
                                    "plum", "lightgray"};
    std::set<int> cut_ids;
    for (const CutBranch& b : cut.branches) cut_ids.insert(b.branch_id);
    std::set<int> keep_ids(keep_branches.begin(), keep_branches.end());

    auto f = open_out(path);
    f << "graph islands {\n  node [style=filled];\n";
    for (const Bus& b : c.buses()) {
        const int isl = part.island_of(b.id);
        f << "  " << b.id << " [fillcolor=" << kColors[isl >= 0 ? isl % 6 : 5];
        if (c.generator_at_bus(b.id)) f << ", shape=doublecircle";
        f << "];\n";
    }
    for (const Branch& br : c.branches()) {
        if (!br.in_service) continue;
        f << "  " << br.from << " -- " << br.to;
        if (cut_ids.count(br.id))
            f << " [style=dashed, color=red]";
        else if (keep_ids.count(br.id))
            f << " [penwidth=2]";
        f << ";\n";
    }
    f << "}\n";
}

void write_traj_csv(const std::string& path, const Trajectories& traj) {
    auto f = open_out(path);
    constexpr double kRadToDeg = 180.0 / std::numbers::pi;
    f << "t_s";
    for (const auto& l : traj.labels) f << ",delta_" << l << "_deg";
    for (const auto& l : traj.labels) f << ",omega_" << l;
    f << '\n';
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        f << fmt(traj.t[i]);
        for (int g = 0; g < traj.states[i].delta.size(); ++g)
            f << ',' << fmt(traj.states[i].delta(g) * kRadToDeg);
        for (int g = 0; g < traj.states[i].omega.size(); ++g)
            f << ',' << fmt(traj.states[i].omega(g));
        f << '\n';
    }
}

Eigen::MatrixXd bus_angle_correlation(const GridCase& c, const EventSchedule& events,
                                      const Trajectories& traj, double t_end, double window,
                                      const SimConfig& cfg) {
    const int n = c.n_buses();
    const int m = static_cast<int>(c.generators().size());
    const std::size_t i_end = traj.nearest_index(t_end);
    const std::size_t i_start = traj.nearest_index(std::max(traj.t.front(), t_end - window));
    const std::size_t steps = i_end - i_start + 1;
    if (steps < 2) throw ValidationError("correlation window too short");

    const PowerFlowSolution base = solve_power_flow(c);
    const ReducedNetwork red0 = kron_reduce(c, base);

    Eigen::MatrixXd theta(steps, n);
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t idx = i_start + s;
        const Topology topo = topology_at(c, events, traj.t[idx] + traj.dt * 0.5, cfg);
        Eigen::VectorXcd eg(m);
        for (int g = 0; g < m; ++g) eg(g) = std::polar(red0.emf(g), traj.states[idx].delta(g));
        const Eigen::VectorXcd v = network_voltages(c, base, topo, eg);
        for (int b = 0; b < n; ++b) theta(s, b) = std::arg(v(b));
    }

    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(n, n);
    const Eigen::RowVectorXd mean = theta.colwise().mean();
    const Eigen::MatrixXd centered = theta.rowwise() - mean;
    const Eigen::VectorXd norms = centered.colwise().norm();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double d = norms(i) * norms(j);
            corr(i, j) = d > 1e-14 ? centered.col(i).dot(centered.col(j)) / d : 0.0;
        }
    return corr;
}

}  // namespace gridisle
