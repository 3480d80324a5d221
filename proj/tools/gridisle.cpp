// Controlled-islanding toolkit: power flow, generator coherency, constrained
// network splitting, and a classical transient simulator.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>

#include "gridisle/coherency.hpp"
#include "gridisle/csv.hpp"
#include "gridisle/errors.hpp"
#include "gridisle/grid_model.hpp"
#include "gridisle/partition.hpp"
#include "gridisle/power_flow.hpp"
#include "gridisle/report.hpp"
#include "gridisle/transient.hpp"

namespace fs = std::filesystem;
using namespace gridisle;

namespace {

constexpr int kExitNumeric = 1;
constexpr int kExitConstraint = 2;
constexpr int kExitInput = 3;

struct CommonOpts {
    std::string case_dir;
    std::string events_path;
    std::string out_dir = ".";
    double base_mva = 100.0;
    int k = 0;                       // 0 = automatic
    double at_time = -1.0;           // <0 = static
    double lead = 0.1;
    double dt = 1e-3;
    std::string keep;                // "A-B,C-D" bus pairs
    std::string ks_file;
    std::string smatrix_file;
    std::string groups_file;
    bool apply_islanding = false;
    bool no_fill = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--case", o.case_dir, "case directory (bus.csv, branch.csv, gen.csv)")
        ->required();
    cmd->add_option("--events", o.events_path, "event schedule csv");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--base-mva", o.base_mva, "system base MVA");
    cmd->add_option("--k", o.k, "cluster count override");
    cmd->add_option("--at-time", o.at_time, "snapshot time in seconds");
    cmd->add_option("--lead", o.lead, "seconds before detected loss of sync");
    cmd->add_option("--dt", o.dt, "integration step in seconds");
    cmd->add_option("--keep", o.keep, "branches that must not be cut, e.g. 16-17,5-6");
    cmd->add_option("--ks-file", o.ks_file, "use a Ks matrix from file");
    cmd->add_option("--smatrix-file", o.smatrix_file, "use an apparent-power matrix from file");
    cmd->add_option("--groups", o.groups_file, "use coherent groups from file");
    cmd->add_flag("--apply-islanding", o.apply_islanding,
                  "split at detector time minus lead and continue the run");
    cmd->add_flag("--no-fill", o.no_fill,
                  "do not complete a partial apparent-power matrix from the power flow");
}

std::vector<int> parse_keep(const std::string& spec, const GridCase& c) {
    std::vector<int> out;
    if (spec.empty()) return out;
    std::size_t start = 0;
    while (start < spec.size()) {
        std::size_t comma = spec.find(',', start);
        const std::string tok =
            spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const std::size_t dash = tok.find('-');
        if (dash == std::string::npos) throw ParseError("bad --keep entry '" + tok + "'");
        const int a = std::stoi(tok.substr(0, dash));
        const int b = std::stoi(tok.substr(dash + 1));
        bool found = false;
        for (const Branch& br : c.branches())
            if (br.in_service && ((br.from == a && br.to == b) || (br.from == b && br.to == a))) {
                out.push_back(br.id);
                found = true;
                break;
            }
        if (!found)
            throw ValidationError("--keep: no in-service branch joins " + std::to_string(a) +
                                  " and " + std::to_string(b));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void ensure_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw ParseError("cannot create output directory " + dir);
}

struct SnapshotBundle {
    Trajectories traj;
    Snapshot snap;
    EventSchedule events;
};

SnapshotBundle make_snapshot(const GridCase& c, const CommonOpts& o, double t) {
    if (o.events_path.empty()) throw ValidationError("--at-time requires --events");
    SnapshotBundle b;
    b.events = load_events(o.events_path, c);
    SimConfig cfg;
    cfg.dt = o.dt;
    cfg.horizon = std::max(t, b.events.last_time()) + cfg.dt;
    b.traj = simulate(c, b.events, cfg);
    b.snap = snapshot_at(c, b.events, b.traj, t, cfg);
    return b;
}

CoherencyGroups coherency_from_reduced(const ReducedNetwork& red, int k_override,
                                       Eigen::MatrixXd* psync_out, Eigen::MatrixXd* ks_out) {
    const PsyncMatrix ps = psync_matrix(red);
    if (ps.clamped > 0)
        std::cerr << "warning: clamped " << ps.clamped << " negative coupling entr"
                  << (ps.clamped == 1 ? "y" : "ies") << " to zero\n";
    const KsMatrix ks = ks_matrix(ps);
    if (psync_out) *psync_out = ps.p;
    if (ks_out) *ks_out = ks.k;
    Eigen::MatrixXd w = ks.k;
    for (int i = 0; i < w.rows(); ++i) w(i, i) = 0.0;
    const int m = static_cast<int>(ks.labels.size());
    const int k = k_override > 0 ? k_override
                                 : choose_k(normalized_laplacian(w), std::min(m, 6));
    return spectral_coherency(ks, k);
}

int cmd_pf(const CommonOpts& o) {
    const GridCase c = load_case(o.case_dir, o.base_mva);
    const PowerFlowSolution sol = solve_power_flow(c);
    if (!sol.converged) {
        std::cerr << "power flow did not converge: max mismatch " << sol.max_mismatch
                  << " pu after " << sol.iterations << " iterations\n";
        return kExitNumeric;
    }
    ensure_out(o.out_dir);
    const auto flows = branch_flows(c, sol);
    write_flows_csv(o.out_dir + "/flows.csv", c, flows);
    write_smatrix_csv(o.out_dir + "/smatrix.csv", c, apparent_power_matrix(c, flows));
    std::cout << "converged in " << sol.iterations << " iterations, max mismatch "
              << sol.max_mismatch << " pu\n";
    return 0;
}

int cmd_coherency(const CommonOpts& o) {
    const GridCase c = load_case(o.case_dir, o.base_mva);
    ensure_out(o.out_dir);

    if (!o.ks_file.empty()) {
        std::vector<std::string> labels;
        const Eigen::MatrixXd raw = load_labeled_matrix_csv(o.ks_file, labels);
        const KsMatrix ks = symmetrized_ks(raw, labels);
        const int m = static_cast<int>(labels.size());
        Eigen::MatrixXd w = ks.k;
        for (int i = 0; i < m; ++i) w(i, i) = 0.0;
        const int k = o.k > 0 ? o.k : choose_k(normalized_laplacian(w), std::min(m, 6));
        const CoherencyGroups groups = spectral_coherency(ks, k);
        write_labeled_matrix_csv(o.out_dir + "/ks.csv", "gen", labels, ks.k);
        write_groups_txt(o.out_dir + "/groups.txt", groups);
        std::cout << groups.size() << " coherent groups\n";
        return 0;
    }

    ReducedNetwork red;
    if (o.at_time >= 0) {
        red = make_snapshot(c, o, o.at_time).snap.reduced;
    } else {
        const PowerFlowSolution sol = solve_power_flow(c);
        if (!sol.converged) throw NumericError("power flow did not converge");
        red = kron_reduce(c, sol);
    }
    Eigen::MatrixXd psync, ks;
    const CoherencyGroups groups = coherency_from_reduced(red, o.k, &psync, &ks);
    write_labeled_matrix_csv(o.out_dir + "/psync.csv", "gen", red.labels, psync);
    write_labeled_matrix_csv(o.out_dir + "/ks.csv", "gen", red.labels, ks);
    write_groups_txt(o.out_dir + "/groups.txt", groups);
    std::cout << groups.size() << " coherent groups\n";
    return 0;
}

int cmd_island(const CommonOpts& o) {
    const GridCase c = load_case(o.case_dir, o.base_mva);
    ensure_out(o.out_dir);
    const std::vector<int> keep = parse_keep(o.keep, c);

    Topology topo = Topology::of(c);
    std::optional<SnapshotBundle> bundle;
    if (o.at_time >= 0) {
        bundle = make_snapshot(c, o, o.at_time);
        topo = bundle->snap.topology;
    }

    SMatrix sm;
    if (!o.smatrix_file.empty()) {
        sm = load_smatrix_csv(o.smatrix_file, c);
        if (!o.no_fill) sm = complete_smatrix(sm, c, topo);
    } else if (bundle) {
        sm = bundle->snap.smatrix;
    } else {
        const PowerFlowSolution sol = solve_power_flow(c);
        if (!sol.converged) throw NumericError("power flow did not converge");
        sm = apparent_power_matrix(c, branch_flows(c, sol));
    }

    CoherencyGroups groups;
    if (!o.groups_file.empty()) {
        groups = load_groups_txt(o.groups_file);
    } else {
        ReducedNetwork red;
        if (bundle) {
            red = bundle->snap.reduced;
        } else {
            const PowerFlowSolution sol = solve_power_flow(c);
            if (!sol.converged) throw NumericError("power flow did not converge");
            red = kron_reduce(c, sol);
        }
        groups = coherency_from_reduced(red, o.k, nullptr, nullptr);
    }

    const IslandingResult res = island(sm, c, topo, groups, keep);
    write_partition_json(o.out_dir + "/partition.json", res);
    write_islands_dot(o.out_dir + "/islands.dot", c, res.partition, res.cut, keep);
    if (bundle) {
        SimConfig cfg;
        cfg.dt = o.dt;
        const Eigen::MatrixXd corr =
            bus_angle_correlation(c, bundle->events, bundle->traj, bundle->snap.t, 0.5, cfg);
        std::vector<std::string> bus_labels;
        for (const Bus& b : c.buses()) bus_labels.push_back(std::to_string(b.id));
        write_labeled_matrix_csv(o.out_dir + "/correlation.csv", "bus", bus_labels, corr);
    }
    std::cout << res.partition.islands.size() << " islands, total disruption "
              << csv::format_double(res.cut.total_disruption) << " kVA\n";
    return 0;
}

int cmd_simulate(const CommonOpts& o) {
    const GridCase c = load_case(o.case_dir, o.base_mva);
    if (o.events_path.empty()) throw ValidationError("simulate requires --events");
    ensure_out(o.out_dir);
    EventSchedule events = load_events(o.events_path, c);

    SimConfig cfg;
    cfg.dt = o.dt;
    cfg.horizon = std::max(8.0, events.last_time());

    Trajectories traj = simulate(c, events, cfg);
    SyncLossReport rep = detect_loss_of_sync(traj, std::numbers::pi);

    std::ofstream summary(o.out_dir + "/sync.txt");
    summary << "unstable," << (rep.unstable ? 1 : 0) << '\n';
    if (rep.t_loss) summary << "t_loss_s," << csv::format_double(*rep.t_loss) << '\n';

    if (o.apply_islanding) {
        if (!rep.unstable) {
            std::cerr << "system stays in synchronism; nothing to split\n";
            write_traj_csv(o.out_dir + "/traj.csv", traj);
            return 0;
        }
        const double t_split = std::max(0.0, *rep.t_loss - o.lead);
        const Snapshot snap = snapshot_at(c, events, traj, t_split, cfg);
        const CoherencyGroups groups = coherency_from_reduced(snap.reduced, o.k, nullptr, nullptr);
        const std::vector<int> keep = parse_keep(o.keep, c);
        const IslandingResult res = island(snap.smatrix, c, snap.topology, groups, keep);
        write_partition_json(o.out_dir + "/partition.json", res);
        write_islands_dot(o.out_dir + "/islands.dot", c, res.partition, res.cut, keep);

        EventSchedule with_split = events;
        for (const CutBranch& b : res.cut.branches) {
            // Branches already opened by the schedule need no new event.
            if (snap.topology.live(c, c.branch_index(b.branch_id)))
                with_split.events.push_back({snap.t, EventKind::OpenLine, b.branch_id});
        }
        std::stable_sort(with_split.events.begin(), with_split.events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
        traj = simulate(c, with_split, cfg);
        const SyncLossReport rep2 = detect_loss_of_sync(traj, std::numbers::pi);
        summary << "split_applied_t_s," << csv::format_double(snap.t) << '\n';
        summary << "islands," << res.partition.islands.size() << '\n';
        summary << "post_split_unstable," << (rep2.unstable ? 1 : 0) << '\n';
        double spread_after = 0.0;
        for (std::size_t i = 0; i < traj.t.size(); ++i)
            if (traj.t[i] >= snap.t) spread_after = std::max(spread_after, traj.max_spread[i]);
        summary << "max_island_spread_after_split_deg,"
                << csv::format_double(spread_after * 180.0 / std::numbers::pi) << '\n';
    }

    write_traj_csv(o.out_dir + "/traj.csv", traj);
    std::cout << (rep.unstable ? "loss of synchronism detected" : "stable run") << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"controlled islanding toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto* pf = app.add_subcommand("pf", "solve the AC power flow and write branch flows");
    auto* coh = app.add_subcommand("coherency", "detect coherent generator groups");
    auto* isl = app.add_subcommand("island", "compute the minimum-disruption split");
    auto* sim = app.add_subcommand("simulate", "run the classical transient simulation");
    for (auto* cmd : {pf, coh, isl, sim}) add_common(cmd, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (pf->parsed()) return cmd_pf(opts);
        if (coh->parsed()) return cmd_coherency(opts);
        if (isl->parsed()) return cmd_island(opts);
        if (sim->parsed()) return cmd_simulate(opts);
    } catch (const ConstraintError& e) {
        std::cerr << "constraint violation: " << e.what() << '\n';
        return kExitConstraint;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ValidationError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return 0;
}
