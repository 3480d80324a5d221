#include "gridisle/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "gridisle/csv.hpp"
#include "gridisle/errors.hpp"

namespace gridisle {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

BusKind parse_kind(const std::string& s, const std::string& file, int line) {
    if (s == "slack") return BusKind::Slack;
    if (s == "PV") return BusKind::PV;
    if (s == "PQ") return BusKind::PQ;
    throw ParseError(file, line, "unknown bus kind '" + s + "'");
}

const char* kind_name(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "PV";
        default: return "PQ";
    }
}

}  // namespace

GridCase::GridCase(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                   std::vector<Generator> gens)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      gens_(std::move(gens)) {
    validate();
}

void GridCase::validate() {
    if (base_mva_ <= 0) throw ValidationError("base MVA must be positive");
    if (buses_.empty()) throw ValidationError("case has no buses");

    int slack_count = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const Bus& b = buses_[i];
        if (b.id <= 0) throw ValidationError("bus id must be positive: bus " + std::to_string(b.id));
        if (!bus_pos_.emplace(b.id, static_cast<int>(i)).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::Slack) {
            ++slack_count;
            slack_index_ = static_cast<int>(i);
        }
        if (b.kind != BusKind::PQ && b.v_mag <= 0)
            throw ValidationError("bus " + std::to_string(b.id) + ": setpoint v_mag must be > 0");
    }
    if (slack_count == 0) throw ValidationError("no slack bus");
    if (slack_count > 1) throw ValidationError("multiple slack buses");

    for (std::size_t i = 0; i < branches_.size(); ++i) {
        const Branch& br = branches_[i];
        if (br.id <= 0)
            throw ValidationError("branch id must be positive: branch " + std::to_string(br.id));
        if (!branch_pos_.emplace(br.id, static_cast<int>(i)).second)
            throw ValidationError("duplicate branch id " + std::to_string(br.id));
        if (br.from == br.to)
            throw ValidationError("branch " + std::to_string(br.id) + ": from equals to");
        if (!bus_pos_.count(br.from) || !bus_pos_.count(br.to))
            throw ValidationError("branch " + std::to_string(br.id) + ": endpoint bus missing");
        if (br.r == 0.0 && br.x == 0.0)
            throw ValidationError("branch " + std::to_string(br.id) + ": zero impedance");
    }

    std::set<std::string> labels;
    for (const Generator& g : gens_) {
        if (!labels.insert(g.label).second)
            throw ValidationError("duplicate generator label " + g.label);
        if (!bus_pos_.count(g.bus))
            throw ValidationError("generator " + g.label + ": bus " + std::to_string(g.bus) +
                                  " missing");
        if (g.h <= 0) throw ValidationError("generator " + g.label + ": H must be > 0");
        if (g.xd_p <= 0) throw ValidationError("generator " + g.label + ": xd_p must be > 0");
        if (g.mva <= 0) throw ValidationError("generator " + g.label + ": mva must be > 0");
        if (!gen_at_bus_.emplace(g.bus, static_cast<int>(&g - gens_.data())).second)
            throw ValidationError("more than one generator at bus " + std::to_string(g.bus));
    }

    // Connectivity over all in-service branches.
    if (buses_.size() > 1) {
        std::vector<std::vector<int>> adj(buses_.size());
        for (const Branch& br : branches_) {
            if (!br.in_service) continue;
            int a = bus_pos_.at(br.from), b = bus_pos_.at(br.to);
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::vector<char> seen(buses_.size(), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        std::size_t reached = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    ++reached;
                    stack.push_back(v);
                }
        }
        if (reached != buses_.size())
            throw ValidationError("network is not connected over in-service branches");
    }
}

int GridCase::bus_index(int bus_id) const {
    auto it = bus_pos_.find(bus_id);
    if (it == bus_pos_.end())
        throw ValidationError("unknown bus id " + std::to_string(bus_id));
    return it->second;
}

int GridCase::branch_index(int branch_id) const {
    auto it = branch_pos_.find(branch_id);
    if (it == branch_pos_.end())
        throw ValidationError("unknown branch id " + std::to_string(branch_id));
    return it->second;
}

std::optional<int> GridCase::generator_at_bus(int bus_id) const {
    auto it = gen_at_bus_.find(bus_id);
    if (it == gen_at_bus_.end()) return std::nullopt;
    return it->second;
}

double GridCase::gen_h_sys(int gen_index) const {
    const Generator& g = gens_[gen_index];
    return g.h * g.mva / base_mva_;
}

double GridCase::gen_xdp_sys(int gen_index) const {
    const Generator& g = gens_[gen_index];
    return g.xd_p * base_mva_ / g.mva;
}

GridCase load_case(const std::string& dir, double base_mva) {
    csv::Table bt = csv::read_file(dir + "/bus.csv");
    int c_id = bt.column("id"), c_kind = bt.column("kind"), c_vm = bt.column("v_mag"),
        c_va = bt.column("v_ang_deg"), c_pl = bt.column("p_load_mw"),
        c_ql = bt.column("q_load_mvar"), c_g = bt.column("g_sh"), c_b = bt.column("b_sh");
    std::vector<Bus> buses;
    for (std::size_t r = 0; r < bt.rows.size(); ++r) {
        Bus b;
        b.id = static_cast<int>(csv::to_long(bt, r, c_id));
        b.kind = parse_kind(bt.rows[r][c_kind], bt.path, bt.row_lines[r]);
        b.v_mag = csv::to_double(bt, r, c_vm);
        b.v_ang = csv::to_double(bt, r, c_va) * kDegToRad;
        b.p_load = csv::to_double(bt, r, c_pl) / base_mva;
        b.q_load = csv::to_double(bt, r, c_ql) / base_mva;
        b.g_sh = csv::to_double(bt, r, c_g);
        b.b_sh = csv::to_double(bt, r, c_b);
        buses.push_back(b);
    }

    csv::Table rt = csv::read_file(dir + "/branch.csv");
    int r_id = rt.column("id"), r_f = rt.column("from"), r_t = rt.column("to"),
        r_r = rt.column("r_pu"), r_x = rt.column("x_pu"), r_b = rt.column("b_ch_pu"),
        r_s = rt.column("status");
    std::vector<Branch> branches;
    for (std::size_t r = 0; r < rt.rows.size(); ++r) {
        Branch br;
        br.id = static_cast<int>(csv::to_long(rt, r, r_id));
        br.from = static_cast<int>(csv::to_long(rt, r, r_f));
        br.to = static_cast<int>(csv::to_long(rt, r, r_t));
        br.r = csv::to_double(rt, r, r_r);
        br.x = csv::to_double(rt, r, r_x);
        br.b_ch = csv::to_double(rt, r, r_b);
        br.in_service = csv::to_long(rt, r, r_s) != 0;
        branches.push_back(br);
    }

    csv::Table gt = csv::read_file(dir + "/gen.csv");
    int g_l = gt.column("label"), g_bus = gt.column("bus"), g_p = gt.column("p_mw"),
        g_v = gt.column("v_set"), g_h = gt.column("h_s"), g_d = gt.column("d_pu"),
        g_x = gt.column("xdp_pu"), g_m = gt.column("mva");
    std::vector<Generator> gens;
    for (std::size_t r = 0; r < gt.rows.size(); ++r) {
        Generator g;
        g.label = gt.rows[r][g_l];
        g.bus = static_cast<int>(csv::to_long(gt, r, g_bus));
        g.p_set = csv::to_double(gt, r, g_p) / base_mva;
        g.v_set = csv::to_double(gt, r, g_v);
        g.h = csv::to_double(gt, r, g_h);
        g.d = csv::to_double(gt, r, g_d);
        g.xd_p = csv::to_double(gt, r, g_x);
        g.mva = csv::to_double(gt, r, g_m);
        gens.push_back(g);
    }

    return GridCase(base_mva, std::move(buses), std::move(branches), std::move(gens));
}

void save_case(const GridCase& c, const std::string& dir) {
    {
        std::ofstream f(dir + "/bus.csv");
        if (!f) throw ParseError("cannot write " + dir + "/bus.csv");
        f << "id,kind,v_mag,v_ang_deg,p_load_mw,q_load_mvar,g_sh,b_sh\n";
        for (const Bus& b : c.buses())
            f << b.id << ',' << kind_name(b.kind) << ',' << csv::format_double(b.v_mag) << ','
              << csv::format_double(b.v_ang / kDegToRad) << ','
              << csv::format_double(b.p_load * c.base_mva()) << ','
              << csv::format_double(b.q_load * c.base_mva()) << ',' << csv::format_double(b.g_sh)
              << ',' << csv::format_double(b.b_sh) << '\n';
    }
    {
        std::ofstream f(dir + "/branch.csv");
        f << "id,from,to,r_pu,x_pu,b_ch_pu,status\n";
        for (const Branch& br : c.branches())
            f << br.id << ',' << br.from << ',' << br.to << ',' << csv::format_double(br.r) << ','
              << csv::format_double(br.x) << ',' << csv::format_double(br.b_ch) << ','
              << (br.in_service ? 1 : 0) << '\n';
    }
    {
        std::ofstream f(dir + "/gen.csv");
        f << "label,bus,p_mw,v_set,h_s,d_pu,xdp_pu,mva\n";
        for (const Generator& g : c.generators())
            f << g.label << ',' << g.bus << ',' << csv::format_double(g.p_set * c.base_mva()) << ','
              << csv::format_double(g.v_set) << ',' << csv::format_double(g.h) << ','
              << csv::format_double(g.d) << ',' << csv::format_double(g.xd_p) << ','
              << csv::format_double(g.mva) << '\n';
    }
}

EventSchedule load_events(const std::string& path, const GridCase& c) {
    csv::Table t = csv::read_file(path);
    EventSchedule sched;
    if (t.rows.empty()) return sched;
    int c_t = t.column("t_s"), c_k = t.column("kind"), c_b = t.column("branch_id");

    struct Raw {
        double t;
        std::string kind;
        int branch;
        int line;
    };
    std::vector<Raw> raws;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        raws.push_back({csv::to_double(t, r, c_t), t.rows[r][c_k],
                        static_cast<int>(csv::to_long(t, r, c_b)), t.row_lines[r]});

    double prev = -1e300;
    std::vector<std::size_t> open_faults;  // indices into sched.events
    for (const Raw& e : raws) {
        if (e.t < prev) throw ValidationError("event times not non-decreasing at t=" +
                                              std::to_string(e.t));
        prev = e.t;
        c.branch_index(e.branch);  // existence check
        if (e.kind == "fault") {
            sched.events.push_back({e.t, EventKind::FaultOnLine, e.branch});
            open_faults.push_back(sched.events.size() - 1);
        } else if (e.kind == "open") {
            // An open that clears an earlier fault on the same branch is a
            // clear-and-open; otherwise a plain switch opening.
            auto it = std::find_if(open_faults.begin(), open_faults.end(), [&](std::size_t i) {
                return sched.events[i].branch == e.branch;
            });
            if (it != open_faults.end()) {
                sched.events.push_back({e.t, EventKind::ClearAndOpenLine, e.branch});
                open_faults.erase(it);
            } else {
                sched.events.push_back({e.t, EventKind::OpenLine, e.branch});
            }
        } else {
            throw ParseError(path, e.line, "unknown event kind '" + e.kind + "'");
        }
    }
    if (!open_faults.empty())
        throw ValidationError("fault on branch " +
                              std::to_string(sched.events[open_faults.front()].branch) +
                              " is never cleared");
    return sched;
}

std::map<std::string, int> generator_bus_map(const GridCase& c) {
    std::map<std::string, int> m;
    for (const Generator& g : c.generators()) m[g.label] = g.bus;
    return m;
}

}  // namespace gridisle
