#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gridisle {

enum class BusKind { Slack, PV, PQ };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double v_mag = 1.0;   // pu setpoint (slack/PV) or initial guess
    double v_ang = 0.0;   // rad
    double p_load = 0.0;  // pu on system base
    double q_load = 0.0;
    double g_sh = 0.0;    // pu shunt admittance
    double b_sh = 0.0;
};

struct Branch {
    int id = 0;
    int from = 0;
    int to = 0;
    double r = 0.0;     // pu series
    double x = 0.0;
    double b_ch = 0.0;  // pu total charging
    bool in_service = true;
};

struct Generator {
    std::string label;   // G1..Gm
    int bus = 0;
    double p_set = 0.0;  // pu on system base
    double v_set = 1.0;  // pu
    double h = 0.0;      // s, on machine base
    double d = 0.0;      // pu damping
    double xd_p = 0.0;   // pu transient reactance, machine base
    double mva = 100.0;  // machine MVA
};

class GridCase {
public:
    GridCase() = default;
    GridCase(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
             std::vector<Generator> gens);

    double base_mva() const { return base_mva_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const std::vector<Generator>& generators() const { return gens_; }

    int n_buses() const { return static_cast<int>(buses_.size()); }
    int bus_index(int bus_id) const;          // throws ValidationError on unknown id
    const Bus& bus(int bus_id) const { return buses_[bus_index(bus_id)]; }
    int branch_index(int branch_id) const;    // throws ValidationError on unknown id
    const Branch& branch(int branch_id) const { return branches_[branch_index(branch_id)]; }
    int slack_index() const { return slack_index_; }
    std::optional<int> generator_at_bus(int bus_id) const;  // generator index

    // H and xd_p converted to the system base.
    double gen_h_sys(int gen_index) const;
    double gen_xdp_sys(int gen_index) const;

private:
    void validate();

    double base_mva_ = 100.0;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<Generator> gens_;
    std::unordered_map<int, int> bus_pos_;
    std::unordered_map<int, int> branch_pos_;
    std::unordered_map<int, int> gen_at_bus_;
    int slack_index_ = -1;
};

enum class EventKind { FaultOnLine, ClearAndOpenLine, OpenLine };

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::OpenLine;
    int branch = 0;
};

struct EventSchedule {
    std::vector<Event> events;
    bool empty() const { return events.empty(); }
    double last_time() const { return events.empty() ? 0.0 : events.back().t; }
};

// Reads bus.csv, branch.csv, gen.csv from a directory. Angles in files are
// degrees; everything internal is radians and per-unit on base_mva.
GridCase load_case(const std::string& dir, double base_mva = 100.0);
void save_case(const GridCase& c, const std::string& dir);

EventSchedule load_events(const std::string& path, const GridCase& c);

// Label -> bus id, ordered by generator file order.
std::map<std::string, int> generator_bus_map(const GridCase& c);

}  // namespace gridisle
