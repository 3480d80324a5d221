#include "gridisle/partition.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "gridisle/errors.hpp"

namespace gridisle {

namespace {

// Relative floor applied to edge weights in the embedding graph only; keeps
// zero-flow branches visible to the spectral step without touching the cut
// objective. Relative so scaling all weights leaves the partition unchanged.
constexpr double kEmbedFloorFraction = 1e-6;
constexpr double kCostTol = 1e-12;

std::pair<int, int> ordered(int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

}  // namespace

WeightedGraph::WeightedGraph(std::vector<int> nodes, std::vector<GraphEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) pos_[nodes_[i]] = static_cast<int>(i);
    for (const GraphEdge& e : edges_) {
        if (e.w < 0) throw ValidationError("negative edge weight");
        if (e.a == e.b) throw ValidationError("self loop on bus " + std::to_string(e.a));
        if (!pos_.count(e.a) || !pos_.count(e.b))
            throw ValidationError("edge endpoint not in node set");
        adj_[e.a].push_back(e.b);
        adj_[e.b].push_back(e.a);
        w_[ordered(e.a, e.b)] += e.w;
        max_w_ = std::max(max_w_, w_[ordered(e.a, e.b)]);
    }
    for (auto& [node, nbrs] : adj_) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
}

const std::vector<int>& WeightedGraph::neighbors(int node) const {
    static const std::vector<int> kEmpty;
    auto it = adj_.find(node);
    return it == adj_.end() ? kEmpty : it->second;
}

double WeightedGraph::weight(int a, int b) const {
    auto it = w_.find(ordered(a, b));
    return it == w_.end() ? 0.0 : it->second;
}

WeightedGraph build_graph(const SMatrix& smatrix, const GridCase& c) {
    return build_graph(smatrix, c, Topology{});
}

WeightedGraph build_graph(const SMatrix& smatrix, const GridCase& c, const Topology& topo) {
    if (smatrix.s.rows() != c.n_buses())
        throw ValidationError("apparent power matrix does not match bus count");
    const double to_kva = smatrix.unit == SUnit::PerUnit ? c.base_mva() * 1000.0 : 1.0;
    std::vector<int> nodes;
    for (const Bus& b : c.buses()) nodes.push_back(b.id);
    std::vector<GraphEdge> edges;
    for (std::size_t p = 0; p < c.branches().size(); ++p) {
        const Branch& br = c.branches()[p];
        if (!topo.live(c, static_cast<int>(p))) continue;
        const int i = c.bus_index(br.from), j = c.bus_index(br.to);
        // Parallel branches share the printed pair total evenly.
        int parallel = 0;
        for (std::size_t q = 0; q < c.branches().size(); ++q) {
            const Branch& other = c.branches()[q];
            if (!topo.live(c, static_cast<int>(q))) continue;
            if (ordered(other.from, other.to) == ordered(br.from, br.to)) ++parallel;
        }
        edges.push_back({br.id, br.from, br.to, smatrix.s(i, j) * to_kva / parallel});
    }
    return WeightedGraph(std::move(nodes), std::move(edges));
}

namespace {

class UnionFind {
public:
    explicit UnionFind(const std::vector<int>& ids) {
        for (int id : ids) parent_[id] = id;
    }
    int find(int x) {
        int r = x;
        while (parent_[r] != r) r = parent_[r];
        while (parent_[x] != r) {
            int nxt = parent_[x];
            parent_[x] = r;
            x = nxt;
        }
        return r;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);  // smaller id becomes the root
        parent_[b] = a;
    }

private:
    std::map<int, int> parent_;
};

}  // namespace

ConstraintSet build_constraints(const CoherencyGroups& groups,
                                const std::map<std::string, int>& gen_bus,
                                const std::vector<int>& keep_branches, const GridCase& c) {
    ConstraintSet cons;
    cons.keep_branches = keep_branches;

    std::vector<std::vector<int>> group_buses;
    for (const auto& g : groups.groups) {
        std::vector<int> buses;
        for (const std::string& lbl : g) {
            auto it = gen_bus.find(lbl);
            if (it == gen_bus.end())
                throw ValidationError("group references unknown generator " + lbl);
            buses.push_back(it->second);
        }
        if (buses.empty()) throw ValidationError("empty coherency group");
        group_buses.push_back(buses);
        for (std::size_t i = 0; i < buses.size(); ++i)
            for (std::size_t j = i + 1; j < buses.size(); ++j)
                cons.ml_pairs.insert(ordered(buses[i], buses[j]));
        // Representative: the first (lowest-position) label of the group.
        cons.representatives.push_back(buses.front());
    }
    for (int bid : keep_branches) {
        const Branch& br = c.branch(bid);
        cons.ml_pairs.insert(ordered(br.from, br.to));
    }
    for (std::size_t i = 0; i < cons.representatives.size(); ++i)
        for (std::size_t j = i + 1; j < cons.representatives.size(); ++j)
            cons.cl_pairs.insert(ordered(cons.representatives[i], cons.representatives[j]));

    // Transitive closure and feasibility.
    std::vector<int> ids;
    for (const Bus& b : c.buses()) ids.push_back(b.id);
    UnionFind uf(ids);
    for (const auto& [a, b] : cons.ml_pairs) uf.unite(a, b);
    for (const auto& [a, b] : cons.cl_pairs)
        if (uf.find(a) == uf.find(b))
            throw ConstraintError("infeasible constraints: must-link closure merges cannot-link "
                                  "pair (" + std::to_string(a) + "," + std::to_string(b) + ")");

    std::map<int, std::vector<int>> closure;
    for (int id : ids) closure[uf.find(id)].push_back(id);
    for (auto& [root, members] : closure)
        if (members.size() > 1 ||
            std::find(cons.representatives.begin(), cons.representatives.end(), members.front()) !=
                cons.representatives.end())
            cons.ml_groups.push_back(members);
    return cons;
}

ProjectionBasis projection_basis(const ConstraintSet& cons, const std::vector<int>& node_ids) {
    UnionFind uf(node_ids);
    for (const auto& [a, b] : cons.ml_pairs) uf.unite(a, b);
    std::map<int, std::vector<int>> groups;  // root -> member positions
    std::map<int, int> pos;
    for (std::size_t i = 0; i < node_ids.size(); ++i) pos[node_ids[i]] = static_cast<int>(i);
    for (int id : node_ids) groups[uf.find(id)].push_back(pos[id]);

    ProjectionBasis basis;
    basis.node_ids = node_ids;
    basis.q = Eigen::MatrixXd::Zero(static_cast<int>(node_ids.size()),
                                    static_cast<int>(groups.size()));
    int col = 0;
    for (const auto& [root, members] : groups) {
        const double v = 1.0 / std::sqrt(static_cast<double>(members.size()));
        for (int r : members) basis.q(r, col) = v;
        ++col;
    }
    return basis;
}

SpectralEmbedding constrained_embedding(const WeightedGraph& g, const ProjectionBasis& q, int k) {
    const int n = static_cast<int>(g.nodes().size());
    if (k > q.q.cols()) throw ValidationError("k exceeds projected dimension");

    const double floor = g.max_weight() > 0 ? kEmbedFloorFraction * g.max_weight() : 1.0;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (const GraphEdge& e : g.edges()) {
        const int i = g.index(e.a), j = g.index(e.b);
        const double we = std::max(e.w, floor);
        w(i, j) += we;
        w(j, i) += we;
    }
    Eigen::VectorXd deg = w.rowwise().sum().cwiseMax(1e-12);

    const Eigen::MatrixXd lap = Eigen::MatrixXd(deg.asDiagonal()) - w;
    const Eigen::MatrixXd a = q.q.transpose() * lap * q.q;
    const Eigen::MatrixXd b = q.q.transpose() * Eigen::MatrixXd(deg.asDiagonal()) * q.q;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
        (a + a.transpose()) / 2.0, (b + b.transpose()) / 2.0);
    if (ges.info() != Eigen::Success) throw NumericError("generalized eigensolver failed");

    Eigen::MatrixXd u = ges.eigenvectors().leftCols(k);
    const Eigen::VectorXd vals = ges.eigenvalues().head(k);
    for (int j = 0; j < k; ++j) {
        int imax = 0;
        u.col(j).cwiseAbs().maxCoeff(&imax);
        if (u(imax, j) < 0) u.col(j) = -u.col(j);
        const Eigen::VectorXd resid = a * u.col(j) - vals(j) * (b * u.col(j));
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        if (resid.cwiseAbs().maxCoeff() > 1e-8 * scale)
            throw NumericError("eigenpair residual exceeds tolerance");
    }

    SpectralEmbedding emb;
    emb.j = q.q * u;
    emb.eigenvalues = vals;
    emb.node_ids = q.node_ids;
    return emb;
}

std::vector<int> kmedoids(const Eigen::MatrixXd& points, int k, const std::vector<int>& seeds,
                          const std::vector<int>& node_ids, const std::map<int, int>& pins) {
    const int n = static_cast<int>(points.rows());
    if (static_cast<int>(seeds.size()) != k) throw ValidationError("need exactly k seeds");
    std::map<int, int> pos;
    for (int i = 0; i < n; ++i) pos[node_ids[i]] = i;
    std::vector<int> med;
    for (int s : seeds) {
        auto it = pos.find(s);
        if (it == pos.end()) throw ValidationError("seed node not in point set");
        if (std::count(seeds.begin(), seeds.end(), s) > 1)
            throw ValidationError("duplicate seed " + std::to_string(s));
        med.push_back(it->second);
    }

    Eigen::MatrixXd dist(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dist(i, j) = (points.row(i) - points.row(j)).norm();

    std::vector<int> pin_row(n, -1);
    for (const auto& [node, cluster] : pins) {
        auto it = pos.find(node);
        if (it != pos.end()) pin_row[it->second] = cluster;
    }

    auto cost = [&](const std::vector<int>& meds) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            if (pin_row[i] >= 0) {
                total += dist(i, meds[pin_row[i]]);
            } else {
                double dmin = dist(i, meds[0]);
                for (int m = 1; m < k; ++m) dmin = std::min(dmin, dist(i, meds[m]));
                total += dmin;
            }
        }
        return total;
    };

    double cur = cost(med);
    while (true) {
        double best_impr = kCostTol;
        int best_m = -1, best_h = -1;
        for (int mi = 0; mi < k; ++mi) {
            for (int h = 0; h < n; ++h) {
                if (std::find(med.begin(), med.end(), h) != med.end()) continue;
                std::vector<int> trial = med;
                trial[mi] = h;
                const double impr = cur - cost(trial);
                bool take = impr > best_impr + kCostTol;
                if (!take && best_h >= 0 && std::abs(impr - best_impr) <= kCostTol)
                    take = std::make_pair(node_ids[h], node_ids[med[mi]]) <
                           std::make_pair(node_ids[best_h], node_ids[med[best_m]]);
                if (take) {
                    best_impr = std::max(impr, best_impr);
                    best_m = mi;
                    best_h = h;
                }
            }
        }
        if (best_h < 0) break;
        med[best_m] = best_h;
        cur = cost(med);
    }

    std::vector<int> labels(n, 0);
    for (int i = 0; i < n; ++i) {
        if (pin_row[i] >= 0) {
            labels[i] = pin_row[i];
            continue;
        }
        int bm = 0;
        double bd = dist(i, med[0]);
        for (int m = 1; m < k; ++m) {
            const double d = dist(i, med[m]);
            if (d < bd - 1e-15 || (std::abs(d - bd) <= 1e-15 && node_ids[med[m]] < node_ids[med[bm]])) {
                bd = d;
                bm = m;
            }
        }
        labels[i] = bm;
    }
    return labels;
}

int IslandPartition::island_of(int bus) const {
    for (std::size_t i = 0; i < islands.size(); ++i)
        if (std::binary_search(islands[i].begin(), islands[i].end(), bus))
            return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::set<int>> component_split(const std::set<int>& nodes, const WeightedGraph& g) {
    std::vector<std::set<int>> comps;
    std::set<int> seen;
    for (int s : nodes) {
        if (seen.count(s)) continue;
        std::set<int> comp;
        std::vector<int> stack{s};
        seen.insert(s);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            comp.insert(u);
            for (int v : g.neighbors(u))
                if (nodes.count(v) && !seen.count(v)) {
                    seen.insert(v);
                    stack.push_back(v);
                }
        }
        comps.push_back(std::move(comp));
    }
    return comps;
}

struct RepairState {
    std::vector<std::set<int>> islands;
    int island_of(int bus) const {
        for (std::size_t i = 0; i < islands.size(); ++i)
            if (islands[i].count(bus)) return static_cast<int>(i);
        return -1;
    }
};

// Moves stray components into the best adjacent island. A component may carry
// whole must-link groups along but must never split one.
bool reattach_pass(RepairState& st, const WeightedGraph& g,
                   const std::vector<std::set<int>>& ml_groups, const std::vector<int>& anchors) {
    const int k = static_cast<int>(st.islands.size());
    for (int ii = 0; ii < k; ++ii) {
        auto comps = component_split(st.islands[ii], g);
        if (comps.size() <= 1) continue;
        const int anchor_bus = ii < static_cast<int>(anchors.size()) ? anchors[ii] : -1;
        const std::set<int>* anchor = nullptr;
        if (anchor_bus >= 0)
            for (const auto& comp : comps)
                if (comp.count(anchor_bus)) anchor = &comp;
        if (!anchor) {
            for (const auto& comp : comps)
                if (!anchor || comp.size() > anchor->size() ||
                    (comp.size() == anchor->size() && *comp.begin() < *anchor->begin()))
                    anchor = &comp;
        }
        for (const auto& comp : comps) {
            if (&comp == anchor) continue;
            if (anchor_bus >= 0 && comp.count(anchor_bus)) continue;
            bool splits_group = false;
            for (const auto& grp : ml_groups) {
                bool inside = false, outside = false;
                for (int m : grp) {
                    if (comp.count(m)) inside = true;
                    else if (st.islands[ii].count(m)) outside = true;
                }
                if (inside && outside) {
                    splits_group = true;
                    break;
                }
            }
            if (splits_group) continue;

            std::map<int, double> gain;
            for (int u : comp)
                for (int v : g.neighbors(u)) {
                    if (comp.count(v)) continue;
                    const int jj = st.island_of(v);
                    if (jj >= 0 && jj != ii) gain[jj] += g.weight(u, v);
                }
            if (gain.empty()) continue;
            int best = -1;
            for (const auto& [jj, w] : gain)
                if (best < 0 || w > gain[best] + kCostTol ||
                    (std::abs(w - gain[best]) <= kCostTol && jj < best))
                    best = jj;
            for (int u : comp) st.islands[ii].erase(u);
            st.islands[best].insert(comp.begin(), comp.end());
            return true;
        }
    }
    return false;
}

// Reconnects a must-link group split across components of its island by
// pulling the nodes of a shortest connecting path (members of other groups
// are never pulled).
bool connect_groups_pass(RepairState& st, const WeightedGraph& g,
                         const std::vector<std::set<int>>& ml_groups) {
    for (const auto& grp : ml_groups) {
        const int ii = st.island_of(*grp.begin());
        if (ii < 0) continue;
        auto comps = component_split(st.islands[ii], g);
        std::vector<const std::set<int>*> holding;
        for (const auto& comp : comps)
            for (int m : grp)
                if (comp.count(m)) {
                    holding.push_back(&comp);
                    break;
                }
        if (holding.size() <= 1) continue;

        std::set<int> forbidden;
        for (const auto& other : ml_groups)
            if (&other != &grp) forbidden.insert(other.begin(), other.end());

        const std::set<int>& src = *holding.front();
        std::set<int> targets;
        for (std::size_t h = 1; h < holding.size(); ++h)
            targets.insert(holding[h]->begin(), holding[h]->end());

        std::map<int, int> prev;
        std::set<int> seen(src.begin(), src.end());
        std::vector<int> frontier(src.begin(), src.end());
        std::sort(frontier.begin(), frontier.end());
        int found = -1;
        while (!frontier.empty() && found < 0) {
            std::vector<int> next;
            for (int u : frontier) {
                for (int v : g.neighbors(u)) {
                    if (seen.count(v) || forbidden.count(v)) continue;
                    seen.insert(v);
                    prev[v] = u;
                    if (targets.count(v)) {
                        found = v;
                        break;
                    }
                    next.push_back(v);
                }
                if (found >= 0) break;
            }
            std::sort(next.begin(), next.end());
            frontier = std::move(next);
        }
        if (found < 0)
            throw ConstraintError("cannot connect must-link group inside its island");
        bool changed = false;
        for (int v = found; !src.count(v);) {
            if (!st.islands[ii].count(v)) {
                const int jj = st.island_of(v);
                if (jj >= 0) st.islands[jj].erase(v);
                st.islands[ii].insert(v);
                changed = true;
            }
            auto it = prev.find(v);
            if (it == prev.end()) break;
            v = it->second;
        }
        if (changed) return true;
    }
    return false;
}

// Local improvement: moves single boundary nodes or adjacent pairs between
// islands whenever the true cut weight strictly decreases and both islands
// stay connected. Constraint nodes stay put.
void refine_cut(RepairState& st, const WeightedGraph& g, const std::set<int>& pinned) {
    const int k = static_cast<int>(st.islands.size());
    const double tol = kCostTol * std::max(g.max_weight(), 1.0);

    auto delta_cut = [&](const std::set<int>& x, int from, int to) {
        double d = 0.0;
        for (int u : x)
            for (int v : g.neighbors(u)) {
                if (x.count(v)) continue;
                if (st.islands[from].count(v)) d += g.weight(u, v);
                else if (st.islands[to].count(v)) d -= g.weight(u, v);
            }
        return d;
    };
    auto touches = [&](const std::set<int>& x, int to) {
        for (int u : x)
            for (int v : g.neighbors(u))
                if (!x.count(v) && st.islands[to].count(v)) return true;
        return false;
    };
    auto remainder_connected = [&](const std::set<int>& x, int from) {
        std::set<int> rem;
        for (int u : st.islands[from])
            if (!x.count(u)) rem.insert(u);
        if (rem.empty()) return false;
        return component_split(rem, g).size() == 1;
    };

    while (true) {
        double best_d = -tol;
        std::set<int> best_x;
        int best_to = -1;
        auto consider = [&](const std::set<int>& x, int to) {
            const int from = st.island_of(*x.begin());
            if (from == to) return;
            for (int u : x)
                if (st.island_of(u) != from) return;
            const double d = delta_cut(x, from, to);
            if (d >= best_d) return;
            if (!touches(x, to)) return;
            if (!remainder_connected(x, from)) return;
            best_d = d;
            best_x = x;
            best_to = to;
        };
        for (const GraphEdge& e : g.edges()) {
            const int ia = st.island_of(e.a), ib = st.island_of(e.b);
            if (ia != ib) {
                if (!pinned.count(e.a)) consider({e.a}, ib);
                if (!pinned.count(e.b)) consider({e.b}, ia);
            } else if (!pinned.count(e.a) && !pinned.count(e.b)) {
                for (int to = 0; to < k; ++to)
                    if (to != ia) consider({e.a, e.b}, to);
            }
        }
        if (best_to < 0) break;
        const int from = st.island_of(*best_x.begin());
        for (int u : best_x) st.islands[from].erase(u);
        st.islands[best_to].insert(best_x.begin(), best_x.end());
    }
}

IslandPartition to_partition(const RepairState& st) {
    IslandPartition part;
    for (const auto& isl : st.islands) part.islands.emplace_back(isl.begin(), isl.end());
    std::sort(part.islands.begin(), part.islands.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return part;
}

RepairState repair(std::vector<std::set<int>> islands, const WeightedGraph& g,
                   const std::vector<std::set<int>>& ml_groups, const std::vector<int>& anchors) {
    RepairState st{std::move(islands)};
    for (int round = 0; round < 200; ++round) {
        const bool a = connect_groups_pass(st, g, ml_groups);
        const bool b = reattach_pass(st, g, ml_groups, anchors);
        if (!a && !b) {
            for (std::size_t ii = 0; ii < st.islands.size(); ++ii) {
                if (st.islands[ii].empty()) throw ConstraintError("island became empty in repair");
                if (component_split(st.islands[ii], g).size() > 1)
                    throw ConstraintError("island " + std::to_string(ii) +
                                          " has an unreachable fragment");
            }
            return st;
        }
    }
    throw ConstraintError("connectivity repair did not converge");
}

}  // namespace

IslandPartition enforce_connectivity(const IslandPartition& part, const WeightedGraph& g,
                                     const std::vector<std::vector<int>>& ml_groups,
                                     const std::vector<int>& anchors) {
    std::vector<std::set<int>> islands;
    for (const auto& isl : part.islands) islands.emplace_back(isl.begin(), isl.end());
    std::vector<std::set<int>> groups;
    for (const auto& grp : ml_groups) groups.emplace_back(grp.begin(), grp.end());
    return to_partition(repair(std::move(islands), g, groups, anchors));
}

Cutset cutset(const IslandPartition& part, const WeightedGraph& g,
              const std::vector<int>& keep_branches, const GridCase* c) {
    Cutset cut;
    for (const GraphEdge& e : g.edges()) {
        const int ia = part.island_of(e.a), ib = part.island_of(e.b);
        if (ia < 0 || ib < 0)
            throw ValidationError("partition does not cover bus " +
                                  std::to_string(ia < 0 ? e.a : e.b));
        if (ia == ib) continue;
        if (std::find(keep_branches.begin(), keep_branches.end(), e.branch_id) !=
            keep_branches.end())
            throw ConstraintError("keep branch " + std::to_string(e.branch_id) +
                                  " crosses the partition");
        cut.branches.push_back({e.branch_id, e.a, e.b, e.w});
        cut.total_disruption += e.w;
    }
    std::sort(cut.branches.begin(), cut.branches.end(),
              [](const CutBranch& a, const CutBranch& b) { return a.branch_id < b.branch_id; });
    if (c) {
        cut.island_p_mw.assign(part.islands.size(), 0.0);
        cut.island_q_mvar.assign(part.islands.size(), 0.0);
        for (std::size_t i = 0; i < part.islands.size(); ++i) {
            for (int bus : part.islands[i]) {
                const Bus& b = c->bus(bus);
                cut.island_p_mw[i] -= b.p_load * c->base_mva();
                cut.island_q_mvar[i] -= b.q_load * c->base_mva();
                if (auto gi = c->generator_at_bus(bus))
                    cut.island_p_mw[i] += c->generators()[*gi].p_set * c->base_mva();
            }
        }
    }
    return cut;
}

IslandingResult island(const SMatrix& smatrix, const GridCase& c, const CoherencyGroups& groups,
                       const std::vector<int>& keep_branches) {
    return island(smatrix, c, Topology{}, groups, keep_branches);
}

IslandingResult island(const SMatrix& smatrix, const GridCase& c, const Topology& topo,
                       const CoherencyGroups& groups, const std::vector<int>& keep_branches) {
    const int k = static_cast<int>(groups.size());
    if (k < 2) throw ValidationError("need at least two coherency groups");

    IslandingResult res;
    const WeightedGraph g = build_graph(smatrix, c, topo);
    res.constraints = build_constraints(groups, generator_bus_map(c), keep_branches, c);
    const ProjectionBasis q = projection_basis(res.constraints, g.nodes());
    res.embedding = constrained_embedding(g, q, k);

    // Pin every closure group that contains a representative to that
    // representative's cluster; seed the medoids at the representatives.
    std::map<int, int> pins;
    for (int ci = 0; ci < k; ++ci) {
        const int rep = res.constraints.representatives[ci];
        pins[rep] = ci;
        for (const auto& grp : res.constraints.ml_groups)
            if (std::find(grp.begin(), grp.end(), rep) != grp.end())
                for (int m : grp) pins[m] = ci;
    }
    const std::vector<int> labels =
        kmedoids(res.embedding.j, k, res.constraints.representatives, g.nodes(), pins);

    std::vector<std::set<int>> islands(k);
    for (std::size_t i = 0; i < g.nodes().size(); ++i) islands[labels[i]].insert(g.nodes()[i]);

    std::vector<std::set<int>> ml_groups;
    for (const auto& grp : res.constraints.ml_groups) ml_groups.emplace_back(grp.begin(), grp.end());
    RepairState st = repair(std::move(islands), g, ml_groups, res.constraints.representatives);

    std::set<int> pinned;
    for (const auto& grp : ml_groups) pinned.insert(grp.begin(), grp.end());
    for (int rep : res.constraints.representatives) pinned.insert(rep);
    refine_cut(st, g, pinned);

    // Post-hoc verification: must-link is structural, cannot-link is checked.
    for (const auto& [a, b] : res.constraints.cl_pairs)
        if (st.island_of(a) == st.island_of(b))
            throw ConstraintError("cannot-link pair (" + std::to_string(a) + "," +
                                  std::to_string(b) + ") ended in one island");
    for (const auto& [a, b] : res.constraints.ml_pairs)
        if (st.island_of(a) != st.island_of(b))
            throw ConstraintError("must-link pair split across islands");

    // Canonical island order; clusters keep no meaning past this point.
    IslandPartition part = to_partition(st);
    res.partition = part;
    res.cut = cutset(part, g, keep_branches, &c);
    return res;
}

}  // namespace gridisle
