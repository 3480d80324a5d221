#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridisle/coherency.hpp"
#include "gridisle/grid_model.hpp"
#include "gridisle/power_flow.hpp"

namespace gridisle {

struct GraphEdge {
    int branch_id = 0;
    int a = 0, b = 0;   // bus ids
    double w = 0.0;     // kVA, >= 0
};

// Undirected bus graph weighted by apparent power. Weights are kept in kVA so
// cut totals compare directly with reported figures.
class WeightedGraph {
public:
    WeightedGraph() = default;
    WeightedGraph(std::vector<int> nodes, std::vector<GraphEdge> edges);

    const std::vector<int>& nodes() const { return nodes_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int node) const;
    double weight(int a, int b) const;  // 0 when no edge
    bool has_node(int node) const { return pos_.count(node) != 0; }
    int index(int node) const { return pos_.at(node); }
    double max_weight() const { return max_w_; }

private:
    std::vector<int> nodes_;
    std::vector<GraphEdge> edges_;
    std::map<int, int> pos_;
    std::map<int, std::vector<int>> adj_;
    std::map<std::pair<int, int>, double> w_;
    double max_w_ = 0.0;
};

WeightedGraph build_graph(const SMatrix& smatrix, const GridCase& c);
WeightedGraph build_graph(const SMatrix& smatrix, const GridCase& c, const Topology& topo);

struct ConstraintSet {
    std::set<std::pair<int, int>> ml_pairs;        // unordered bus pairs, a < b
    std::set<std::pair<int, int>> cl_pairs;
    std::vector<int> keep_branches;                // branch ids that must not be cut
    std::vector<std::vector<int>> ml_groups;       // union-find closure, incl. singletons of reps
    std::vector<int> representatives;              // one bus per coherency group, group order
};

ConstraintSet build_constraints(const CoherencyGroups& groups,
                                const std::map<std::string, int>& gen_bus,
                                const std::vector<int>& keep_branches, const GridCase& c);

struct ProjectionBasis {
    Eigen::MatrixXd q;            // n x p, orthonormal columns
    std::vector<int> node_ids;    // row order
};

ProjectionBasis projection_basis(const ConstraintSet& cons, const std::vector<int>& node_ids);

struct SpectralEmbedding {
    Eigen::MatrixXd j;            // n x k rows, must-linked rows identical
    Eigen::VectorXd eigenvalues;  // ascending, size k
    std::vector<int> node_ids;
};

// Generalized problem Q^T (D - W) Q u = lambda Q^T D Q u on the floored
// weights, J = Q U. With Q = I this is the plain spectral embedding of the
// graph.
SpectralEmbedding constrained_embedding(const WeightedGraph& g, const ProjectionBasis& q, int k);

// Deterministic PAM. pins maps row index -> cluster, fixing assignments of
// constraint supernodes; tie-breaks go to the lower node id.
std::vector<int> kmedoids(const Eigen::MatrixXd& points, int k, const std::vector<int>& seeds,
                          const std::vector<int>& node_ids,
                          const std::map<int, int>& pins = {});

struct IslandPartition {
    std::vector<std::vector<int>> islands;  // sorted bus ids, islands ordered by smallest member
    int island_of(int bus) const;
};

// Reattaches stray components and reconnects split must-link groups; anchors
// (one bus per island, optional) are never moved.
IslandPartition enforce_connectivity(const IslandPartition& part, const WeightedGraph& g,
                                     const std::vector<std::vector<int>>& ml_groups = {},
                                     const std::vector<int>& anchors = {});

struct CutBranch {
    int branch_id = 0;
    int from = 0, to = 0;
    double s_kva = 0.0;
};

struct Cutset {
    std::vector<CutBranch> branches;
    double total_disruption = 0.0;            // kVA
    std::vector<double> island_p_mw;          // generation minus load per island
    std::vector<double> island_q_mvar;        // negated load (no reactive setpoints)
};

Cutset cutset(const IslandPartition& part, const WeightedGraph& g,
              const std::vector<int>& keep_branches, const GridCase* c = nullptr);

struct IslandingResult {
    IslandPartition partition;
    Cutset cut;
    SpectralEmbedding embedding;
    ConstraintSet constraints;
};

IslandingResult island(const SMatrix& smatrix, const GridCase& c, const CoherencyGroups& groups,
                       const std::vector<int>& keep_branches);
IslandingResult island(const SMatrix& smatrix, const GridCase& c, const Topology& topo,
                       const CoherencyGroups& groups, const std::vector<int>& keep_branches);

}  // namespace gridisle
