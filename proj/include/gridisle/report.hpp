#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridisle/coherency.hpp"
#include "gridisle/grid_model.hpp"
#include "gridisle/partition.hpp"
#include "gridisle/power_flow.hpp"
#include "gridisle/transient.hpp"

namespace gridisle {

void write_flows_csv(const std::string& path, const GridCase& c,
                     const std::vector<BranchFlow>& flows);

// Square matrix with bus-id header row/column, entries in kVA.
void write_smatrix_csv(const std::string& path, const GridCase& c, const SMatrix& m);
SMatrix load_smatrix_csv(const std::string& path, const GridCase& c);

void write_labeled_matrix_csv(const std::string& path, const std::string& corner,
                              const std::vector<std::string>& labels, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_labeled_matrix_csv(const std::string& path,
                                        std::vector<std::string>& labels);

void write_groups_txt(const std::string& path, const CoherencyGroups& groups);
CoherencyGroups load_groups_txt(const std::string& path);

void write_partition_json(const std::string& path, const IslandingResult& res);

void write_islands_dot(const std::string& path, const GridCase& c, const IslandPartition& part,
                       const Cutset& cut, const std::vector<int>& keep_branches);

void write_traj_csv(const std::string& path, const Trajectories& traj);

// Pairwise Pearson correlation of bus voltage-angle series over a trailing
// window; diagnostic only.
Eigen::MatrixXd bus_angle_correlation(const GridCase& c, const EventSchedule& events,
                                      const Trajectories& traj, double t_end, double window,
                                      const SimConfig& cfg);

}  // namespace gridisle
