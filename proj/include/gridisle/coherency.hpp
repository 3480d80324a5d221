#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridisle/power_flow.hpp"

namespace gridisle {

// Pairwise synchronizing power coefficients; symmetric, zero diagonal.
struct PsyncMatrix {
    Eigen::MatrixXd p;                // pu power per radian
    std::vector<std::string> labels;
    bool sign_flipped = false;        // convention detection fired
    int clamped = 0;                  // negative entries clamped to zero
};

struct KsMatrix {
    Eigen::MatrixXd k;                // in [0,1], unit diagonal
    std::vector<std::string> labels;
};

struct NormalizedLaplacian {
    Eigen::MatrixXd l;       // D^(-1/2) (D - W) D^(-1/2)
    Eigen::VectorXd degree;  // row sums of W
};

struct CoherencyGroups {
    // Each group holds generator labels; groups ordered by their smallest
    // member position, members in case order.
    std::vector<std::vector<std::string>> groups;
    std::size_t size() const { return groups.size(); }
};

PsyncMatrix psync_matrix(const ReducedNetwork& red);

KsMatrix ks_matrix(const PsyncMatrix& p);

// Symmetrizes as (A + A^T)/2 and forces unit diagonal; for matrices published
// with print noise.
KsMatrix symmetrized_ks(const Eigen::MatrixXd& a, const std::vector<std::string>& labels);

NormalizedLaplacian normalized_laplacian(const Eigen::MatrixXd& w);

// Eigengap heuristic: argmax over 2..k_max of lambda_{k+1} - lambda_k.
int choose_k(const NormalizedLaplacian& l, int k_max);

CoherencyGroups spectral_coherency(const KsMatrix& ks, int k);

// Ascending eigenvalues with deterministically signed eigenvectors.
void sorted_symmetric_eig(const Eigen::MatrixXd& a, Eigen::VectorXd& values,
                          Eigen::MatrixXd& vectors);

}  // namespace gridisle
