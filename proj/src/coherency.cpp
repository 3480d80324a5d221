#include "gridisle/coherency.hpp"

#include <algorithm>
#include <cmath>

#include "gridisle/errors.hpp"
#include "gridisle/partition.hpp"

namespace gridisle {

void sorted_symmetric_eig(const Eigen::MatrixXd& a, Eigen::VectorXd& values,
                          Eigen::MatrixXd& vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericError("symmetric eigendecomposition failed");
    values = es.eigenvalues();  // ascending
    vectors = es.eigenvectors();
    for (int j = 0; j < vectors.cols(); ++j) {
        int imax = 0;
        vectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (vectors(imax, j) < 0) vectors.col(j) = -vectors.col(j);
    }
}

PsyncMatrix psync_matrix(const ReducedNetwork& red) {
    const int m = static_cast<int>(red.labels.size());
    PsyncMatrix out;
    out.labels = red.labels;
    out.p = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            const double bij = red.y(i, j).imag();
            out.p(i, j) = red.emf(i) * red.emf(j) * (-bij) *
                          std::cos(red.delta(i) - red.delta(j));
        }
    // Admittance-sign convention detection, evaluated at zero angle
    // separation so a mid-transient snapshot cannot invert it: if nearly all
    // -B_ij are negative the whole matrix is flipped; entries left negative
    // (pairs beyond ninety degrees) are clamped.
    int neg = 0, nonzero = 0;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            const double at_zero_sep = -red.y(i, j).imag();
            if (at_zero_sep != 0.0) {
                ++nonzero;
                if (at_zero_sep < 0.0) ++neg;
            }
        }
    if (nonzero > 0 && neg >= (9 * nonzero + 9) / 10) {
        out.p = -out.p;
        out.sign_flipped = true;
    }
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (out.p(i, j) < 0.0) {
                out.p(i, j) = 0.0;
                if (i < j) ++out.clamped;
            }
    // Keep exactly symmetric against clamp asymmetry.
    out.p = ((out.p + out.p.transpose()) / 2.0).eval();
    return out;
}

KsMatrix ks_matrix(const PsyncMatrix& p) {
    const int m = static_cast<int>(p.labels.size());
    double maxabs = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) maxabs = std::max(maxabs, std::abs(p.p(i, j)));
    if (maxabs == 0.0) throw NumericError("Ks undefined: all couplings are zero");
    KsMatrix ks;
    ks.labels = p.labels;
    ks.k = (p.p.cwiseAbs() / maxabs).eval();
    for (int i = 0; i < m; ++i) ks.k(i, i) = 1.0;
    return ks;
}

KsMatrix symmetrized_ks(const Eigen::MatrixXd& a, const std::vector<std::string>& labels) {
    KsMatrix ks;
    ks.labels = labels;
    ks.k = ((a + a.transpose()) / 2.0).eval();
    for (int i = 0; i < ks.k.rows(); ++i) ks.k(i, i) = 1.0;
    return ks;
}

NormalizedLaplacian normalized_laplacian(const Eigen::MatrixXd& w) {
    const int n = static_cast<int>(w.rows());
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ValidationError("weight matrix is not symmetric");
    if (w.minCoeff() < 0.0) throw ValidationError("weight matrix has negative entries");
    NormalizedLaplacian out;
    out.degree = w.rowwise().sum();
    for (int i = 0; i < n; ++i)
        if (out.degree(i) <= 0.0)
            throw ValidationError("isolated node " + std::to_string(i) + " (zero degree)");
    const Eigen::VectorXd dinv = out.degree.cwiseSqrt().cwiseInverse();
    out.l = Eigen::MatrixXd(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double dw = (i == j ? out.degree(i) : 0.0) - w(i, j);
            out.l(i, j) = dinv(i) * dw * dinv(j);
        }
    out.l = ((out.l + out.l.transpose()) / 2.0).eval();
    return out;
}

int choose_k(const NormalizedLaplacian& l, int k_max) {
    const int n = static_cast<int>(l.l.rows());
    if (k_max < 2) throw ValidationError("k_max must be at least 2");
    k_max = std::min(k_max, n);
    Eigen::VectorXd vals;
    Eigen::MatrixXd vecs;
    sorted_symmetric_eig(l.l, vals, vecs);
    const int hi = std::min(k_max, n - 1);
    if (hi < 2) return std::min(k_max, n);
    int best_k = 2;
    double best_gap = -1.0;
    for (int k = 2; k <= hi; ++k) {
        const double gap = vals(k) - vals(k - 1);  // lambda_{k+1} - lambda_k, 0-based
        if (gap > best_gap + 1e-15) {
            best_gap = gap;
            best_k = k;
        }
    }
    return best_k;
}

CoherencyGroups spectral_coherency(const KsMatrix& ks, int k) {
    const int m = static_cast<int>(ks.labels.size());
    if (k < 2) throw ValidationError("k must be at least 2");
    if (k > m) throw ValidationError("k exceeds generator count");

    Eigen::MatrixXd w = ks.k;
    for (int i = 0; i < m; ++i) w(i, i) = 0.0;
    const NormalizedLaplacian lap = normalized_laplacian(w);
    Eigen::VectorXd vals;
    Eigen::MatrixXd vecs;
    sorted_symmetric_eig(lap.l, vals, vecs);
    Eigen::MatrixXd u = vecs.leftCols(k);
    for (int i = 0; i < m; ++i) {
        const double nrm = u.row(i).norm();
        if (nrm > 0) u.row(i) /= nrm;
    }

    // Deterministic farthest-point seeding, then PAM.
    std::vector<int> node_ids(m);
    for (int i = 0; i < m; ++i) node_ids[i] = i;
    std::vector<int> seeds;
    {
        int first = 0;
        double best = -1.0;
        for (int i = 0; i < m; ++i)
            if (u.row(i).squaredNorm() > best + 1e-15) {
                best = u.row(i).squaredNorm();
                first = i;
            }
        seeds.push_back(first);
        while (static_cast<int>(seeds.size()) < k) {
            int pick = -1;
            double bestd = -1.0;
            for (int i = 0; i < m; ++i) {
                if (std::find(seeds.begin(), seeds.end(), i) != seeds.end()) continue;
                double dmin = 1e300;
                for (int s : seeds) dmin = std::min(dmin, (u.row(i) - u.row(s)).norm());
                if (dmin > bestd + 1e-15) {
                    bestd = dmin;
                    pick = i;
                }
            }
            seeds.push_back(pick);
        }
    }
    const std::vector<int> labels_idx = kmedoids(u, k, seeds, node_ids);

    std::vector<std::vector<std::string>> groups(k);
    for (int i = 0; i < m; ++i) groups[labels_idx[i]].push_back(ks.labels[i]);
    std::vector<std::vector<std::string>> nonempty;
    for (auto& g : groups)
        if (!g.empty()) nonempty.push_back(std::move(g));
    // canonical: order groups by their first (lowest-position) member
    std::vector<int> first_pos(nonempty.size());
    for (std::size_t gi = 0; gi < nonempty.size(); ++gi) {
        int lo = m;
        for (const std::string& lbl : nonempty[gi])
            lo = std::min(lo, static_cast<int>(std::find(ks.labels.begin(), ks.labels.end(), lbl) -
                                               ks.labels.begin()));
        first_pos[gi] = lo;
    }
    std::vector<std::size_t> order(nonempty.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return first_pos[a] < first_pos[b]; });
    CoherencyGroups out;
    for (std::size_t i : order) out.groups.push_back(std::move(nonempty[i]));
    return out;
}

}  // namespace gridisle
