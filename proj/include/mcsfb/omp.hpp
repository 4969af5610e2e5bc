#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "mcsfb/errors.hpp"

namespace mcsfb {

struct OmpResult {
    Eigen::VectorXd coefficients;       ///< length = number of atoms, at most T nonzeros
    std::vector<int> support;           ///< atoms in selection order
    std::vector<double> residual_norms; ///< after each iteration
};

/// Orthogonal matching pursuit: T rounds of picking the atom most correlated
/// with the residual, then refitting all selected atoms by least squares.
/// The refit keeps an incremental QR of the selected columns
/// (Gram-Schmidt with reorthogonalization). Atoms should have unit norm.
inline OmpResult omp_sparse_code(const Eigen::MatrixXd& D, const Eigen::VectorXd& f, int T)
{
    require_same_length(D.rows(), f.size(), "omp signal");
    if (T < 1 || T > D.cols())
        throw InputError("omp sparsity must satisfy 1 <= T <= number of atoms");
    const Eigen::Index n = D.rows();
    OmpResult out;
    out.coefficients = Eigen::VectorXd::Zero(D.cols());
    Eigen::MatrixXd Q(n, T);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(T, T);
    Eigen::VectorXd qtf(T);
    std::vector<char> used(static_cast<size_t>(D.cols()), 0);
    Eigen::VectorXd residual = f;
    const double scale = std::max(f.norm(), 1e-300);
    int k = 0;
    for (int it = 0; it < T; ++it) {
        const Eigen::VectorXd corr = D.transpose() * residual;
        Eigen::Index best = -1;
        double best_val = -1.0;
        for (Eigen::Index j = 0; j < D.cols(); ++j)
            if (!used[j] && std::abs(corr[j]) > best_val) {
                best_val = std::abs(corr[j]);
                best = j;
            }
        Eigen::VectorXd v = D.col(best);
        Eigen::VectorXd r(k);
        r.setZero();
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXd proj = Q.leftCols(k).transpose() * v;
            v -= Q.leftCols(k) * proj;
            r += proj;
        }
        const double vn = v.norm();
        used[best] = 1;
        if (vn <= 1e-12 * D.col(best).norm()) {
            // atom already in the span; nothing left to fit
            out.residual_norms.push_back(residual.norm());
            continue;
        }
        Q.col(k) = v / vn;
        R.col(k).head(k) = r;
        R(k, k) = vn;
        qtf[k] = Q.col(k).dot(f);
        out.support.push_back(static_cast<int>(best));
        ++k;
        residual -= Q.col(k - 1) * qtf[k - 1];
        out.residual_norms.push_back(residual.norm());
        if (residual.norm() <= 1e-15 * scale)
            break;
    }
    const Eigen::VectorXd x = R.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(qtf.head(k));
    for (int t = 0; t < k; ++t)
        out.coefficients[out.support[t]] = x[t];
    return out;
}

} // namespace mcsfb
