#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcsfb/coefficients.hpp"
#include "mcsfb/graph.hpp"

namespace mcsfb {

inline constexpr int kDefaultExactCap = 5000;
inline constexpr double kPivotTolerance = 1e-12;
inline constexpr double kSingularValueTolerance = 1e-10;

/// L = U diag(lambda) U^T with ascending eigenvalues.
struct EigenDecomposition {
    Eigen::MatrixXd U;
    Eigen::VectorXd lambda;

    int size() const { return static_cast<int>(lambda.size()); }
    double lambda_max() const { return lambda.size() ? lambda[lambda.size() - 1] : 0.0; }

    /// U restricted to the given eigenvalue indices (columns).
    Eigen::MatrixXd columns(const std::vector<int>& idx) const
    {
        Eigen::MatrixXd out(U.rows(), static_cast<Eigen::Index>(idx.size()));
        for (size_t c = 0; c < idx.size(); ++c)
            out.col(static_cast<Eigen::Index>(c)) = U.col(idx[c]);
        return out;
    }

    /// U_{rows, cols}.
    Eigen::MatrixXd submatrix(const std::vector<int>& rows, const std::vector<int>& cols) const
    {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
        for (size_t r = 0; r < rows.size(); ++r)
            for (size_t c = 0; c < cols.size(); ++c)
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = U(rows[r], cols[c]);
        return out;
    }
};

/// Full symmetric eigendecomposition. Each eigenvector is signed so that its
/// first entry of magnitude > 1e-12 is positive.
inline EigenDecomposition dense_eigendecomposition(const LaplacianOperator& L, int cap = kDefaultExactCap)
{
    if (L.size() > cap)
        throw InputError("exact transform needs a full eigendecomposition; N = " + std::to_string(L.size()) +
                         " exceeds the cap of " + std::to_string(cap) + " vertices (use the fast transform)");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L.dense());
    if (solver.info() != Eigen::Success)
        throw NumericalError("symmetric eigensolver did not converge");
    EigenDecomposition eig{solver.eigenvectors(), solver.eigenvalues()};
    for (Eigen::Index c = 0; c < eig.U.cols(); ++c)
        for (Eigen::Index r = 0; r < eig.U.rows(); ++r)
            if (std::abs(eig.U(r, c)) > 1e-12) {
                if (eig.U(r, c) < 0.0)
                    eig.U.col(c) *= -1.0;
                break;
            }
    return eig;
}

/// Spectral index sets R_1..R_M and the band ends tau_0..tau_M that define them.
struct SpectralPartition {
    std::vector<std::vector<int>> bands;
    std::vector<double> band_ends;

    int num_bands() const { return static_cast<int>(bands.size()); }
};

/// Assigns eigenvalue index l to band m when tau_{m-1} <= lambda_l < tau_m.
inline SpectralPartition partition_spectrum(const EigenDecomposition& eig, const std::vector<double>& band_ends)
{
    if (band_ends.size() < 2)
        throw InputError("need at least one band (two band ends)");
    if (band_ends.front() != 0.0)
        throw InputError("first band end must be 0");
    for (size_t m = 1; m < band_ends.size(); ++m)
        if (!(band_ends[m] > band_ends[m - 1]))
            throw InputError("band ends must be strictly increasing");
    if (!(band_ends.back() > eig.lambda_max()))
        throw InputError("last band end must exceed the largest eigenvalue");
    SpectralPartition part;
    part.band_ends = band_ends;
    part.bands.resize(band_ends.size() - 1);
    for (int l = 0; l < eig.size(); ++l) {
        // eigenvalues slightly below zero from roundoff belong to the first band
        auto it = std::upper_bound(band_ends.begin() + 1, band_ends.end(), eig.lambda[l]);
        const auto m = static_cast<size_t>(std::distance(band_ends.begin() + 1, it));
        part.bands[std::min(m, part.bands.size() - 1)].push_back(l);
    }
    for (size_t m = 0; m < part.bands.size(); ++m)
        if (part.bands[m].empty())
            warn("band " + std::to_string(m + 1) + " contains no eigenvalues");
    return part;
}

/// Vertex sets V_1..V_M with |V_m| = |R_m|.
struct VertexPartition {
    std::vector<std::vector<int>> sets;
    int exchange_chains = 0; ///< augmenting chains used to resolve overlaps
    int restarts = 0;        ///< randomized restarts needed
};

namespace detail {

struct GreedyOptions {
    /// Vertices to take first whenever they still carry a usable residual.
    const std::vector<char>* preferred = nullptr;
    /// Randomized choice among near-maximal residuals (restarts only).
    std::mt19937_64* rng = nullptr;
};

/// Row selection by modified Gram-Schmidt with maximal-residual pivoting on
/// rows `pool` of `A`. Returns `count` pool entries (vertex ids) whose rows
/// are linearly independent, or nullopt if the residual drops below
/// kPivotTolerance first.
inline std::optional<std::vector<int>> greedy_rows(const Eigen::MatrixXd& A, const std::vector<int>& pool, int count,
                                                   GreedyOptions opts = {})
{
    const auto p = static_cast<Eigen::Index>(pool.size());
    Eigen::MatrixXd res(p, A.cols());
    for (Eigen::Index r = 0; r < p; ++r)
        res.row(r) = A.row(pool[static_cast<size_t>(r)]);
    std::vector<char> taken(static_cast<size_t>(p), 0);
    std::vector<int> chosen;
    chosen.reserve(static_cast<size_t>(count));
    Eigen::VectorXd norms(p);
    for (int step = 0; step < count; ++step) {
        for (Eigen::Index r = 0; r < p; ++r)
            norms[r] = taken[r] ? -1.0 : res.row(r).norm();
        const double overall = norms.maxCoeff();
        if (!(overall > kPivotTolerance))
            return std::nullopt;
        auto candidate_max = [&](bool preferred_only) {
            double best = -1.0;
            for (Eigen::Index r = 0; r < p; ++r)
                if (!preferred_only || (*opts.preferred)[pool[r]])
                    best = std::max(best, norms[r]);
            return best;
        };
        bool restrict_pref = false;
        if (opts.preferred) {
            const double pref = candidate_max(true);
            restrict_pref = pref > 1e-4 * overall && pref > kPivotTolerance;
        }
        const double top = restrict_pref ? candidate_max(true) : overall;
        auto eligible = [&](Eigen::Index r) { return !taken[r] && (!restrict_pref || (*opts.preferred)[pool[r]]); };
        Eigen::Index pick = -1;
        if (opts.rng) {
            std::vector<Eigen::Index> near;
            for (Eigen::Index r = 0; r < p; ++r)
                if (eligible(r) && norms[r] >= 0.5 * top)
                    near.push_back(r);
            pick = near[std::uniform_int_distribution<size_t>(0, near.size() - 1)(*opts.rng)];
        } else {
            // ties (within roundoff) go to the lowest vertex index
            for (Eigen::Index r = 0; r < p; ++r)
                if (eligible(r) && norms[r] >= top * (1.0 - 1e-9) && (pick < 0 || pool[r] < pool[pick]))
                    pick = r;
        }
        taken[pick] = 1;
        chosen.push_back(pool[static_cast<size_t>(pick)]);
        const Eigen::RowVectorXd q = res.row(pick) / norms[pick];
        const Eigen::VectorXd proj = res * q.transpose();
        res.noalias() -= proj * q;
    }
    return chosen;
}

inline double min_singular_value(const Eigen::MatrixXd& A)
{
    if (A.size() == 0)
        return std::numeric_limits<double>::infinity();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues().minCoeff();
}

/// Representation of every pool row against an independent row set I of a
/// linear matroid: coefficients (|I| x p) and the residual norm outside span(I).
struct SpanInfo {
    Eigen::MatrixXd coeff;
    Eigen::VectorXd residual;
};

inline SpanInfo span_info(const Eigen::MatrixXd& rows_all, const std::vector<int>& independent)
{
    const Eigen::Index r = rows_all.cols();
    const auto k = static_cast<Eigen::Index>(independent.size());
    SpanInfo info;
    info.residual.resize(rows_all.rows());
    if (k == 0) {
        info.coeff.resize(0, rows_all.rows());
        info.residual = rows_all.rowwise().norm();
        return info;
    }
    Eigen::MatrixXd basis(r, k);
    for (Eigen::Index c = 0; c < k; ++c)
        basis.col(c) = rows_all.row(independent[static_cast<size_t>(c)]).transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    Eigen::MatrixXd qtb = qr.householderQ().transpose() * rows_all.transpose();
    info.coeff = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(qtb.topRows(k));
    if (r > k)
        info.residual = qtb.bottomRows(r - k).colwise().norm().transpose();
    else
        info.residual.setZero();
    return info;
}

/// Matroid-partition augmentation: I1 and I2 are disjoint independent row
/// sets (pool positions) of the matroids with row matrices A1 and A2. Each
/// free element is inserted by exchanging along a shortest chain of pivots.
/// Returns false if some free element admits no chain.
inline bool augment_partition(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, std::vector<int>& I1, std::vector<int>& I2,
                              double coeff_tol, int* chains = nullptr)
{
    const auto p = static_cast<int>(A1.rows());
    const Eigen::MatrixXd* A[2] = {&A1, &A2};
    std::vector<int>* I[2] = {&I1, &I2};
    while (true) {
        std::vector<int> owner(static_cast<size_t>(p), -1);
        for (int s = 0; s < 2; ++s)
            for (int e : *I[s])
                owner[e] = s;
        int free_elem = -1;
        for (int e = 0; e < p && free_elem < 0; ++e)
            if (owner[e] < 0)
                free_elem = e;
        if (free_elem < 0)
            return true;
        SpanInfo info[2] = {span_info(A1, I1), span_info(A2, I2)};
        const double res_tol[2] = {1e-10 * std::max(1.0, A1.norm()), 1e-10 * std::max(1.0, A2.norm())};
        // pos_in[s][e]: row of e in info[s].coeff when e belongs to I_s
        std::vector<int> pos_in[2] = {std::vector<int>(static_cast<size_t>(p), -1), std::vector<int>(static_cast<size_t>(p), -1)};
        for (int s = 0; s < 2; ++s)
            for (size_t t = 0; t < I[s]->size(); ++t)
                pos_in[s][(*I[s])[t]] = static_cast<int>(t);

        std::vector<int> parent(static_cast<size_t>(p), -2), parent_side(static_cast<size_t>(p), -1);
        std::deque<int> queue{free_elem};
        parent[free_elem] = -1;
        int sink = -1, sink_side = -1;
        while (!queue.empty() && sink < 0) {
            const int x = queue.front();
            queue.pop_front();
            for (int s = 0; s < 2 && sink < 0; ++s) {
                if (owner[x] == s || A[s]->cols() == 0)
                    continue;
                if (static_cast<Eigen::Index>(I[s]->size()) < A[s]->cols() && info[s].residual[x] > res_tol[s]) {
                    sink = x;
                    sink_side = s;
                    break;
                }
                for (int z : *I[s]) {
                    if (parent[z] != -2)
                        continue;
                    if (std::abs(info[s].coeff(pos_in[s][z], x)) > coeff_tol) {
                        parent[z] = x;
                        parent_side[z] = s;
                        queue.push_back(z);
                    }
                }
            }
        }
        if (sink < 0)
            return false;
        // walk back: sink enters I[sink_side]; each z leaves I[parent_side[z]] as parent[z] enters it
        std::vector<std::pair<int, int>> enter{{sink, sink_side}}, leave;
        for (int z = sink; parent[z] >= 0; z = parent[z]) {
            leave.emplace_back(z, parent_side[z]);
            enter.emplace_back(parent[z], parent_side[z]);
        }
        for (auto [e, s] : leave)
            I[s]->erase(std::find(I[s]->begin(), I[s]->end(), e));
        for (auto [e, s] : enter)
            I[s]->push_back(e);
        if (chains)
            ++*chains;
    }
}

} // namespace detail

/// Greedy uniqueness set for col(U_R): |R| vertices, chosen one at a time as
/// the vertex whose row of U_R has the largest component orthogonal to the
/// rows already chosen (ties to the lowest vertex). Searches `pool` (all
/// vertices when empty). Throws NumericalError on rank deficiency.
inline std::vector<int> greedy_uniqueness_set(const EigenDecomposition& eig, const std::vector<int>& R,
                                              std::vector<int> pool = {})
{
    if (pool.empty()) {
        pool.resize(static_cast<size_t>(eig.size()));
        std::iota(pool.begin(), pool.end(), 0);
    }
    if (R.size() > pool.size())
        throw InputError("greedy_uniqueness_set: |R| exceeds the number of candidate vertices");
    auto chosen = detail::greedy_rows(eig.columns(R), pool, static_cast<int>(R.size()));
    if (!chosen)
        throw NumericalError("greedy_uniqueness_set: rows of U_R are numerically rank deficient");
    return *chosen;
}

namespace detail {

/// One pass of the vertex partition; nullopt if an exchange chain or the
/// final conditioning check fails.
inline std::optional<VertexPartition> partition_attempt(const EigenDecomposition& eig, const SpectralPartition& part,
                                                        std::mt19937_64* rng)
{
    const int n = eig.size();
    const int M = part.num_bands();
    VertexPartition vp;
    vp.sets.resize(static_cast<size_t>(M));
    std::vector<int> pool(static_cast<size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int m = 0; m < M; ++m) {
        const auto& Rm = part.bands[m];
        std::vector<int> rest;
        for (int j = m + 1; j < M; ++j)
            rest.insert(rest.end(), part.bands[j].begin(), part.bands[j].end());
        if (Rm.empty())
            continue;
        if (rest.empty()) {
            vp.sets[m] = pool;
            pool.clear();
            break;
        }
        const Eigen::MatrixXd Um = eig.columns(Rm);
        const Eigen::MatrixXd Ur = eig.columns(rest);
        GreedyOptions g1;
        g1.rng = rng;
        auto gamma1 = greedy_rows(Um, pool, static_cast<int>(Rm.size()), g1);
        if (!gamma1)
            return std::nullopt;
        // gamma2: row reduction on U_{pool, rest} with the complement of gamma1 taken first
        std::vector<char> preferred(static_cast<size_t>(n), 0);
        for (int v : pool)
            preferred[v] = 1;
        for (int v : *gamma1)
            preferred[v] = 0;
        GreedyOptions g2;
        g2.preferred = &preferred;
        auto gamma2 = greedy_rows(Ur, pool, static_cast<int>(rest.size()), g2);
        if (!gamma2)
            return std::nullopt;

        // work in pool positions
        std::vector<int> pos(static_cast<size_t>(n), -1);
        for (size_t t = 0; t < pool.size(); ++t)
            pos[pool[t]] = static_cast<int>(t);
        Eigen::MatrixXd A1(static_cast<Eigen::Index>(pool.size()), Um.cols());
        Eigen::MatrixXd A2(static_cast<Eigen::Index>(pool.size()), Ur.cols());
        for (size_t t = 0; t < pool.size(); ++t) {
            A1.row(static_cast<Eigen::Index>(t)) = Um.row(pool[t]);
            A2.row(static_cast<Eigen::Index>(t)) = Ur.row(pool[t]);
        }
        std::vector<int> I1, I2;
        std::vector<char> in1(pool.size(), 0);
        for (int v : *gamma1) {
            I1.push_back(pos[v]);
            in1[pos[v]] = 1;
        }
        // overlap rows stay with gamma1; gamma2 gives them up and is re-completed by exchanges
        for (int v : *gamma2)
            if (!in1[pos[v]])
                I2.push_back(pos[v]);
        if (!augment_partition(A1, A2, I1, I2, 1e-8, &vp.exchange_chains))
            return std::nullopt;

        std::vector<int> vm, next_pool;
        for (int t : I1)
            vm.push_back(pool[t]);
        for (int t : I2)
            next_pool.push_back(pool[t]);
        std::sort(vm.begin(), vm.end());
        std::sort(next_pool.begin(), next_pool.end());
        vp.sets[m] = std::move(vm);
        pool = std::move(next_pool);
    }
    for (int m = 0; m < M; ++m)
        if (min_singular_value(eig.submatrix(vp.sets[m], part.bands[m])) <= kSingularValueTolerance)
            return std::nullopt;
    return vp;
}

} // namespace detail

/// Partitions the vertices into uniqueness sets, V_m for col(U_{R_m}).
///
/// Band by band: gamma1 is a greedy uniqueness set for R_m within the
/// remaining vertices, gamma2 one for the union of the later bands found by
/// row reduction that takes the complement of gamma1 first. Rows claimed by
/// both are resolved by chains of basis exchanges (shortest augmenting paths
/// in the exchange graph of the two row matroids); V_m = gamma1. Up to 10
/// randomized restarts are tried if an exchange stalls numerically or a
/// block ends up with smallest singular value <= 1e-10.
inline VertexPartition partition_uniqueness_sets(const EigenDecomposition& eig, const SpectralPartition& part, int restarts = 10)
{
    if (auto vp = detail::partition_attempt(eig, part, nullptr))
        return *vp;
    for (int attempt = 1; attempt <= restarts; ++attempt) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(attempt));
        if (auto vp = detail::partition_attempt(eig, part, &rng)) {
            warn("vertex partition needed " + std::to_string(attempt) + " randomized restart(s)");
            vp->restarts = attempt;
            return *vp;
        }
    }
    throw NumericalError("could not partition the vertices into well-conditioned uniqueness sets after " +
                         std::to_string(restarts) + " restarts");
}

/// Per band: (U_{R_m} U_{R_m}^T f) sampled on V_m.
inline AnalysisCoefficients exact_analyze(const EigenDecomposition& eig, const SpectralPartition& part, const VertexPartition& vp,
                                          const Eigen::VectorXd& f)
{
    require_same_length(eig.size(), static_cast<long>(f.size()), "exact_analyze signal");
    if (vp.sets.size() != part.bands.size())
        throw DimensionError("exact_analyze: vertex and spectral partitions have different band counts");
    AnalysisCoefficients out;
    for (size_t m = 0; m < part.bands.size(); ++m) {
        const Eigen::MatrixXd Ur = eig.columns(part.bands[m]);
        const Eigen::VectorXd filtered = Ur * (Ur.transpose() * f);
        BandCoefficients b;
        b.vertices = vp.sets[m];
        b.values.resize(static_cast<Eigen::Index>(b.vertices.size()));
        for (size_t t = 0; t < b.vertices.size(); ++t)
            b.values[static_cast<Eigen::Index>(t)] = filtered[b.vertices[t]];
        out.bands.push_back(std::move(b));
    }
    return out;
}

/// f = sum_m U_{R_m} U_{V_m,R_m}^{-1} y_m, each square system solved by LU
/// with partial pivoting.
inline Eigen::VectorXd exact_synthesize(const EigenDecomposition& eig, const SpectralPartition& part, const VertexPartition& vp,
                                        const AnalysisCoefficients& coeffs)
{
    if (coeffs.bands.size() != part.bands.size() || vp.sets.size() != part.bands.size())
        throw DimensionError("exact_synthesize: band count mismatch");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(eig.size());
    for (size_t m = 0; m < part.bands.size(); ++m) {
        const auto& b = coeffs.bands[m];
        if (b.vertices != vp.sets[m])
            throw DimensionError("exact_synthesize: coefficient vertices of band " + std::to_string(m + 1) +
                                 " do not match the vertex partition");
        if (part.bands[m].empty())
            continue;
        const Eigen::MatrixXd block = eig.submatrix(vp.sets[m], part.bands[m]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(block);
        if (!(lu.rcond() > 1e-15))
            throw NumericalError("exact_synthesize: singular interpolation system in band " + std::to_string(m + 1));
        f += eig.columns(part.bands[m]) * lu.solve(b.values);
    }
    if (coeffs.mean)
        f.array() += *coeffs.mean;
    return f;
}

/// Dictionary atom h_m(L) delta_i = U_{R_m} U_{R_m}^T delta_i (band 0-based).
inline Eigen::VectorXd atom(const EigenDecomposition& eig, const SpectralPartition& part, int band, int vertex)
{
    if (band < 0 || band >= part.num_bands() || vertex < 0 || vertex >= eig.size())
        throw InputError("atom: band or vertex out of range");
    const Eigen::MatrixXd Ur = eig.columns(part.bands[static_cast<size_t>(band)]);
    return Ur * Ur.row(vertex).transpose();
}

/// All N atoms, band by band, vertex order as in V_m; optionally unit-normalized.
inline Eigen::MatrixXd exact_dictionary(const EigenDecomposition& eig, const SpectralPartition& part, const VertexPartition& vp,
                                        bool normalize)
{
    Eigen::MatrixXd D(eig.size(), eig.size());
    Eigen::Index col = 0;
    for (size_t m = 0; m < part.bands.size(); ++m) {
        const Eigen::MatrixXd Ur = eig.columns(part.bands[m]);
        for (int v : vp.sets[m]) {
            D.col(col) = Ur * Ur.row(v).transpose();
            if (normalize) {
                const double nrm = D.col(col).norm();
                if (nrm > 0.0)
                    D.col(col) /= nrm;
            }
            ++col;
        }
    }
    if (col != eig.size())
        throw DimensionError("exact_dictionary: vertex partition does not cover the graph");
    return D;
}

} // namespace mcsfb
