#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mcsfb/errors.hpp"

namespace mcsfb {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

struct Edge {
    int i = 0;
    int j = 0;
    double w = 1.0;
};

/// Weighted undirected graph. The adjacency matrix is kept in compressed row
/// form with sorted, duplicate-free column indices in every row.
class Graph {
public:
    Graph() = default;

    /// Builds from an undirected edge list (0-based). Each edge contributes
    /// W(i,j) and W(j,i); repeated edges are summed.
    static Graph from_edges(int n_vertices, std::span<const Edge> edges)
    {
        if (n_vertices < 1)
            throw InputError("graph must have at least one vertex");
        std::vector<Eigen::Triplet<double, int>> trips;
        trips.reserve(2 * edges.size());
        for (const auto& e : edges) {
            if (e.i < 0 || e.j < 0 || e.i >= n_vertices || e.j >= n_vertices)
                throw InputError("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                                 ") references a vertex outside [0," + std::to_string(n_vertices) + ")");
            if (e.i == e.j)
                throw InputError("self-loop at vertex " + std::to_string(e.i));
            if (!(e.w > 0.0) || !std::isfinite(e.w))
                throw InputError("nonpositive or non-finite weight on edge (" + std::to_string(e.i) + "," +
                                 std::to_string(e.j) + ")");
            trips.emplace_back(e.i, e.j, e.w);
            trips.emplace_back(e.j, e.i, e.w);
        }
        Graph g;
        g.adjacency_.resize(n_vertices, n_vertices);
        g.adjacency_.setFromTriplets(trips.begin(), trips.end());
        g.adjacency_.makeCompressed();
        return g;
    }

    /// Takes ownership of a symmetric adjacency matrix, validating it.
    static Graph from_adjacency(SparseMatrix w)
    {
        Graph g;
        g.adjacency_ = std::move(w);
        g.adjacency_.makeCompressed();
        g.validate();
        return g;
    }

    int num_vertices() const { return static_cast<int>(adjacency_.rows()); }
    long num_edges() const { return adjacency_.nonZeros() / 2; }
    const SparseMatrix& adjacency() const { return adjacency_; }

    Eigen::VectorXd degrees() const
    {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(num_vertices());
        for (int r = 0; r < adjacency_.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(adjacency_, r); it; ++it)
                d[r] += it.value();
        return d;
    }

    /// Edges with i < j.
    std::vector<Edge> edges() const
    {
        std::vector<Edge> out;
        out.reserve(static_cast<size_t>(num_edges()));
        for (int r = 0; r < adjacency_.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(adjacency_, r); it; ++it)
                if (it.col() > r)
                    out.push_back({r, static_cast<int>(it.col()), it.value()});
        return out;
    }

    /// Throws InputError if symmetry, positivity, the zero diagonal or the CSR
    /// ordering is violated.
    void validate() const
    {
        if (adjacency_.rows() != adjacency_.cols())
            throw InputError("adjacency matrix is not square");
        const int* outer = adjacency_.outerIndexPtr();
        const int* inner = adjacency_.innerIndexPtr();
        const double* vals = adjacency_.valuePtr();
        for (int r = 0; r < adjacency_.outerSize(); ++r) {
            for (int p = outer[r]; p < outer[r + 1]; ++p) {
                if (p > outer[r] && inner[p] <= inner[p - 1])
                    throw InputError("row " + std::to_string(r) + " has unsorted or duplicate column indices");
                if (inner[p] == r)
                    throw InputError("self-loop at vertex " + std::to_string(r));
                if (!(vals[p] > 0.0) || !std::isfinite(vals[p]))
                    throw InputError("nonpositive weight at (" + std::to_string(r) + "," + std::to_string(inner[p]) +
                                     ")");
                if (adjacency_.coeff(inner[p], r) != vals[p])
                    throw InputError("asymmetric weight between vertices " + std::to_string(r) + " and " +
                                     std::to_string(inner[p]));
            }
        }
    }

private:
    SparseMatrix adjacency_;
};

/// Connected component label for every vertex, labels numbered from 0.
inline std::vector<int> connected_components(const Graph& g, int* n_components = nullptr)
{
    const int n = g.num_vertices();
    const auto& w = g.adjacency();
    std::vector<int> label(static_cast<size_t>(n), -1);
    std::vector<int> stack;
    int next = 0;
    for (int s = 0; s < n; ++s) {
        if (label[s] >= 0)
            continue;
        label[s] = next;
        stack.push_back(s);
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (SparseMatrix::InnerIterator it(w, v); it; ++it) {
                int u = static_cast<int>(it.col());
                if (label[u] < 0) {
                    label[u] = next;
                    stack.push_back(u);
                }
            }
        }
        ++next;
    }
    if (n_components)
        *n_components = next;
    return label;
}

/// Restricts the graph to its largest connected component (ties go to the
/// component containing the lowest vertex). `kept`, when given, receives the
/// original indices of the surviving vertices in ascending order.
inline Graph largest_component(const Graph& g, std::vector<int>* kept = nullptr)
{
    int n_comp = 0;
    auto label = connected_components(g, &n_comp);
    if (n_comp <= 1) {
        if (kept) {
            kept->resize(static_cast<size_t>(g.num_vertices()));
            for (int i = 0; i < g.num_vertices(); ++i)
                (*kept)[i] = i;
        }
        return g;
    }
    std::vector<int> sizes(static_cast<size_t>(n_comp), 0);
    for (int l : label)
        ++sizes[l];
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<int> new_index(label.size(), -1);
    std::vector<int> keep;
    for (int i = 0; i < g.num_vertices(); ++i)
        if (label[i] == best) {
            new_index[i] = static_cast<int>(keep.size());
            keep.push_back(i);
        }
    std::vector<Edge> edges;
    for (const auto& e : g.edges())
        if (label[e.i] == best)
            edges.push_back({new_index[e.i], new_index[e.j], e.w});
    warn("graph has " + std::to_string(n_comp) + " connected components; keeping the largest (" +
         std::to_string(keep.size()) + " of " + std::to_string(g.num_vertices()) + " vertices)");
    if (kept)
        *kept = keep;
    return Graph::from_edges(static_cast<int>(keep.size()), edges);
}

enum class LaplacianKind { Combinatorial, Normalized };

/// Sparse symmetric graph Laplacian plus the spectral upper bound used as the
/// right end of every polynomial filter domain.
///
/// Every product with the matrix goes through apply()/apply_into(), which
/// count one matvec per right-hand-side column. Copies share the counter.
class LaplacianOperator {
public:
    LaplacianOperator() = default;
    LaplacianOperator(SparseMatrix matrix, LaplacianKind kind)
        : matrix_(std::move(matrix)), kind_(kind), counter_(std::make_shared<std::atomic<std::uint64_t>>(0))
    {
    }

    int size() const { return static_cast<int>(matrix_.rows()); }
    LaplacianKind kind() const { return kind_; }
    const SparseMatrix& matrix() const { return matrix_; }
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }

    std::optional<double> lambda_max() const { return lambda_max_; }
    double require_lambda_max() const
    {
        if (!lambda_max_)
            throw InputError("lambda_max has not been estimated for this Laplacian");
        return *lambda_max_;
    }
    void set_lambda_max(double value) { lambda_max_ = value; }

    template <class In, class Out>
    void apply_into(const In& x, Out& out) const
    {
        require_same_length(size(), static_cast<long>(x.rows()), "laplacian_matvec");
        out.noalias() = matrix_ * x;
        counter_->fetch_add(static_cast<std::uint64_t>(x.cols()), std::memory_order_relaxed);
    }

    template <class Derived>
    typename Derived::PlainObject apply(const Eigen::MatrixBase<Derived>& x) const
    {
        typename Derived::PlainObject out(size(), x.cols());
        apply_into(x.derived(), out);
        return out;
    }

    std::uint64_t matvec_count() const { return counter_ ? counter_->load() : 0; }
    void reset_matvec_count() const
    {
        if (counter_)
            counter_->store(0);
    }

private:
    SparseMatrix matrix_;
    LaplacianKind kind_ = LaplacianKind::Combinatorial;
    std::optional<double> lambda_max_;
    std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

/// D - W, or I - D^{-1/2} W D^{-1/2} for the normalized variant.
inline LaplacianOperator build_laplacian(const Graph& g, LaplacianKind kind = LaplacianKind::Combinatorial)
{
    const int n = g.num_vertices();
    const auto& w = g.adjacency();
    const Eigen::VectorXd deg = g.degrees();
    Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(n);
    if (kind == LaplacianKind::Normalized) {
        for (int i = 0; i < n; ++i) {
            if (deg[i] <= 0.0)
                throw InputError("normalized Laplacian undefined: vertex " + std::to_string(i) + " is isolated");
            inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
        }
    }
    std::vector<Eigen::Triplet<double, int>> trips;
    trips.reserve(static_cast<size_t>(w.nonZeros() + n));
    for (int r = 0; r < n; ++r) {
        if (kind == LaplacianKind::Combinatorial) {
            if (deg[r] != 0.0)
                trips.emplace_back(r, r, deg[r]);
        } else {
            trips.emplace_back(r, r, 1.0);
        }
        for (SparseMatrix::InnerIterator it(w, r); it; ++it) {
            const int c = static_cast<int>(it.col());
            const double v = kind == LaplacianKind::Combinatorial ? -it.value() : -it.value() * inv_sqrt[r] * inv_sqrt[c];
            trips.emplace_back(r, c, v);
        }
    }
    SparseMatrix l(n, n);
    l.setFromTriplets(trips.begin(), trips.end());
    l.makeCompressed();
    return LaplacianOperator(std::move(l), kind);
}

inline constexpr double kLambdaMaxInflation = 1.01;
inline constexpr double kLambdaMaxFloor = 1e-12;
inline constexpr int kDefaultPowerIterations = 50;

/// Upper bound on lambda_max from Gershgorin discs (2 max degree, or 2 for
/// the normalized Laplacian).
inline double gershgorin_bound(const LaplacianOperator& L)
{
    double best = 0.0;
    const auto& m = L.matrix();
    for (int r = 0; r < m.outerSize(); ++r) {
        double row = 0.0;
        for (SparseMatrix::InnerIterator it(m, r); it; ++it)
            row += std::abs(it.value());
        best = std::max(best, row);
    }
    return best;
}

/// Lanczos with full reorthogonalization from a seeded Gaussian start, `iters`
/// matvecs. The largest Ritz value plus its residual bound is inflated by
/// 1.01, capped at the Gershgorin bound, and stored in `L`.
inline double estimate_lambda_max(LaplacianOperator& L, int iters = kDefaultPowerIterations, std::uint64_t seed = 0)
{
    if (iters < 1)
        throw InputError("estimate_lambda_max: iters must be >= 1");
    const int n = L.size();
    const int steps = std::min(iters, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd Q(n, steps);
    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i)
        q[i] = normal(rng);
    q.normalize();
    std::vector<double> alpha, beta;
    Eigen::VectorXd w(n);
    int k = 0;
    for (; k < steps; ++k) {
        Q.col(k) = q;
        L.apply_into(q, w);
        alpha.push_back(q.dot(w));
        for (int pass = 0; pass < 2; ++pass)
            w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
        const double b = w.norm();
        beta.push_back(b);
        if (!(b > 1e-12 * std::max(1.0, std::abs(alpha.back())))) {
            ++k;
            break;
        }
        q = w / b;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < k)
            T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const double ritz = es.eigenvalues()[k - 1];
    const double resid = std::abs(beta[k - 1] * es.eigenvectors()(k - 1, k - 1));
    double value = std::max(kLambdaMaxInflation * (ritz + resid), kLambdaMaxFloor);
    const double cap = gershgorin_bound(L);
    if (cap > 0.0)
        value = std::min(value, cap);
    L.set_lambda_max(value);
    return value;
}

} // namespace mcsfb
