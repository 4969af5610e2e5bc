#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mcsfb/graph.hpp"

namespace testsupport {

/// Connected random graph: a random spanning tree plus extra edges with
/// probability p, weights uniform in [0.5, 1.5].
inline mcsfb::Graph random_connected_graph(int n, double p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<char>> has(static_cast<size_t>(n), std::vector<char>(static_cast<size_t>(n), 0));
    std::vector<mcsfb::Edge> edges;
    auto add = [&](int a, int b) {
        if (a == b || has[a][b])
            return;
        has[a][b] = has[b][a] = 1;
        edges.push_back({std::min(a, b), std::max(a, b), 0.5 + unif(rng)});
    };
    for (int t = 1; t < n; ++t)
        add(order[t], order[std::uniform_int_distribution<int>(0, t - 1)(rng)]);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (unif(rng) < p)
                add(i, j);
    return mcsfb::Graph::from_edges(n, edges);
}

inline Eigen::VectorXd random_signal(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd f(n);
    for (int i = 0; i < n; ++i)
        f[i] = normal(rng);
    return f;
}

/// Combinatorial Laplacian with lambda_max set to 1.01 x the dense maximum.
inline mcsfb::LaplacianOperator laplacian_with_exact_bound(const mcsfb::Graph& g, double inflation = 1.01)
{
    auto L = mcsfb::build_laplacian(g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.dense(), Eigen::EigenvaluesOnly);
    L.set_lambda_max(inflation * es.eigenvalues().maxCoeff());
    return L;
}

inline std::vector<double> ring_eigenvalues(int n)
{
    std::vector<double> ev;
    for (int l = 0; l < n; ++l)
        ev.push_back(2.0 - 2.0 * std::cos(2.0 * M_PI * l / n));
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Fraction of eigenvalues <= z.
inline double empirical_cdf(const std::vector<double>& sorted_ev, double z)
{
    return static_cast<double>(std::upper_bound(sorted_ev.begin(), sorted_ev.end(), z) - sorted_ev.begin()) / sorted_ev.size();
}

} // namespace testsupport
