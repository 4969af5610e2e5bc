#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <tuple>
#include <vector>

#include "mcsfb/graph.hpp"

namespace mcsfb {

// Test and experiment fixtures. Every generator is deterministic given its
// seed and returns a connected graph (largest component kept otherwise).

inline Graph ring_graph(int n)
{
    if (n < 2)
        throw InputError("ring graph needs N >= 2");
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
        int j = (i + 1) % n;
        if (n == 2 && i == 1)
            break;
        edges.push_back({i, j, 1.0});
    }
    return Graph::from_edges(n, edges);
}

inline Graph path_graph(int n)
{
    if (n < 2)
        throw InputError("path graph needs N >= 2");
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i)
        edges.push_back({i, i + 1, 1.0});
    return Graph::from_edges(n, edges);
}

inline Graph complete_graph(int n)
{
    if (n < 2)
        throw InputError("complete graph needs N >= 2");
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            edges.push_back({i, j, 1.0});
    return Graph::from_edges(n, edges);
}

struct SensorParams {
    int n = 500;
    int k_nearest = 6;
    /// Gaussian kernel width; <= 0 means "mean distance to the k-th neighbour".
    double sigma = 0.0;
};

/// Random geometric sensor network: uniform points in the unit square, each
/// joined to its k nearest neighbours (symmetrized) with Gaussian weights
/// exp(-d^2 / sigma^2).
inline Graph random_sensor_graph(const SensorParams& p, std::uint64_t seed, std::vector<Eigen::Vector2d>* coords = nullptr)
{
    if (p.n < 2)
        throw InputError("sensor graph needs N >= 2");
    if (p.k_nearest < 1)
        throw InputError("sensor graph needs k_nearest >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Eigen::Vector2d> pts(static_cast<size_t>(p.n));
    for (auto& q : pts)
        q = {unif(rng), unif(rng)};

    const int k = std::min(p.k_nearest, p.n - 1);
    std::vector<std::vector<std::pair<double, int>>> nbrs(static_cast<size_t>(p.n));
    double kth_sum = 0.0;
    std::vector<std::pair<double, int>> dist(static_cast<size_t>(p.n));
    for (int i = 0; i < p.n; ++i) {
        for (int j = 0; j < p.n; ++j)
            dist[j] = {(pts[i] - pts[j]).squaredNorm(), j};
        std::partial_sort(dist.begin(), dist.begin() + k + 1, dist.end());
        for (int t = 1; t <= k; ++t)
            nbrs[i].push_back(dist[t]);
        kth_sum += std::sqrt(dist[k].first);
    }
    const double sigma = p.sigma > 0.0 ? p.sigma : kth_sum / p.n;
    std::vector<Edge> edges;
    for (int i = 0; i < p.n; ++i)
        for (const auto& [d2, j] : nbrs[i])
            edges.push_back({std::min(i, j), std::max(i, j), std::exp(-d2 / (sigma * sigma))});
    // mutual neighbours appear twice; keep one copy
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
    edges.erase(std::unique(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j; }),
                edges.end());
    std::vector<int> kept;
    Graph g = largest_component(Graph::from_edges(p.n, edges), &kept);
    if (coords) {
        coords->clear();
        for (int v : kept)
            coords->push_back(pts[v]);
    }
    return g;
}

struct CommunityParams {
    int n = 500;
    int communities = 5;
    double p_in = 0.1;
    double p_out = 0.002;
};

/// Planted-partition random graph with unit weights; vertices are assigned to
/// communities round-robin.
inline Graph community_graph(const CommunityParams& p, std::uint64_t seed)
{
    if (p.n < 2)
        throw InputError("community graph needs N >= 2");
    if (p.communities < 1)
        throw InputError("community graph needs at least one community");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Edge> edges;
    for (int i = 0; i < p.n; ++i)
        for (int j = i + 1; j < p.n; ++j) {
            const double prob = (i % p.communities == j % p.communities) ? p.p_in : p.p_out;
            if (unif(rng) < prob)
                edges.push_back({i, j, 1.0});
        }
    if (edges.empty())
        throw InputError("community graph parameters produced no edges");
    return largest_component(Graph::from_edges(p.n, edges));
}

/// Row-major boolean mask over a rows x cols grid.
struct GridMask {
    int rows = 0;
    int cols = 0;
    std::vector<bool> cells;

    bool at(int r, int c) const { return cells[static_cast<size_t>(r) * cols + c]; }
    static GridMask full(int rows, int cols) { return {rows, cols, std::vector<bool>(size_t(rows) * cols, true)}; }
};

/// One vertex per true cell, unit edges to 4- or 8-neighbours that are also
/// true. `cell_of`, when given, receives (row, col) of each kept vertex.
inline Graph grid_from_mask(const GridMask& mask, int stencil = 8, std::vector<std::pair<int, int>>* cell_of = nullptr)
{
    if (stencil != 4 && stencil != 8)
        throw InputError("grid stencil must be 4 or 8");
    if (mask.rows < 1 || mask.cols < 1 || mask.cells.size() != size_t(mask.rows) * mask.cols)
        throw InputError("grid mask has inconsistent dimensions");
    std::vector<int> index(mask.cells.size(), -1);
    std::vector<std::pair<int, int>> cells;
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c)
            if (mask.at(r, c)) {
                index[size_t(r) * mask.cols + c] = static_cast<int>(cells.size());
                cells.emplace_back(r, c);
            }
    if (cells.size() < 2)
        throw InputError("grid mask must select at least two cells");
    static constexpr int kOffsets[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    const int n_off = stencil == 8 ? 4 : 2;
    std::vector<Edge> edges;
    for (const auto& [r, c] : cells)
        for (int o = 0; o < n_off; ++o) {
            const int rr = r + kOffsets[o][0];
            const int cc = c + kOffsets[o][1];
            if (rr < 0 || rr >= mask.rows || cc < 0 || cc >= mask.cols || !mask.at(rr, cc))
                continue;
            edges.push_back({index[size_t(r) * mask.cols + c], index[size_t(rr) * mask.cols + cc], 1.0});
        }
    if (edges.empty())
        throw InputError("grid mask has no adjacent cells");
    std::vector<int> kept;
    Graph g = largest_component(Graph::from_edges(static_cast<int>(cells.size()), edges), &kept);
    if (cell_of) {
        cell_of->clear();
        for (int v : kept)
            cell_of->push_back(cells[v]);
    }
    return g;
}

} // namespace mcsfb
