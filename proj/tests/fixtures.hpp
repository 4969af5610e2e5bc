#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mcsfb/generators.hpp"

namespace fixtures {

/// Mesh-like fixture: an 8-connected grid clipped to a wavy disc with one
/// hole, about 2,800 vertices. `xy` receives cell coordinates in [0, 1).
inline mcsfb::Graph blob_mesh(std::vector<std::pair<double, double>>* xy = nullptr, int side = 64)
{
    auto mask = mcsfb::GridMask::full(side, side);
    const double half = 0.5 * side;
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            const double x = (c - half + 0.5) / half, y = (r - half + 0.5) / half;
            const double rad = 0.95 + 0.12 * std::sin(3.0 * std::atan2(y, x));
            const bool hole = (x - 0.3) * (x - 0.3) + (y + 0.2) * (y + 0.2) < 0.02;
            mask.cells[static_cast<size_t>(r) * side + c] = x * x + y * y < rad * rad && !hole;
        }
    std::vector<std::pair<int, int>> cells;
    auto g = mcsfb::grid_from_mask(mask, 8, &cells);
    if (xy) {
        xy->clear();
        for (auto [r, c] : cells)
            xy->emplace_back(static_cast<double>(c) / side, static_cast<double>(r) / side);
    }
    return g;
}

/// Smooth background plus a step across a slanted line.
inline Eigen::VectorXd piecewise_smooth(const std::vector<std::pair<double, double>>& xy)
{
    Eigen::VectorXd f(static_cast<Eigen::Index>(xy.size()));
    for (size_t i = 0; i < xy.size(); ++i) {
        const auto [x, y] = xy[i];
        f[static_cast<Eigen::Index>(i)] = std::sin(3.0 * x) + std::cos(2.0 * y) + (x + 0.5 * y > 0.7 ? 1.5 : 0.0);
    }
    return f;
}

inline mcsfb::Graph sensor(int n, std::uint64_t seed, std::vector<Eigen::Vector2d>* coords = nullptr)
{
    mcsfb::SensorParams p;
    p.n = n;
    return mcsfb::random_sensor_graph(p, seed, coords);
}

inline Eigen::VectorXd piecewise_smooth(const std::vector<Eigen::Vector2d>& coords)
{
    std::vector<std::pair<double, double>> xy;
    for (const auto& q : coords)
        xy.emplace_back(q.x(), q.y());
    return piecewise_smooth(xy);
}

} // namespace fixtures
