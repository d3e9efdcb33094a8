#pragma once

// BEV occupancy grid plus the grid algorithms the navigation policy runs on:
// fast-marching distance fields, frontier extraction, steepest-descent paths.

#include <gsnav/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace gsnav::grid {

using geom::Vec2;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Cell : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct OccupancyGrid {
    double cell_size = 0.05;
    Vec2 origin = Vec2::Zero();  // world position of the (0,0) cell corner
    int width = 0, height = 0;   // cells along x, y
    std::vector<Cell> states;

    OccupancyGrid() = default;
    OccupancyGrid(double cell, Vec2 org, int w, int h)
        : cell_size(cell), origin(org), width(w), height(h),
          states(static_cast<size_t>(w) * h, Cell::Unknown) {}

    int index(int ix, int iy) const { return iy * width + ix; }
    bool in_bounds(int ix, int iy) const {
        return ix >= 0 && ix < width && iy >= 0 && iy < height;
    }
    Cell at(int ix, int iy) const { return states[index(ix, iy)]; }
    Cell& at(int ix, int iy) { return states[index(ix, iy)]; }

    Eigen::Vector2i cell_of(const Vec2& p) const {
        return {static_cast<int>(std::floor((p.x() - origin.x()) / cell_size)),
                static_cast<int>(std::floor((p.y() - origin.y()) / cell_size))};
    }
    Vec2 center_of(int ix, int iy) const {
        return origin + Vec2((ix + 0.5) * cell_size, (iy + 0.5) * cell_size);
    }
};

using DistanceField = std::vector<double>;  // meters, kInf where unreachable

// First-order fast marching on the eikonal equation, unit speed in free
// cells, impassable elsewhere. Cells within a small radius of the source are
// initialized with exact Euclidean distances, which removes most of the
// near-source error of the first-order stencil.
inline DistanceField fmm_distance(const OccupancyGrid& grid, const Vec2& source,
                                  bool frontier_cells_free = false,
                                  const std::vector<std::uint8_t>* extra_free = nullptr) {
    const auto src = grid.cell_of(source);
    if (!grid.in_bounds(src.x(), src.y()))
        throw std::invalid_argument("fmm source outside grid");
    auto passable = [&](int ix, int iy) {
        const Cell c = grid.at(ix, iy);
        if (c == Cell::Free) return true;
        if (extra_free && (*extra_free)[grid.index(ix, iy)]) return true;
        (void)frontier_cells_free;
        return false;
    };
    if (!passable(src.x(), src.y()))
        throw std::invalid_argument("fmm source not in free space");

    const int w = grid.width, h = grid.height;
    const double hs = grid.cell_size;
    DistanceField dist(static_cast<size_t>(w) * h, kInf);
    std::vector<std::uint8_t> accepted(dist.size(), 0);

    using Node = std::pair<double, int>;
    std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;

    const int init_r = 3;
    for (int dy = -init_r; dy <= init_r; ++dy)
        for (int dx = -init_r; dx <= init_r; ++dx) {
            const int ix = src.x() + dx, iy = src.y() + dy;
            if (!grid.in_bounds(ix, iy) || !passable(ix, iy)) continue;
            const double d = hs * std::sqrt(double(dx * dx + dy * dy));
            const int id = grid.index(ix, iy);
            dist[id] = d;
            heap.emplace(d, id);
        }
    dist[grid.index(src.x(), src.y())] = 0.0;

    auto solve = [&](int ix, int iy) {
        double tx = kInf, ty = kInf;
        if (ix > 0 && accepted[grid.index(ix - 1, iy)]) tx = dist[grid.index(ix - 1, iy)];
        if (ix + 1 < w && accepted[grid.index(ix + 1, iy)])
            tx = std::min(tx, dist[grid.index(ix + 1, iy)]);
        if (iy > 0 && accepted[grid.index(ix, iy - 1)]) ty = dist[grid.index(ix, iy - 1)];
        if (iy + 1 < h && accepted[grid.index(ix, iy + 1)])
            ty = std::min(ty, dist[grid.index(ix, iy + 1)]);
        const double a = std::min(tx, ty), b = std::max(tx, ty);
        if (b == kInf) return a + hs;
        if (b - a >= hs) return a + hs;
        return 0.5 * (a + b + std::sqrt(2.0 * hs * hs - (b - a) * (b - a)));
    };

    while (!heap.empty()) {
        const auto [d, id] = heap.top();
        heap.pop();
        if (accepted[id] || d > dist[id]) continue;
        accepted[id] = 1;
        const int ix = id % w, iy = id / w;
        constexpr int nx[4] = {1, -1, 0, 0}, ny[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int jx = ix + nx[k], jy = iy + ny[k];
            if (!grid.in_bounds(jx, jy) || !passable(jx, jy)) continue;
            const int jd = grid.index(jx, jy);
            if (accepted[jd]) continue;
            const double t = solve(jx, jy);
            if (t < dist[jd]) {
                dist[jd] = t;
                heap.emplace(t, jd);
            }
        }
    }
    return dist;
}

struct FrontierScoreMap {
    std::vector<std::uint8_t> mask;  // aligned with the grid, 1 on the kept frontier
    bool empty = true;               // no frontier cells anywhere (exploration exhausted)
};

// Frontier = free cell 8-adjacent to unknown. Components are 8-connected;
// only the component nearest the agent (geodesic through free space)
// survives.
inline FrontierScoreMap frontiers(const OccupancyGrid& grid, const Vec2& agent_bev) {
    const int w = grid.width, h = grid.height;
    FrontierScoreMap out;
    out.mask.assign(static_cast<size_t>(w) * h, 0);

    std::vector<std::uint8_t> is_frontier(out.mask.size(), 0);
    bool any = false;
    for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
            if (grid.at(ix, iy) != Cell::Free) continue;
            for (int dy = -1; dy <= 1 && !is_frontier[grid.index(ix, iy)]; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int jx = ix + dx, jy = iy + dy;
                    if (grid.in_bounds(jx, jy) && grid.at(jx, jy) == Cell::Unknown) {
                        is_frontier[grid.index(ix, iy)] = 1;
                        any = true;
                        break;
                    }
                }
        }
    if (!any) return out;
    out.empty = false;

    // Label 8-connected components.
    std::vector<int> label(out.mask.size(), -1);
    int num_labels = 0;
    std::vector<int> stack;
    for (size_t i = 0; i < is_frontier.size(); ++i) {
        if (!is_frontier[i] || label[i] >= 0) continue;
        const int l = num_labels++;
        stack.assign(1, static_cast<int>(i));
        label[i] = l;
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            const int ix = id % w, iy = id / w;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int jx = ix + dx, jy = iy + dy;
                    if (!grid.in_bounds(jx, jy)) continue;
                    const int jd = grid.index(jx, jy);
                    if (is_frontier[jd] && label[jd] < 0) {
                        label[jd] = l;
                        stack.push_back(jd);
                    }
                }
        }
    }

    // Geodesic distance from the agent through free space; fall back to
    // Euclidean if the agent cell is not free (early steps).
    std::vector<double> best(num_labels, kInf);
    const auto agent_cell = grid.cell_of(agent_bev);
    const bool use_geodesic = grid.in_bounds(agent_cell.x(), agent_cell.y()) &&
                              grid.at(agent_cell.x(), agent_cell.y()) == Cell::Free;
    DistanceField field;
    if (use_geodesic) field = fmm_distance(grid, agent_bev);
    for (size_t i = 0; i < is_frontier.size(); ++i) {
        if (!is_frontier[i]) continue;
        double d;
        if (use_geodesic) {
            d = field[i];
        } else {
            const int ix = static_cast<int>(i) % w, iy = static_cast<int>(i) / w;
            d = (grid.center_of(ix, iy) - agent_bev).norm();
        }
        best[label[i]] = std::min(best[label[i]], d);
    }
    int keep = -1;
    double keep_d = kInf;
    for (int l = 0; l < num_labels; ++l)
        if (best[l] < keep_d) {
            keep_d = best[l];
            keep = l;
        }
    if (keep < 0) {
        // All frontier components unreachable through known free space; keep
        // the Euclidean-nearest so exploration can still steer somewhere.
        for (size_t i = 0; i < is_frontier.size(); ++i) {
            if (!is_frontier[i]) continue;
            const int ix = static_cast<int>(i) % w, iy = static_cast<int>(i) / w;
            const double d = (grid.center_of(ix, iy) - agent_bev).norm();
            if (d < keep_d) {
                keep_d = d;
                keep = label[i];
            }
        }
    }
    for (size_t i = 0; i < is_frontier.size(); ++i)
        if (is_frontier[i] && label[i] == keep) out.mask[i] = 1;
    return out;
}

// Steepest-descent walk over a distance field from `start` toward the field
// source. Returns the next lookahead point, or nullopt when the field is
// infinite at the start.
inline std::optional<Vec2> descend_field(const OccupancyGrid& grid, const DistanceField& field,
                                         const Vec2& start, double lookahead_m) {
    auto cell = grid.cell_of(start);
    if (!grid.in_bounds(cell.x(), cell.y())) return std::nullopt;
    int id = grid.index(cell.x(), cell.y());
    if (field[id] == kInf) {
        // Start cell may be just off the passable set; try 8-neighbors.
        double bd = kInf;
        int bix = -1, biy = -1;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int jx = cell.x() + dx, jy = cell.y() + dy;
                if (!grid.in_bounds(jx, jy)) continue;
                if (field[grid.index(jx, jy)] < bd) {
                    bd = field[grid.index(jx, jy)];
                    bix = jx;
                    biy = jy;
                }
            }
        if (bix < 0) return std::nullopt;
        cell = {bix, biy};
        id = grid.index(bix, biy);
    }

    const int max_steps = std::max(1, static_cast<int>(std::ceil(lookahead_m / grid.cell_size)));
    int cx = cell.x(), cy = cell.y();
    for (int s = 0; s < max_steps; ++s) {
        double bd = field[grid.index(cx, cy)];
        int bx = cx, by = cy;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int jx = cx + dx, jy = cy + dy;
                if (!grid.in_bounds(jx, jy)) continue;
                if (field[grid.index(jx, jy)] < bd) {
                    bd = field[grid.index(jx, jy)];
                    bx = jx;
                    by = jy;
                }
            }
        if (bx == cx && by == cy) break;  // local minimum (the source)
        cx = bx;
        cy = by;
    }
    return grid.center_of(cx, cy);
}

}  // namespace gsnav::grid
