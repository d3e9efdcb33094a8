#include <gsnav/grid2d.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <queue>

using namespace gsnav;
using grid::Cell;
using grid::OccupancyGrid;

namespace {

OccupancyGrid free_grid(int w, int h, double cell = 0.05) {
    OccupancyGrid g(cell, {0, 0}, w, h);
    std::fill(g.states.begin(), g.states.end(), Cell::Free);
    return g;
}

// 8-connected Dijkstra oracle over free cells, diagonal cost sqrt(2)*h.
std::vector<double> dijkstra(const OccupancyGrid& g, int sx, int sy) {
    std::vector<double> dist(g.states.size(), grid::kInf);
    using Node = std::pair<double, int>;
    std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;
    dist[g.index(sx, sy)] = 0;
    heap.emplace(0.0, g.index(sx, sy));
    while (!heap.empty()) {
        const auto [d, id] = heap.top();
        heap.pop();
        if (d > dist[id]) continue;
        const int x = id % g.width, y = id / g.width;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int jx = x + dx, jy = y + dy;
                if (!g.in_bounds(jx, jy) || g.at(jx, jy) != Cell::Free) continue;
                const double nd = d + g.cell_size * std::sqrt(double(dx * dx + dy * dy));
                if (nd < dist[g.index(jx, jy)]) {
                    dist[g.index(jx, jy)] = nd;
                    heap.emplace(nd, g.index(jx, jy));
                }
            }
    }
    return dist;
}

}  // namespace

TEST_CASE("fmm matches euclidean distance on an empty grid") {
    auto g = free_grid(100, 100);
    const auto src = g.center_of(0, 0);
    const auto field = grid::fmm_distance(g, src);
    REQUIRE(field[g.index(0, 0)] == 0.0);

    const double exact = 0.05 * std::sqrt(60.0 * 60.0 + 80.0 * 80.0);
    REQUIRE(field[g.index(60, 80)] == Catch::Approx(exact).epsilon(0.02));

    // axis-aligned distances are exact for the first-order stencil
    REQUIRE(field[g.index(90, 0)] == Catch::Approx(0.05 * 90).epsilon(0.005));
    REQUIRE(field[g.index(0, 90)] == Catch::Approx(0.05 * 90).epsilon(0.005));
}

TEST_CASE("fmm respects a wall detour within 10% of dijkstra") {
    auto g = free_grid(80, 80);
    // vertical wall at x = 40 with one gap near the top
    for (int y = 0; y < 80; ++y)
        if (y < 70) g.at(40, y) = Cell::Occupied;
    const auto src = g.center_of(10, 10);
    const auto field = grid::fmm_distance(g, src);
    const auto oracle = dijkstra(g, 10, 10);
    for (const auto [tx, ty] : std::vector<std::pair<int, int>>{{70, 10}, {79, 40}, {60, 5}}) {
        REQUIRE(field[g.index(tx, ty)] < grid::kInf);
        const double fd = field[g.index(tx, ty)];
        const double dd = oracle[g.index(tx, ty)];
        REQUIRE(std::abs(fd - dd) <= 0.10 * dd);
    }
}

TEST_CASE("fmm rejects blocked sources and blocks unknown cells") {
    auto g = free_grid(20, 20);
    g.at(5, 5) = Cell::Occupied;
    REQUIRE_THROWS_AS(grid::fmm_distance(g, g.center_of(5, 5)), std::invalid_argument);

    g.at(10, 10) = Cell::Unknown;
    const auto field = grid::fmm_distance(g, g.center_of(0, 0));
    REQUIRE(field[g.index(10, 10)] == grid::kInf);
    REQUIRE(field[g.index(5, 5)] == grid::kInf);
}

TEST_CASE("frontier ring around a free seed") {
    OccupancyGrid g(0.05, {0, 0}, 21, 21);
    for (int y = 9; y <= 11; ++y)
        for (int x = 9; x <= 11; ++x) g.at(x, y) = Cell::Free;
    const auto f = grid::frontiers(g, g.center_of(10, 10));
    REQUIRE_FALSE(f.empty);
    // all free cells touching unknown are frontier: the 8 ring cells
    int count = 0;
    for (int y = 0; y < 21; ++y)
        for (int x = 0; x < 21; ++x) count += f.mask[g.index(x, y)];
    REQUIRE(count == 8);
    REQUIRE(f.mask[g.index(10, 10)] == 0);  // interior cell is not a frontier
}

TEST_CASE("fully mapped grid has no frontier") {
    auto g = free_grid(15, 15);
    const auto f = grid::frontiers(g, g.center_of(7, 7));
    REQUIRE(f.empty);
    int count = 0;
    for (const auto m : f.mask) count += m;
    REQUIRE(count == 0);
}

TEST_CASE("nearest frontier component wins") {
    // walled corridor with unknown pockets at both ends; the agent sits near
    // the left pocket
    OccupancyGrid g(0.05, {0, 0}, 101, 7);
    for (auto& s : g.states) s = Cell::Occupied;
    for (int x = 1; x <= 99; ++x)
        for (int y = 2; y <= 4; ++y) g.at(x, y) = Cell::Free;
    for (int y = 0; y < 7; ++y) {
        g.at(0, y) = Cell::Unknown;
        g.at(100, y) = Cell::Unknown;
    }
    const auto f = grid::frontiers(g, g.center_of(10, 3));
    REQUIRE_FALSE(f.empty);
    // the kept component must touch x=1 (near), not x=99 (far)
    bool near_kept = false, far_kept = false;
    for (int y = 0; y < 7; ++y) {
        if (f.mask[g.index(1, y)]) near_kept = true;
        if (f.mask[g.index(99, y)]) far_kept = true;
    }
    REQUIRE(near_kept);
    REQUIRE_FALSE(far_kept);
}

TEST_CASE("descend field walks toward the source") {
    auto g = free_grid(40, 40);
    const auto field = grid::fmm_distance(g, g.center_of(30, 30));
    const auto look = grid::descend_field(g, field, g.center_of(5, 5), 0.45);
    REQUIRE(look.has_value());
    const double before = (g.center_of(5, 5) - g.center_of(30, 30)).norm();
    const double after = (*look - g.center_of(30, 30)).norm();
    REQUIRE(after < before);
}

TEST_CASE("fmm distance is monotone along descent") {
    auto g = free_grid(60, 60);
    g.at(30, 30) = Cell::Occupied;  // small obstacle
    const auto field = grid::fmm_distance(g, g.center_of(50, 50));
    geom::Vec2 p = g.center_of(4, 4);
    double last = field[g.index(4, 4)];
    for (int i = 0; i < 200; ++i) {
        const auto nxt = grid::descend_field(g, field, p, 0.1);
        REQUIRE(nxt.has_value());
        const auto c = g.cell_of(*nxt);
        const double d = field[g.index(c.x(), c.y())];
        REQUIRE(d <= last + 1e-12);
        last = d;
        p = *nxt;
        if (d == 0.0) break;
    }
    REQUIRE(last == 0.0);
}
