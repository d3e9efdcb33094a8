#pragma once

// Two-stage navigation controller: occupancy mapping from posed RGB-D,
// explore-vs-reach arbitration over the BEV activation and frontier maps,
// and FMM-based waypoint following that emits discrete agent actions.

#include <gsnav/coarse_match.hpp>
#include <gsnav/fine_align.hpp>
#include <gsnav/grid2d.hpp>
#include <gsnav/sim.hpp>

#include <cmath>
#include <optional>
#include <vector>

namespace gsnav::policy {

using geom::RigidPose;
using geom::Vec2;
using geom::Vec3;
using grid::Cell;
using grid::OccupancyGrid;

// ---------------------------------------------------------------------------
// Occupancy update: unproject depth, mark body-band hits occupied, ray-march
// traversed cells free. Within one observation occupied evidence wins; across
// observations the latest observation wins.
// ---------------------------------------------------------------------------

struct OccupancyConfig {
    int stride = 2;
    double band_lo = 0.15, band_hi = 1.6;  // agent body band (meters above floor)
    double max_range = 8.0;
};

inline void update_occupancy(OccupancyGrid& grid, const sim::Observation& obs,
                             const OccupancyConfig& cfg = {}) {
    if (obs.pose_in_solid) return;
    std::vector<int> free_cells, occ_cells;
    const Vec2 cam = obs.pose.translation.head<2>();
    const auto cam_cell = grid.cell_of(cam);

    auto mark_ray = [&](const Vec2& to, bool include_end) {
        // 2D DDA from the camera cell toward `to`
        const auto end = grid.cell_of(to);
        int x = cam_cell.x(), y = cam_cell.y();
        const int n = std::abs(end.x() - x) + std::abs(end.y() - y);
        const Vec2 d = to - cam;
        const double len = d.norm();
        if (len < 1e-9) return;
        for (int i = 0; i <= n; ++i) {
            if (!grid.in_bounds(x, y)) break;
            const bool at_end = (x == end.x() && y == end.y());
            if (!at_end || include_end) free_cells.push_back(grid.index(x, y));
            if (at_end) break;
            // advance to the neighbor whose boundary the ray crosses first
            const double tx =
                d.x() > 0 ? ((grid.origin.x() + (x + 1) * grid.cell_size) - cam.x()) / d.x()
                : d.x() < 0 ? ((grid.origin.x() + x * grid.cell_size) - cam.x()) / d.x()
                            : grid::kInf;
            const double ty =
                d.y() > 0 ? ((grid.origin.y() + (y + 1) * grid.cell_size) - cam.y()) / d.y()
                : d.y() < 0 ? ((grid.origin.y() + y * grid.cell_size) - cam.y()) / d.y()
                            : grid::kInf;
            if (tx <= ty)
                x += d.x() > 0 ? 1 : -1;
            else
                y += d.y() > 0 ? 1 : -1;
        }
    };

    for (int v = 0; v < obs.height; v += cfg.stride)
        for (int u = 0; u < obs.width; u += cfg.stride) {
            const double dpt = obs.depth_at(u, v);
            if (!(dpt > 0.0)) continue;
            const Vec3 p = *geom::unproject(u, v, dpt, obs.intrinsics, obs.pose);
            if ((p.head<2>() - cam).norm() > cfg.max_range) continue;
            const bool body = p.z() >= cfg.band_lo && p.z() <= cfg.band_hi;
            mark_ray(p.head<2>(), !body);
            if (body) {
                const auto c = grid.cell_of(p.head<2>());
                if (grid.in_bounds(c.x(), c.y())) occ_cells.push_back(grid.index(c.x(), c.y()));
            }
        }

    for (const int i : free_cells) grid.states[i] = Cell::Free;
    for (const int i : occ_cells) grid.states[i] = Cell::Occupied;
}

// ---------------------------------------------------------------------------
// Waypoint following
// ---------------------------------------------------------------------------

enum class PlanStatus { Ok, Unreachable };

struct PlanResult {
    PlanStatus status = PlanStatus::Unreachable;
    sim::Action action = sim::Action::Stop;
};

inline double wrap_angle_deg(double a) {
    a = std::fmod(a + 180.0, 360.0);
    if (a < 0) a += 360.0;
    return a - 180.0;
}

// FMM field from the waypoint over free space (the waypoint cell itself is
// made passable so frontier targets work), then steepest descent from the
// agent; turns until the heading error is inside one turn increment, then
// drives forward.
inline PlanResult plan_actions(const OccupancyGrid& grid, const RigidPose& agent_pose,
                               double agent_yaw_deg, const Vec2& waypoint) {
    PlanResult out;
    const auto wc = grid.cell_of(waypoint);
    if (!grid.in_bounds(wc.x(), wc.y())) return out;
    if (grid.at(wc.x(), wc.y()) == Cell::Occupied) return out;

    std::vector<std::uint8_t> extra(grid.states.size(), 0);
    extra[grid.index(wc.x(), wc.y())] = 1;
    grid::DistanceField field;
    try {
        field = grid::fmm_distance(grid, waypoint, false, &extra);
    } catch (const std::exception&) {
        return out;
    }

    const Vec2 agent = agent_pose.translation.head<2>();
    const auto ac = grid.cell_of(agent);
    if (!grid.in_bounds(ac.x(), ac.y())) return out;
    double here = field[grid.index(ac.x(), ac.y())];
    if (here == grid::kInf) {
        // agent cell can sit on an occupied-marked border; look around it
        for (int dy = -2; dy <= 2 && here == grid::kInf; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
                const int jx = ac.x() + dx, jy = ac.y() + dy;
                if (grid.in_bounds(jx, jy) && field[grid.index(jx, jy)] < here)
                    here = field[grid.index(jx, jy)];
            }
        if (here == grid::kInf) return out;
    }

    const auto look = grid::descend_field(grid, field, agent, 0.45);
    if (!look) return out;
    out.status = PlanStatus::Ok;

    Vec2 dir = *look - agent;
    if (dir.norm() < 0.5 * grid.cell_size) dir = waypoint - agent;
    if (dir.norm() < 1e-9) {
        out.action = sim::Action::MoveForward;
        return out;
    }
    const double want = geom::rad2deg(std::atan2(dir.y(), dir.x()));
    const double err = wrap_angle_deg(want - agent_yaw_deg);
    if (std::abs(err) > sim::kTurnDegrees)
        out.action = err > 0 ? sim::Action::TurnLeft : sim::Action::TurnRight;
    else
        out.action = sim::Action::MoveForward;
    return out;
}

// ---------------------------------------------------------------------------
// Decision layer
// ---------------------------------------------------------------------------

enum class Phase : int { Explore = 0, Reach = 1, Done = 2 };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Explore: return "explore";
        case Phase::Reach: return "reach";
        default: return "done";
    }
}

struct PolicyState {
    Phase phase = Phase::Explore;
    std::optional<Vec2> waypoint;
    std::optional<fine::PoseEstimate> fine_estimate;
    int step_count = 0;
};

struct Decision {
    PolicyState state;
    bool emit_stop = false;
};

struct DecideConfig {
    double reach_radius = 0.25;
};

// Explore: head for the S_a argmax when any activation survives the
// threshold, otherwise the nearest frontier cell; a confirmed stopper plus a
// fine estimate transitions to reach. Reach: track the fine estimate's BEV
// coordinates and stop inside the arrival radius. Exhausted exploration
// (no activation, no frontier) stops as a failed episode.
inline Decision decide(const PolicyState& in, const OccupancyGrid& grid, const Vec2& agent_bev,
                       const coarse::BevScoreMap* s_a, const grid::FrontierScoreMap& s_f,
                       bool stopper_result, const std::optional<fine::PoseEstimate>& fine,
                       const DecideConfig& cfg = {}) {
    Decision out;
    out.state = in;
    out.state.step_count = in.step_count + 1;

    if (in.phase == Phase::Done) {
        out.emit_stop = true;
        return out;
    }

    if (in.phase == Phase::Reach) {
        if (fine) {
            out.state.fine_estimate = fine;
            out.state.waypoint = geom::bev_project(fine->pose);
        }
        if (out.state.waypoint && (agent_bev - *out.state.waypoint).norm() < cfg.reach_radius) {
            out.state.phase = Phase::Done;
            out.emit_stop = true;
        }
        return out;
    }

    // explore
    if (stopper_result && fine) {
        out.state.phase = Phase::Reach;
        out.state.fine_estimate = fine;
        out.state.waypoint = geom::bev_project(fine->pose);
        if ((agent_bev - *out.state.waypoint).norm() < cfg.reach_radius) {
            out.state.phase = Phase::Done;
            out.emit_stop = true;
        }
        return out;
    }

    if (s_a && s_a->any_positive()) {
        out.state.waypoint = s_a->cell_center(s_a->ax, s_a->ay);
        return out;
    }

    if (!s_f.empty) {
        // nearest frontier cell by geodesic distance from the agent
        grid::DistanceField field;
        bool have_field = false;
        const auto ac = grid.cell_of(agent_bev);
        if (grid.in_bounds(ac.x(), ac.y()) && grid.at(ac.x(), ac.y()) == Cell::Free) {
            field = grid::fmm_distance(grid, agent_bev);
            have_field = true;
        }
        double best = grid::kInf;
        int bx = -1, by = -1;
        for (int iy = 0; iy < grid.height; ++iy)
            for (int ix = 0; ix < grid.width; ++ix) {
                if (!s_f.mask[grid.index(ix, iy)]) continue;
                const double d = have_field
                                     ? field[grid.index(ix, iy)]
                                     : (grid.center_of(ix, iy) - agent_bev).norm();
                if (d < best) {
                    best = d;
                    bx = ix;
                    by = iy;
                }
            }
        if (bx >= 0) {
            out.state.waypoint = grid.center_of(bx, by);
            return out;
        }
    }

    // exploration exhausted and the target was never confirmed
    out.state.phase = Phase::Done;
    out.state.waypoint.reset();
    out.emit_stop = true;
    return out;
}

}  // namespace gsnav::policy
