#pragma once

// Synthetic multi-room RGB-D simulator: procedural box-world scenes with
// per-room procedural textures, ray-cast color/depth rendering, ground-truth
// BEV occupancy, discrete agent kinematics and episode sampling.

#include <gsnav/geometry.hpp>
#include <gsnav/grid2d.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace gsnav::sim {

using geom::CameraIntrinsics;
using geom::Mat3;
using geom::RigidPose;
using geom::SpherePose;
using geom::Vec2;
using geom::Vec3;

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

struct TextureSpec {
    int pattern = 0;  // 0 stripes-u, 1 cross, 2 soft checker, 3 diagonal
    double f1 = 1.5, f2 = 2.0;     // cycles per meter
    double phase1 = 0, phase2 = 0;
    double amp = 0.45;
};

enum class SolidKind : int { Wall = 0, Floor = 1, Ceiling = 2, Obstacle = 3 };

struct SolidBox {
    Vec3 lo, hi;
    Vec3 base_color;  // in [0,1]
    TextureSpec tex;
    SolidKind kind = SolidKind::Wall;
};

struct RoomBox {
    Vec2 lo, hi;  // interior footprint
};

struct Scene {
    std::uint64_t seed = 0;
    int room_count = 0;
    double wall_height = 2.6;
    std::vector<RoomBox> rooms;
    std::vector<SolidBox> solids;
    Vec3 bounds_lo, bounds_hi;

    grid::OccupancyGrid ground_truth;  // BEV truth: free inside rooms, occupied at solids

    bool point_in_solid(const Vec3& p, double margin = 0.0) const {
        for (const auto& b : solids)
            if (p.x() > b.lo.x() - margin && p.x() < b.hi.x() + margin &&
                p.y() > b.lo.y() - margin && p.y() < b.hi.y() + margin &&
                p.z() > b.lo.z() - margin && p.z() < b.hi.z() + margin)
                return true;
        return false;
    }
};

namespace detail {

inline double texture_value(const TextureSpec& t, double u, double w) {
    const double tau = 2.0 * geom::kPi;
    switch (t.pattern) {
        case 0: return 0.55 + t.amp * std::sin(tau * (t.f1 * u + t.phase1));
        case 1:
            return 0.55 + 0.5 * t.amp * (std::sin(tau * (t.f1 * u + t.phase1)) +
                                         std::sin(tau * (t.f2 * w + t.phase2)));
        case 2:
            return 0.55 + t.amp * std::sin(tau * (t.f1 * u + t.phase1)) *
                              std::sin(tau * (t.f2 * w + t.phase2));
        default:
            return 0.55 + t.amp * std::sin(tau * (t.f1 * (u + w) + t.phase1));
    }
}

// Surface color at a world point with face normal `n` (axis-aligned).
inline Vec3 shade(const SolidBox& b, const Vec3& p, const Vec3& n) {
    double u, w;
    if (std::abs(n.x()) > 0.5) {
        u = p.y();
        w = p.z();
    } else if (std::abs(n.y()) > 0.5) {
        u = p.x();
        w = p.z();
    } else {
        u = p.x();
        w = p.y();
    }
    const double tv = texture_value(b.tex, u, w);
    static const Vec3 light = Vec3(0.28, 0.17, 0.94).normalized();
    const double lambert = 0.35 + 0.65 * std::max(0.0, n.dot(light));
    Vec3 c = b.base_color * tv * lambert;
    return c.cwiseMin(1.0).cwiseMax(0.0);
}

inline Vec3 hsv(double h, double s, double v) {
    h = std::fmod(h, 1.0) * 6.0;
    const int i = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scene generation. Rooms form a chain along +x, every adjacent pair shares
// a doored wall, so the free-space graph is connected by construction.
// Obstacles are only kept when they do not disconnect the ground-truth grid.
// ---------------------------------------------------------------------------

inline void rebuild_ground_truth(Scene& scene, double cell = 0.05) {
    const double margin = 0.3;
    const Vec2 lo = scene.bounds_lo.head<2>() - Vec2(margin, margin);
    const Vec2 hi = scene.bounds_hi.head<2>() + Vec2(margin, margin);
    const int w = static_cast<int>(std::ceil((hi.x() - lo.x()) / cell));
    const int h = static_cast<int>(std::ceil((hi.y() - lo.y()) / cell));
    scene.ground_truth = grid::OccupancyGrid(cell, lo, w, h);
    const double band_lo = 0.1, band_hi = 1.6;
    for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
            const Vec2 c = scene.ground_truth.center_of(ix, iy);
            bool occ = false;
            for (const auto& b : scene.solids) {
                if (b.hi.z() < band_lo || b.lo.z() > band_hi) continue;
                if (c.x() >= b.lo.x() && c.x() <= b.hi.x() && c.y() >= b.lo.y() &&
                    c.y() <= b.hi.y()) {
                    occ = true;
                    break;
                }
            }
            if (occ) {
                scene.ground_truth.at(ix, iy) = grid::Cell::Occupied;
                continue;
            }
            for (const auto& r : scene.rooms)
                if (c.x() > r.lo.x() && c.x() < r.hi.x() && c.y() > r.lo.y() &&
                    c.y() < r.hi.y()) {
                    scene.ground_truth.at(ix, iy) = grid::Cell::Free;
                    break;
                }
        }
}

inline bool free_space_connected(const Scene& scene) {
    const auto& g = scene.ground_truth;
    int total = 0, first = -1;
    for (size_t i = 0; i < g.states.size(); ++i)
        if (g.states[i] == grid::Cell::Free) {
            ++total;
            if (first < 0) first = static_cast<int>(i);
        }
    if (total == 0) return false;
    std::vector<std::uint8_t> seen(g.states.size(), 0);
    std::vector<int> stack{first};
    seen[first] = 1;
    int reached = 0;
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        ++reached;
        const int ix = id % g.width, iy = id / g.width;
        constexpr int nx[4] = {1, -1, 0, 0}, ny[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int jx = ix + nx[k], jy = iy + ny[k];
            if (!g.in_bounds(jx, jy)) continue;
            const int jd = g.index(jx, jy);
            if (!seen[jd] && g.states[jd] == grid::Cell::Free) {
                seen[jd] = 1;
                stack.push_back(jd);
            }
        }
    }
    return reached == total;
}

inline Scene generate_scene(std::uint64_t seed, int room_count) {
    if (room_count < 2 || room_count > 12)
        throw std::invalid_argument("room_count out of [2,12]");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto uni = [&](double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(rng);
    };
    auto unii = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

    Scene scene;
    scene.seed = seed;
    scene.room_count = room_count;
    const double H = scene.wall_height;
    const double wt = 0.05;  // half wall thickness

    std::vector<double> xs{0.0}, depth;
    for (int i = 0; i < room_count; ++i) {
        xs.push_back(xs.back() + uni(3.2, 5.2));
        depth.push_back(uni(3.4, 5.6));
    }

    auto make_tex = [&](int room_idx) {
        TextureSpec t;
        t.pattern = unii(0, 3);
        t.f1 = uni(1.1, 2.9);
        t.f2 = uni(1.1, 2.9);
        t.phase1 = uni(0.0, 1.0) + 0.173 * room_idx;  // distinct phase per room
        t.phase2 = uni(0.0, 1.0) + 0.317 * room_idx;
        t.amp = uni(0.3, 0.45);
        return t;
    };

    std::vector<Vec3> wall_color(room_count), floor_color(room_count), ceil_color(room_count);
    for (int i = 0; i < room_count; ++i) {
        const double hue = std::fmod(0.618034 * i + uni(0.0, 0.08), 1.0);
        wall_color[i] = detail::hsv(hue, uni(0.35, 0.6), uni(0.75, 0.95));
        floor_color[i] = detail::hsv(std::fmod(hue + 0.45, 1.0), uni(0.3, 0.55), uni(0.45, 0.65));
        ceil_color[i] = detail::hsv(hue, 0.08, 0.95);
    }

    auto push = [&](Vec3 lo, Vec3 hi, Vec3 color, TextureSpec tex, SolidKind kind) {
        scene.solids.push_back({lo, hi, color, tex, kind});
    };

    for (int i = 0; i < room_count; ++i) {
        const double x0 = xs[i], x1 = xs[i + 1], d = depth[i];
        scene.rooms.push_back({{x0, 0.0}, {x1, d}});
        // floor and ceiling, extended over the wall strips
        push({x0, -2 * wt, -0.1}, {x1, d + 2 * wt, 0.0}, floor_color[i], make_tex(i),
             SolidKind::Floor);
        push({x0, -2 * wt, H}, {x1, d + 2 * wt, H + 0.1}, ceil_color[i], make_tex(i),
             SolidKind::Ceiling);
        // south / north walls
        push({x0 - wt, -2 * wt, 0.0}, {x1 + wt, 0.0, H}, wall_color[i], make_tex(i),
             SolidKind::Wall);
        push({x0 - wt, d, 0.0}, {x1 + wt, d + 2 * wt, H}, wall_color[i], make_tex(i),
             SolidKind::Wall);
    }
    // west / east exterior walls
    push({xs[0] - 2 * wt, -2 * wt, 0.0}, {xs[0], depth[0] + 2 * wt, H}, wall_color[0],
         make_tex(0), SolidKind::Wall);
    {
        const int i = room_count - 1;
        push({xs.back(), -2 * wt, 0.0}, {xs.back() + 2 * wt, depth[i] + 2 * wt, H},
             wall_color[i], make_tex(i), SolidKind::Wall);
    }
    // interior shared walls with a door cut in each
    for (int i = 0; i + 1 < room_count; ++i) {
        const double x = xs[i + 1];
        const double ymax = std::max(depth[i], depth[i + 1]);
        const double yfit = std::min(depth[i], depth[i + 1]);
        const double dw = uni(0.85, 1.15);
        const double dy0 = uni(0.3, std::max(0.31, yfit - 0.3 - dw));
        const double dy1 = dy0 + dw, dh = 2.0;
        const Vec3 c = wall_color[i];
        const TextureSpec t = make_tex(i);
        if (dy0 > 0.0)
            push({x - wt, 0.0, 0.0}, {x + wt, dy0, H}, c, t, SolidKind::Wall);
        if (dy1 < ymax)
            push({x - wt, dy1, 0.0}, {x + wt, ymax + 2 * wt, H}, c, t, SolidKind::Wall);
        push({x - wt, dy0, dh}, {x + wt, dy1, H}, c, t, SolidKind::Wall);
    }

    scene.bounds_lo = {xs[0] - 2 * wt, -2 * wt, -0.1};
    scene.bounds_hi = {xs.back() + 2 * wt, *std::max_element(depth.begin(), depth.end()) + 2 * wt,
                       H + 0.1};
    rebuild_ground_truth(scene);

    // obstacles, kept only when free space stays connected
    for (int i = 0; i < room_count; ++i) {
        const int want = unii(0, 2);
        for (int o = 0; o < want; ++o) {
            for (int attempt = 0; attempt < 20; ++attempt) {
                const double fw = uni(0.35, 0.8), fd = uni(0.35, 0.8), fh = uni(0.45, 1.4);
                const double margin = 0.75;
                const double x0 = xs[i] + margin, x1 = xs[i + 1] - margin - fw;
                const double y0 = margin, y1 = depth[i] - margin - fd;
                if (x1 <= x0 || y1 <= y0) break;
                const double px = uni(x0, x1), py = uni(y0, y1);
                SolidBox box{{px, py, 0.0},
                             {px + fw, py + fd, fh},
                             detail::hsv(uni(0.0, 1.0), uni(0.55, 0.85), uni(0.5, 0.9)),
                             make_tex(i),
                             SolidKind::Obstacle};
                // keep clear of door openings on both shared walls
                bool near_door = std::min(std::abs(px - xs[i + 1]), std::abs(px + fw - xs[i])) <
                                 1.2;
                if (i == 0) near_door = std::abs(px - xs[i + 1]) < 1.2;
                if (i == room_count - 1) near_door = std::abs(px + fw - xs[i]) < 1.2;
                if (near_door) continue;
                scene.solids.push_back(box);
                rebuild_ground_truth(scene);
                if (free_space_connected(scene)) break;
                scene.solids.pop_back();
                rebuild_ground_truth(scene);
            }
        }
    }
    rebuild_ground_truth(scene);
    return scene;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct Observation {
    int width = 0, height = 0;
    std::vector<double> rgb;    // H*W*3, [0,1]
    std::vector<double> depth;  // H*W meters, 0 = no hit (sentinel)
    RigidPose pose;
    CameraIntrinsics intrinsics;
    int step_index = 0;
    bool pose_in_solid = false;

    double depth_at(int u, int v) const { return depth[v * width + u]; }
    Vec3 rgb_at(int u, int v) const {
        const size_t i = 3 * (static_cast<size_t>(v) * width + u);
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    double valid_fraction() const {
        size_t n = 0;
        for (double d : depth) n += d > 0.0;
        return depth.empty() ? 0.0 : double(n) / depth.size();
    }
};

namespace detail {

// Slab intersection with t measured in z-depth units (direction has unit
// camera z). Returns entry distance and face normal.
inline bool ray_box(const Vec3& o, const Vec3& dir, const SolidBox& b, double& t_hit,
                    Vec3& normal) {
    double t0 = 1e-4, t1 = std::numeric_limits<double>::infinity();
    int axis = -1;
    double sign = 0;
    for (int a = 0; a < 3; ++a) {
        const double inv = 1.0 / dir[a];
        double tn = (b.lo[a] - o[a]) * inv;
        double tf = (b.hi[a] - o[a]) * inv;
        double s = -1.0;
        if (inv < 0) {
            std::swap(tn, tf);
            s = 1.0;
        }
        if (tn > t0) {
            t0 = tn;
            axis = a;
            sign = s;
        }
        t1 = std::min(t1, tf);
        if (t0 > t1) return false;
    }
    if (axis < 0) return false;  // origin inside the box
    t_hit = t0;
    normal = Vec3::Zero();
    normal[axis] = sign;
    return true;
}

}  // namespace detail

inline Observation render(const Scene& scene, const RigidPose& pose,
                          const CameraIntrinsics& intr, int step_index = 0) {
    Observation obs;
    obs.width = intr.width;
    obs.height = intr.height;
    obs.pose = pose;
    obs.intrinsics = intr;
    obs.step_index = step_index;
    obs.rgb.assign(static_cast<size_t>(intr.width) * intr.height * 3, 0.0);
    obs.depth.assign(static_cast<size_t>(intr.width) * intr.height, 0.0);

    if (scene.point_in_solid(pose.translation)) {
        obs.pose_in_solid = true;
        return obs;
    }

    const Vec3 o = pose.translation;
    for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
            const Vec3 dc((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
            const Vec3 dw = pose.rotation * dc;
            double best_t = std::numeric_limits<double>::infinity();
            const SolidBox* best_box = nullptr;
            Vec3 best_n = Vec3::Zero();
            for (const auto& b : scene.solids) {
                double t;
                Vec3 n;
                if (detail::ray_box(o, dw, b, t, n) && t < best_t) {
                    best_t = t;
                    best_box = &b;
                    best_n = n;
                }
            }
            if (!best_box) continue;
            const Vec3 p = o + best_t * dw;
            const Vec3 c = detail::shade(*best_box, p, best_n);
            const size_t i = 3 * (static_cast<size_t>(v) * intr.width + u);
            obs.rgb[i] = c.x();
            obs.rgb[i + 1] = c.y();
            obs.rgb[i + 2] = c.z();
            obs.depth[v * intr.width + u] = best_t;  // z-depth: dc.z == 1
        }
    }
    return obs;
}

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

enum class Action : int { MoveForward = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };

inline const char* action_name(Action a) {
    switch (a) {
        case Action::MoveForward: return "move_forward";
        case Action::TurnLeft: return "turn_left";
        case Action::TurnRight: return "turn_right";
        default: return "stop";
    }
}

inline std::optional<Action> action_from_name(const std::string& s) {
    if (s == "move_forward") return Action::MoveForward;
    if (s == "turn_left") return Action::TurnLeft;
    if (s == "turn_right") return Action::TurnRight;
    if (s == "stop") return Action::Stop;
    return std::nullopt;
}

struct AgentState {
    Vec2 bev = Vec2::Zero();
    double yaw_deg = 0.0;
    double height = 1.25;
    int collision_count = 0;
    int steps_taken = 0;
    bool stopped = false;

    RigidPose pose() const {
        RigidPose p;
        p.rotation = geom::sphere_rotation(0.0, geom::wrap_degrees(yaw_deg));
        p.translation = Vec3(bev.x(), bev.y(), height);
        return p;
    }
};

inline constexpr double kStepMeters = 0.25;
inline constexpr double kTurnDegrees = 15.0;
inline constexpr double kAgentRadius = 0.18;

inline bool position_blocked(const Scene& scene, const Vec2& p, double radius = kAgentRadius) {
    const auto& g = scene.ground_truth;
    const int r = static_cast<int>(std::ceil(radius / g.cell_size));
    const auto c = g.cell_of(p);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const int ix = c.x() + dx, iy = c.y() + dy;
            if (!g.in_bounds(ix, iy)) return true;
            const Vec2 cc = g.center_of(ix, iy);
            if ((cc - p).norm() > radius + 0.5 * g.cell_size) continue;
            if (g.at(ix, iy) != grid::Cell::Free) return true;
        }
    return false;
}

inline AgentState step(const Scene& scene, const AgentState& state, Action action) {
    AgentState next = state;
    if (state.stopped) return next;
    switch (action) {
        case Action::MoveForward: {
            const double yaw = geom::deg2rad(state.yaw_deg);
            const Vec2 target = state.bev + kStepMeters * Vec2(std::cos(yaw), std::sin(yaw));
            if (position_blocked(scene, target))
                next.collision_count += 1;
            else
                next.bev = target;
            break;
        }
        case Action::TurnLeft: next.yaw_deg = state.yaw_deg + kTurnDegrees; break;
        case Action::TurnRight: next.yaw_deg = state.yaw_deg - kTurnDegrees; break;
        case Action::Stop: next.stopped = true; break;
    }
    next.steps_taken = state.steps_taken + 1;
    return next;
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

enum class Difficulty : int { Easy = 0, Medium = 1, Hard = 2 };
enum class FovBand : int { Narrow = 0, Wide = 1 };

inline const char* difficulty_name(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        default: return "hard";
    }
}
inline const char* fov_band_name(FovBand f) { return f == FovBand::Narrow ? "narrow" : "wide"; }

inline std::pair<double, double> difficulty_band(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return {1.5, 3.0};
        case Difficulty::Medium: return {3.0, 5.0};
        default: return {5.0, 10.0};
    }
}
inline std::pair<double, double> fov_range(FovBand f) {
    return f == FovBand::Narrow ? std::pair{50.0, 75.0} : std::pair{75.0, 100.0};
}

struct Episode {
    std::uint64_t scene_seed = 0;
    int room_count = 0;
    int index = 0;
    Difficulty difficulty = Difficulty::Easy;
    FovBand fov_band = FovBand::Narrow;
    Vec2 start_bev = Vec2::Zero();
    double start_yaw_deg = 0.0;
    SpherePose goal;           // free-view goal camera pose
    double goal_fov_deg = 60;  // horizontal
    int goal_width = 160, goal_height = 120;
    double geodesic_m = 0.0;   // start -> goal BEV through free space

    CameraIntrinsics goal_intrinsics() const {
        return CameraIntrinsics::from_fov(goal_fov_deg, goal_width, goal_height);
    }
    RigidPose goal_pose() const { return geom::sphere_to_rigid(goal); }
};

struct EpisodeError {
    std::string message;
};

inline std::optional<Vec2> sample_free_position(const Scene& scene, std::mt19937_64& rng,
                                                double clearance = kAgentRadius + 0.05) {
    std::uniform_int_distribution<int> pick_room(0, scene.room_count - 1);
    for (int attempt = 0; attempt < 200; ++attempt) {
        const auto& r = scene.rooms[pick_room(rng)];
        std::uniform_real_distribution<double> ux(r.lo.x() + clearance, r.hi.x() - clearance);
        std::uniform_real_distribution<double> uy(r.lo.y() + clearance, r.hi.y() - clearance);
        const Vec2 p(ux(rng), uy(rng));
        if (!position_blocked(scene, p, clearance)) return p;
    }
    return std::nullopt;
}

// Returns the episode or an explanation of why sampling failed. The goal is
// a free SpherePose: arbitrary in-room height, elevation in [-45, 45], any
// azimuth, FOV drawn from the requested band. The goal view must contain at
// least 30% valid depth and the start->goal BEV geodesic must land in the
// difficulty band.
inline std::variant<Episode, EpisodeError> sample_episode(const Scene& scene,
                                                          Difficulty difficulty, FovBand band,
                                                          std::uint64_t rng_seed,
                                                          int obs_width = 160,
                                                          int obs_height = 120) {
    std::mt19937_64 rng(rng_seed ^ 0xa0761d6478bd642fULL);
    auto uni = [&](double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(rng);
    };
    const auto [gmin, gmax] = difficulty_band(difficulty);
    const auto [fmin, fmax] = fov_range(band);

    for (int attempt = 0; attempt < 1000; ++attempt) {
        const auto start = sample_free_position(scene, rng);
        if (!start) continue;
        const auto goal_xy = sample_free_position(scene, rng, 0.12);
        if (!goal_xy) continue;

        // geodesic through ground-truth free space
        grid::DistanceField field;
        try {
            field = grid::fmm_distance(scene.ground_truth, *start);
        } catch (const std::exception&) {
            continue;
        }
        const auto gc = scene.ground_truth.cell_of(*goal_xy);
        const double geo = field[scene.ground_truth.index(gc.x(), gc.y())];
        if (!(geo >= gmin && geo < gmax)) continue;

        SpherePose goal;
        goal.x = goal_xy->x();
        goal.y = goal_xy->y();
        goal.z = uni(0.6, scene.wall_height - 0.5);
        goal.theta_deg = uni(-45.0, 45.0);
        goal.phi_deg = uni(0.0, 360.0);
        const double fov = uni(fmin, fmax);

        const auto intr = CameraIntrinsics::from_fov(fov, obs_width, obs_height);
        const Observation view = render(scene, geom::sphere_to_rigid(goal), intr);
        if (view.pose_in_solid || view.valid_fraction() < 0.3) continue;

        Episode ep;
        ep.scene_seed = scene.seed;
        ep.room_count = scene.room_count;
        ep.difficulty = difficulty;
        ep.fov_band = band;
        ep.start_bev = *start;
        ep.start_yaw_deg = std::floor(uni(0.0, 24.0)) * kTurnDegrees;
        ep.goal = goal;
        ep.goal_fov_deg = fov;
        ep.goal_width = obs_width;
        ep.goal_height = obs_height;
        ep.geodesic_m = geo;
        return ep;
    }
    return EpisodeError{"episode sampling failed after 1000 rejections"};
}

}  // namespace gsnav::sim
