#pragma once

// Shared fixtures: a hand-built textured room (no obstacles, exact geometry)
// and a free-spot finder for generated scenes.

#include <gsnav/sim.hpp>

namespace gsnav::testsupport {

using geom::Vec2;
using geom::Vec3;

// one 6 x 5 x 2.6 room; every surface carries a distinct procedural texture
inline sim::Scene textured_room_scene() {
    sim::Scene s;
    s.seed = 0;
    s.room_count = 1;
    s.rooms.push_back({{0, 0}, {6, 5}});
    const double H = s.wall_height;
    int salt = 0;
    auto tex = [&salt](int pattern, double f1, double f2) {
        sim::TextureSpec t;
        t.pattern = pattern;
        t.f1 = f1;
        t.f2 = f2;
        t.phase1 = 0.137 + 0.311 * salt;
        t.phase2 = 0.521 + 0.173 * salt;
        t.amp = 0.42;
        ++salt;
        return t;
    };
    auto box = [&](Vec3 lo, Vec3 hi, Vec3 color, sim::TextureSpec t, sim::SolidKind kind) {
        s.solids.push_back({lo, hi, color, t, kind});
    };
    box({-0.1, -0.1, -0.1}, {6.1, 5.1, 0.0}, {0.55, 0.45, 0.35}, tex(1, 1.7, 2.3),
        sim::SolidKind::Floor);
    box({-0.1, -0.1, H}, {6.1, 5.1, H + 0.1}, {0.9, 0.9, 0.85}, tex(0, 1.3, 1.3),
        sim::SolidKind::Ceiling);
    box({-0.1, -0.1, 0}, {0, 5.1, H}, {0.8, 0.5, 0.4}, tex(2, 1.9, 2.7), sim::SolidKind::Wall);
    box({6.0, -0.1, 0}, {6.1, 5.1, H}, {0.4, 0.7, 0.8}, tex(1, 2.4, 1.6), sim::SolidKind::Wall);
    box({-0.1, -0.1, 0}, {6.1, 0, H}, {0.5, 0.8, 0.45}, tex(3, 1.5, 2.1), sim::SolidKind::Wall);
    box({-0.1, 5.0, 0}, {6.1, 5.1, H}, {0.85, 0.75, 0.4}, tex(2, 2.8, 1.8),
        sim::SolidKind::Wall);
    s.bounds_lo = {-0.1, -0.1, -0.1};
    s.bounds_hi = {6.1, 5.1, H + 0.1};
    sim::rebuild_ground_truth(s);
    return s;
}

// nearest unblocked position to `want` on a coarse search lattice
inline Vec2 free_spot(const sim::Scene& scene, const Vec2& want, double clearance = 0.3) {
    if (!sim::position_blocked(scene, want, clearance)) return want;
    for (double r = 0.2; r < 4.0; r += 0.2)
        for (int i = 0; i < 16; ++i) {
            const double a = 2.0 * geom::kPi * i / 16;
            const Vec2 p = want + r * Vec2(std::cos(a), std::sin(a));
            if (!sim::position_blocked(scene, p, clearance)) return p;
        }
    return want;
}

}  // namespace gsnav::testsupport
