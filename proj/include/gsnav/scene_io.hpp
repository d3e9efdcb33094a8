#pragma once

// Textual (JSON) schemas for scenes and episodes. Scene documents list the
// seed, room boxes, solid boxes with texture parameters and base colors, and
// round-trip exactly; the ground-truth grid is derived on load.

#include <gsnav/sim.hpp>

#include <json.hpp>

#include <fstream>
#include <string>

namespace gsnav::sim {

using nlohmann::json;

inline json to_json(const TextureSpec& t) {
    return json{{"pattern", t.pattern}, {"f1", t.f1},         {"f2", t.f2},
                {"phase1", t.phase1},   {"phase2", t.phase2}, {"amp", t.amp}};
}

inline TextureSpec texture_from_json(const json& j) {
    TextureSpec t;
    t.pattern = j.at("pattern");
    t.f1 = j.at("f1");
    t.f2 = j.at("f2");
    t.phase1 = j.at("phase1");
    t.phase2 = j.at("phase2");
    t.amp = j.at("amp");
    return t;
}

inline json scene_to_json(const Scene& scene) {
    json j;
    j["seed"] = scene.seed;
    j["room_count"] = scene.room_count;
    j["wall_height"] = scene.wall_height;
    j["bounds_lo"] = {scene.bounds_lo.x(), scene.bounds_lo.y(), scene.bounds_lo.z()};
    j["bounds_hi"] = {scene.bounds_hi.x(), scene.bounds_hi.y(), scene.bounds_hi.z()};
    j["rooms"] = json::array();
    for (const auto& r : scene.rooms)
        j["rooms"].push_back({{"lo", {r.lo.x(), r.lo.y()}}, {"hi", {r.hi.x(), r.hi.y()}}});
    j["solids"] = json::array();
    for (const auto& b : scene.solids) {
        json s;
        s["lo"] = {b.lo.x(), b.lo.y(), b.lo.z()};
        s["hi"] = {b.hi.x(), b.hi.y(), b.hi.z()};
        s["color"] = {b.base_color.x(), b.base_color.y(), b.base_color.z()};
        s["texture"] = to_json(b.tex);
        s["kind"] = static_cast<int>(b.kind);
        j["solids"].push_back(std::move(s));
    }
    return j;
}

inline Scene scene_from_json(const json& j) {
    Scene scene;
    scene.seed = j.at("seed");
    scene.room_count = j.at("room_count");
    scene.wall_height = j.at("wall_height");
    for (int a = 0; a < 3; ++a) {
        scene.bounds_lo[a] = j.at("bounds_lo")[a];
        scene.bounds_hi[a] = j.at("bounds_hi")[a];
    }
    for (const auto& r : j.at("rooms")) {
        RoomBox rb;
        rb.lo = geom::Vec2(r.at("lo")[0], r.at("lo")[1]);
        rb.hi = geom::Vec2(r.at("hi")[0], r.at("hi")[1]);
        scene.rooms.push_back(rb);
    }
    for (const auto& s : j.at("solids")) {
        SolidBox b;
        for (int a = 0; a < 3; ++a) {
            b.lo[a] = s.at("lo")[a];
            b.hi[a] = s.at("hi")[a];
            b.base_color[a] = s.at("color")[a];
        }
        b.tex = texture_from_json(s.at("texture"));
        b.kind = static_cast<SolidKind>(s.at("kind").get<int>());
        scene.solids.push_back(b);
    }
    rebuild_ground_truth(scene);
    return scene;
}

inline void save_scene(const Scene& scene, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write scene file: " + path);
    os << scene_to_json(scene).dump(1) << "\n";
}

inline Scene load_scene(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read scene file: " + path);
    json j;
    is >> j;
    return scene_from_json(j);
}

// FNV-1a over the serialized document; used by determinism checks.
inline std::uint64_t scene_hash(const Scene& scene) {
    const std::string s = scene_to_json(scene).dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline json episode_to_json(const Episode& e) {
    json j;
    j["scene_seed"] = e.scene_seed;
    j["room_count"] = e.room_count;
    j["index"] = e.index;
    j["difficulty"] = difficulty_name(e.difficulty);
    j["fov_band"] = fov_band_name(e.fov_band);
    j["start_bev"] = {e.start_bev.x(), e.start_bev.y()};
    j["start_yaw_deg"] = e.start_yaw_deg;
    j["goal"] = {{"x", e.goal.x},
                 {"y", e.goal.y},
                 {"z", e.goal.z},
                 {"theta_deg", e.goal.theta_deg},
                 {"phi_deg", e.goal.phi_deg}};
    j["goal_fov_deg"] = e.goal_fov_deg;
    j["goal_width"] = e.goal_width;
    j["goal_height"] = e.goal_height;
    j["geodesic_m"] = e.geodesic_m;
    return j;
}

inline Episode episode_from_json(const json& j) {
    Episode e;
    e.scene_seed = j.at("scene_seed");
    e.room_count = j.at("room_count");
    e.index = j.at("index");
    const std::string d = j.at("difficulty");
    e.difficulty = d == "easy"     ? Difficulty::Easy
                   : d == "medium" ? Difficulty::Medium
                                   : Difficulty::Hard;
    e.fov_band = j.at("fov_band") == "narrow" ? FovBand::Narrow : FovBand::Wide;
    e.start_bev = geom::Vec2(j.at("start_bev")[0], j.at("start_bev")[1]);
    e.start_yaw_deg = j.at("start_yaw_deg");
    e.goal.x = j.at("goal").at("x");
    e.goal.y = j.at("goal").at("y");
    e.goal.z = j.at("goal").at("z");
    e.goal.theta_deg = j.at("goal").at("theta_deg");
    e.goal.phi_deg = j.at("goal").at("phi_deg");
    e.goal_fov_deg = j.at("goal_fov_deg");
    e.goal_width = j.at("goal_width");
    e.goal_height = j.at("goal_height");
    e.geodesic_m = j.at("geodesic_m");
    return e;
}

}  // namespace gsnav::sim
