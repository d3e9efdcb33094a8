#include <gsnav/scene_io.hpp>
#include <gsnav/sim.hpp>

#include <catch2/catch_amalgamated.hpp>

using namespace gsnav;
using geom::Vec3;

namespace {

sim::Scene test_scene() {
    static sim::Scene scene = sim::generate_scene(7, 4);
    return scene;
}

// one 6 x 5 room with plain walls and no obstacles, for exact-geometry checks
sim::Scene box_scene() {
    sim::Scene s;
    s.seed = 0;
    s.room_count = 1;
    s.rooms.push_back({{0, 0}, {6, 5}});
    const double H = s.wall_height;
    sim::TextureSpec tex;
    auto box = [&](Vec3 lo, Vec3 hi, sim::SolidKind kind) {
        s.solids.push_back({lo, hi, Vec3(0.7, 0.6, 0.5), tex, kind});
    };
    box({-0.1, -0.1, -0.1}, {6.1, 5.1, 0.0}, sim::SolidKind::Floor);
    box({-0.1, -0.1, H}, {6.1, 5.1, H + 0.1}, sim::SolidKind::Ceiling);
    box({-0.1, -0.1, 0}, {0, 5.1, H}, sim::SolidKind::Wall);
    box({6.0, -0.1, 0}, {6.1, 5.1, H}, sim::SolidKind::Wall);
    box({-0.1, -0.1, 0}, {6.1, 0, H}, sim::SolidKind::Wall);
    box({-0.1, 5.0, 0}, {6.1, 5.1, H}, sim::SolidKind::Wall);
    s.bounds_lo = {-0.1, -0.1, -0.1};
    s.bounds_hi = {6.1, 5.1, H + 0.1};
    sim::rebuild_ground_truth(s);
    return s;
}

}  // namespace

TEST_CASE("scene generation is deterministic and seed-sensitive") {
    const auto a = sim::generate_scene(7, 4);
    const auto b = sim::generate_scene(7, 4);
    const auto c = sim::generate_scene(8, 4);
    REQUIRE(sim::scene_hash(a) == sim::scene_hash(b));
    REQUIRE(sim::scene_hash(a) != sim::scene_hash(c));
}

TEST_CASE("free space is connected for a range of seeds") {
    for (const std::uint64_t seed : {1ull, 2ull, 3ull, 11ull, 23ull, 99ull}) {
        const auto scene = sim::generate_scene(seed, 5);
        REQUIRE(sim::free_space_connected(scene));
    }
}

TEST_CASE("scene text schema round-trips exactly") {
    const auto scene = test_scene();
    const auto j = sim::scene_to_json(scene);
    const auto back = sim::scene_from_json(j);
    REQUIRE(sim::scene_to_json(back) == j);
    REQUIRE(sim::scene_hash(back) == sim::scene_hash(scene));
}

TEST_CASE("render: perpendicular wall depth at the optical axis") {
    // camera looking straight at the east wall from exactly 2 m
    const auto scene = box_scene();
    geom::SpherePose sp{4.0, 2.5, 1.3, 0, 0};
    const auto intr = geom::CameraIntrinsics::from_fov(75, 160, 120);
    const auto obs = sim::render(scene, geom::sphere_to_rigid(sp), intr);
    REQUIRE_FALSE(obs.pose_in_solid);
    const double d = obs.depth_at(static_cast<int>(intr.cx), static_cast<int>(intr.cy));
    REQUIRE(d == Catch::Approx(2.0).margin(1e-6));
    // perpendicular wall: z-depth is constant across every wall pixel
    REQUIRE(obs.depth_at(30, 60) == Catch::Approx(2.0).margin(1e-6));
}

TEST_CASE("render: center pixel is fov-invariant") {
    const auto scene = test_scene();
    geom::SpherePose sp{scene.rooms[0].lo.x() + 1.2, scene.rooms[0].lo.y() + 1.1, 1.2, -5, 33};
    const auto a = sim::render(scene, geom::sphere_to_rigid(sp),
                               geom::CameraIntrinsics::from_fov(60, 160, 120));
    const auto b = sim::render(scene, geom::sphere_to_rigid(sp),
                               geom::CameraIntrinsics::from_fov(90, 160, 120));
    REQUIRE((a.rgb_at(80, 60) - b.rgb_at(80, 60)).norm() < 1e-12);
}

TEST_CASE("render: depth is consistent with unprojection onto surfaces") {
    const auto scene = test_scene();
    geom::SpherePose sp{scene.rooms[1].lo.x() + 1.5, scene.rooms[1].lo.y() + 1.5, 1.1, -15, 70};
    const auto intr = geom::CameraIntrinsics::from_fov(75, 80, 60);
    const auto obs = sim::render(scene, geom::sphere_to_rigid(sp), intr);

    auto on_some_surface = [&](const Vec3& p) {
        for (const auto& b : scene.solids) {
            // inside the box expanded by tolerance and near one of its faces
            const double tol = 1e-4;
            if (p.x() > b.lo.x() - tol && p.x() < b.hi.x() + tol && p.y() > b.lo.y() - tol &&
                p.y() < b.hi.y() + tol && p.z() > b.lo.z() - tol && p.z() < b.hi.z() + tol) {
                for (int a = 0; a < 3; ++a)
                    if (std::abs(p[a] - b.lo[a]) < tol || std::abs(p[a] - b.hi[a]) < tol)
                        return true;
            }
        }
        return false;
    };

    int checked = 0;
    for (int v = 0; v < obs.height; v += 7)
        for (int u = 0; u < obs.width; u += 7) {
            const double d = obs.depth_at(u, v);
            if (!(d > 0)) continue;
            const auto w = geom::unproject(u, v, d, intr, obs.pose);
            REQUIRE(on_some_surface(*w));
            ++checked;
        }
    REQUIRE(checked > 50);
}

TEST_CASE("render: deterministic and pose-in-solid flagged") {
    const auto scene = test_scene();
    geom::SpherePose sp{scene.rooms[0].lo.x() + 1.0, scene.rooms[0].lo.y() + 1.0, 1.25, 0, 10};
    const auto intr = geom::CameraIntrinsics::from_fov(75, 64, 48);
    const auto a = sim::render(scene, geom::sphere_to_rigid(sp), intr);
    const auto b = sim::render(scene, geom::sphere_to_rigid(sp), intr);
    REQUIRE(a.rgb == b.rgb);
    REQUIRE(a.depth == b.depth);

    geom::RigidPose inside;
    inside.translation = Vec3(scene.rooms[0].hi.x(), 0.5, 1.0);  // inside the shared wall
    const auto bad = sim::render(scene, inside, intr);
    REQUIRE(bad.pose_in_solid);
    REQUIRE(bad.valid_fraction() == 0.0);
}

TEST_CASE("agent turns compose to identity and forward steps advance 0.25 m") {
    const auto scene = box_scene();
    sim::AgentState s;
    s.bev = {1.5, 2.5};
    s.yaw_deg = 30;
    auto t = s;
    for (int i = 0; i < 24; ++i) t = sim::step(scene, t, sim::Action::TurnLeft);
    REQUIRE(std::abs(t.yaw_deg - (30 + 360)) < 1e-9);
    const auto ra = t.pose().rotation, rb = s.pose().rotation;
    REQUIRE((ra - rb).cwiseAbs().maxCoeff() < 1e-9);

    // four free forward steps displace exactly one meter
    auto f = s;
    f.yaw_deg = 0;
    for (int i = 0; i < 4; ++i) f = sim::step(scene, f, sim::Action::MoveForward);
    REQUIRE(f.collision_count == 0);
    REQUIRE((f.bev - s.bev).norm() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(f.steps_taken == 4);

    // stop freezes the state
    auto z = sim::step(scene, f, sim::Action::Stop);
    REQUIRE(z.stopped);
    z = sim::step(scene, z, sim::Action::MoveForward);
    REQUIRE((z.bev - f.bev).norm() == 0.0);
}

TEST_CASE("agent blocked by a wall keeps pose and counts the collision") {
    const auto scene = box_scene();
    sim::AgentState s;
    s.bev = {5.65, 2.5};  // the forward step would stop 0.1 m short of the east wall
    s.yaw_deg = 0;
    const auto t = sim::step(scene, s, sim::Action::MoveForward);
    REQUIRE(t.collision_count == 1);
    REQUIRE((t.bev - s.bev).norm() == 0.0);
}

TEST_CASE("episode sampling is deterministic and respects bands") {
    const auto scene = sim::generate_scene(23, 5);
    const auto r1 = sim::sample_episode(scene, sim::Difficulty::Easy, sim::FovBand::Narrow, 99);
    const auto r2 = sim::sample_episode(scene, sim::Difficulty::Easy, sim::FovBand::Narrow, 99);
    REQUIRE(std::holds_alternative<sim::Episode>(r1));
    const auto& e1 = std::get<sim::Episode>(r1);
    const auto& e2 = std::get<sim::Episode>(r2);
    REQUIRE(e1.start_bev == e2.start_bev);
    REQUIRE(e1.goal.phi_deg == e2.goal.phi_deg);
    REQUIRE(e1.goal_fov_deg == e2.goal_fov_deg);

    REQUIRE(e1.geodesic_m >= 1.5);
    REQUIRE(e1.geodesic_m < 3.0);
    REQUIRE(e1.goal_fov_deg >= 50.0);
    REQUIRE(e1.goal_fov_deg <= 75.0);
    REQUIRE(e1.goal.theta_deg >= -45.0);
    REQUIRE(e1.goal.theta_deg <= 45.0);

    // goal view carries enough depth
    const auto view = sim::render(scene, e1.goal_pose(), e1.goal_intrinsics());
    REQUIRE(view.valid_fraction() >= 0.3);

    const auto wide =
        sim::sample_episode(scene, sim::Difficulty::Medium, sim::FovBand::Wide, 5);
    REQUIRE(std::holds_alternative<sim::Episode>(wide));
    const auto& ew = std::get<sim::Episode>(wide);
    REQUIRE(ew.goal_fov_deg >= 75.0);
    REQUIRE(ew.goal_fov_deg <= 100.0);
    REQUIRE(ew.geodesic_m >= 3.0);
    REQUIRE(ew.geodesic_m < 5.0);

    // episode documents round-trip
    const auto j = sim::episode_to_json(e1);
    const auto back = sim::episode_from_json(j);
    REQUIRE(sim::episode_to_json(back) == j);
}
