#include <gsnav/coarse_match.hpp>
#include <gsnav/gaussian_map.hpp>
#include <gsnav/rasterizer.hpp>
#include <gsnav/sim.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "support/scenes.hpp"

#include <filesystem>

using namespace gsnav;
using geom::Vec3;

namespace {

const sim::Scene& scene() {
    static sim::Scene s = testsupport::textured_room_scene();
    return s;
}

sim::Observation wall_view() {
    geom::SpherePose sp{4.0, 2.5, 1.3, 0, 0};  // 2 m from the east wall
    return sim::render(scene(), geom::sphere_to_rigid(sp),
                       geom::CameraIntrinsics::from_fov(75, 160, 120));
}

double psnr(const std::vector<double>& a, const std::vector<double>& b) {
    double mse = 0;
    for (size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= a.size();
    return 10.0 * std::log10(1.0 / std::max(mse, 1e-12));
}

}  // namespace

TEST_CASE("lifting produces one gaussian per valid strided pixel") {
    const auto obs = wall_view();
    gsmap::LiftConfig cfg;
    cfg.stride = 2;
    const auto lifted = gsmap::lift_observation(obs, cfg);
    size_t expect = 0;
    for (int v = 0; v < obs.height; v += 2)
        for (int u = 0; u < obs.width; u += 2)
            if (obs.depth_at(u, v) > 0) ++expect;
    REQUIRE(lifted.gaussians.size() == expect);
    REQUIRE(lifted.descriptors.size() == expect);
    // closed room: every strided pixel valid
    REQUIRE(expect == static_cast<size_t>(80 * 60));

    for (size_t i = 0; i < lifted.gaussians.size(); i += 97) {
        REQUIRE(lifted.gaussians[i].alpha == Catch::Approx(0.8));
        REQUIRE((lifted.descriptors[i].position - lifted.gaussians[i].mu).norm() == 0.0);
        REQUIRE(lifted.gaussians[i].scale.x() >= 0.005);
        REQUIRE(lifted.gaussians[i].scale.x() <= 0.2);
    }
}

TEST_CASE("lifted centers sit on scene surfaces") {
    const auto obs = wall_view();
    const auto lifted = gsmap::lift_observation(obs, {});
    int on = 0;
    for (const auto& g : lifted.gaussians) {
        bool hit = false;
        for (const auto& b : scene().solids) {
            const double tol = 1e-3;
            if (g.mu.x() > b.lo.x() - tol && g.mu.x() < b.hi.x() + tol &&
                g.mu.y() > b.lo.y() - tol && g.mu.y() < b.hi.y() + tol &&
                g.mu.z() > b.lo.z() - tol && g.mu.z() < b.hi.z() + tol)
                for (int a = 0; a < 3; ++a)
                    if (std::abs(g.mu[a] - b.lo[a]) < tol || std::abs(g.mu[a] - b.hi[a]) < tol)
                        hit = true;
        }
        on += hit;
    }
    REQUIRE(on == static_cast<int>(lifted.gaussians.size()));
}

TEST_CASE("sentinel depth pixels lift nothing") {
    sim::Observation obs;
    obs.width = 16;
    obs.height = 12;
    obs.intrinsics = geom::CameraIntrinsics::from_fov(75, 16, 12);
    obs.rgb.assign(16 * 12 * 3, 0.5);
    obs.depth.assign(16 * 12, 0.0);
    const auto lifted = gsmap::lift_observation(obs, {});
    REQUIRE(lifted.gaussians.empty());
}

TEST_CASE("descriptor: flat wall patch has empty gradient bins, wall normal, unit bias") {
    const auto obs = wall_view();
    const int u = obs.width / 2, v = obs.height / 2;
    const auto f = gsmap::describe_pixel(obs, u, v);
    REQUIRE(f.has_value());
    REQUIRE((*f)[11] == 1.0);
    // normal should match the wall normal (-x in world, wall faces the camera)
    const Vec3 n = f->segment<3>(7);
    REQUIRE(n.norm() == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(std::acos(std::clamp(n.dot(Vec3(-1, 0, 0)), -1.0, 1.0)) < geom::deg2rad(5.0));
    REQUIRE((*f)[11] == 1.0);
    // perpendicular wall: depth nearly constant over the window
    REQUIRE((*f)[10] < 0.05);
}

TEST_CASE("descriptor: two yaw-differing views of one surface point agree") {
    // point on the room's north wall
    const Vec3 target(2.0, 5.0, 1.3);
    auto view_from = [&](double dx, double dy) {
        const Vec3 cam(target.x() + dx, target.y() + dy, 1.3);
        const Vec3 d = target - cam;
        geom::SpherePose sp;
        sp.x = cam.x();
        sp.y = cam.y();
        sp.z = cam.z();
        sp.theta_deg = 0;
        sp.phi_deg = geom::wrap_degrees(geom::rad2deg(std::atan2(d.y(), d.x())));
        return sim::render(scene(), geom::sphere_to_rigid(sp),
                           geom::CameraIntrinsics::from_fov(75, 160, 120));
    };
    const auto a = view_from(0.4, -1.8);
    const auto b = view_from(-0.5, -1.6);

    // locate the target pixel in both views via projection
    auto pixel_of = [&](const sim::Observation& o) {
        const Vec3 cam_pt = o.pose.inverse().apply(target);
        const auto px = geom::project(cam_pt, o.intrinsics);
        REQUIRE(px.has_value());
        return std::pair{static_cast<int>(std::round(px->u)),
                         static_cast<int>(std::round(px->v))};
    };
    const auto [ua, va] = pixel_of(a);
    const auto [ub, vb] = pixel_of(b);
    const auto fa = gsmap::describe_pixel(a, ua, va);
    const auto fb = gsmap::describe_pixel(b, ub, vb);
    REQUIRE(fa.has_value());
    REQUIRE(fb.has_value());
    const double cos = fa->dot(*fb) / (fa->norm() * fb->norm());
    REQUIRE(cos > 0.9);
}

TEST_CASE("integration: union, budget, and order insensitivity") {
    const auto obs = wall_view();
    const auto lifted = gsmap::lift_observation(obs, {});

    gsmap::GaussianMap map(1 << 20);
    map.integrate(lifted);
    REQUIRE(map.size() == lifted.gaussians.size());

    // order insensitivity pre-pruning (multiset of positions)
    geom::SpherePose sp{1.2, 1.1, 1.3, 0, 45};
    const auto obs2 = sim::render(scene(), geom::sphere_to_rigid(sp),
                                  geom::CameraIntrinsics::from_fov(75, 160, 120));
    const auto lifted2 = gsmap::lift_observation(obs2, {});
    gsmap::GaussianMap ab(1 << 20), ba(1 << 20);
    ab.integrate(lifted);
    ab.integrate(lifted2);
    ba.integrate(lifted2);
    ba.integrate(lifted);
    auto key = [](const gsmap::Gaussian& g) {
        return std::tuple{g.mu.x(), g.mu.y(), g.mu.z(), g.color.x()};
    };
    std::vector<std::tuple<double, double, double, double>> ka, kb;
    for (const auto& g : ab.gaussians()) ka.push_back(key(g));
    for (const auto& g : ba.gaussians()) kb.push_back(key(g));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    REQUIRE(ka == kb);

    // budget invariant over many frames
    gsmap::GaussianMap small(5000);
    for (int i = 0; i < 5; ++i) small.integrate(lifted);
    REQUIRE(small.size() == 5000);
    REQUIRE(small.size() >= static_cast<size_t>(0.9 * 5000));
}

TEST_CASE("pruning duplicates keeps rendering quality") {
    const auto obs = wall_view();
    const auto lifted = gsmap::lift_observation(obs, {});

    gsmap::GaussianMap once(1 << 20);
    once.integrate(lifted);
    gsmap::GaussianMap twice(lifted.gaussians.size());  // budget = single lift count
    twice.integrate(lifted);
    twice.integrate(lifted);
    REQUIRE(twice.size() == lifted.gaussians.size());

    splat::RenderSettings rs;
    rs.record_contribs = false;
    const auto ra = splat::rasterize(once, obs.intrinsics, obs.pose, rs);
    const auto rb = splat::rasterize(twice, obs.intrinsics, obs.pose, rs);
    const double pa = psnr(ra.rgb, obs.rgb);
    const double pb = psnr(rb.rgb, obs.rgb);
    REQUIRE(std::abs(pa - pb) < 0.5);
}

TEST_CASE("describe_goal is camera-frame, forward-facing, truncated") {
    const auto obs = wall_view();
    const auto goal = gsmap::describe_goal(obs, 4.0, 2);
    REQUIRE(goal.has_value());
    for (const auto& d : *goal) {
        // canonical goal frame looks along +x: forward component non-negative
        REQUIRE(d.position.x() >= 0.0);
        REQUIRE(d.position.norm() <= 4.0 + 1e-12);
        REQUIRE((*goal)[0].feature[11] == 1.0);
    }

    sim::Observation empty;
    empty.width = 8;
    empty.height = 6;
    empty.intrinsics = geom::CameraIntrinsics::from_fov(75, 8, 6);
    empty.rgb.assign(8 * 6 * 3, 0.0);
    empty.depth.assign(8 * 6, 0.0);
    REQUIRE_FALSE(gsmap::describe_goal(empty, 4.0, 2).has_value());
}

TEST_CASE("goal descriptors match map descriptors at corresponding points") {
    // goal camera placed at a mapped agent-like pose
    const auto obs = wall_view();
    gsmap::GaussianMap map(1 << 20);
    map.integrate(obs, {});
    const auto goal = gsmap::describe_goal(obs, 4.0, 2);
    REQUIRE(goal.has_value());

    // the goal cloud is expressed in the canonical frame; the true camera
    // orientation maps it into the world, both positions and normal channels
    const geom::Mat3 rel =
        obs.pose.rotation * geom::sphere_rotation(0.0, 0.0).transpose();
    int tested = 0, good = 0;
    for (size_t i = 0; i < goal->size(); i += 211) {
        const Vec3 world = rel * (*goal)[i].position + obs.pose.translation;
        // nearest map descriptor
        double best = 1e9;
        size_t bi = 0;
        for (size_t j = 0; j < map.descriptors().size(); ++j) {
            const double d = (map.descriptors()[j].position - world).norm();
            if (d < best) {
                best = d;
                bi = j;
            }
        }
        if (best > 0.02) continue;
        ++tested;
        const auto& fm = map.descriptors()[bi].feature;
        const auto fg = coarse::rotate_feature((*goal)[i].feature, rel);
        if (fm.dot(fg) / (fm.norm() * fg.norm()) > 0.9) ++good;
    }
    REQUIRE(tested > 5);
    REQUIRE(good == tested);
}

TEST_CASE("map serialization round-trips through float32 records") {
    const auto obs = wall_view();
    gsmap::GaussianMap map(1 << 20);
    map.integrate(obs, {});
    const auto path = std::filesystem::temp_directory_path() / "gsnav_test_map.bin";
    gsmap::save_map(map, path.string());
    const auto back = gsmap::load_map(path.string());
    REQUIRE(back.size() == map.size());
    REQUIRE(back.descriptors().size() == map.descriptors().size());
    for (size_t i = 0; i < map.size(); i += 501) {
        REQUIRE((back.gaussians()[i].mu - map.gaussians()[i].mu).norm() < 1e-4);
        REQUIRE(back.gaussians()[i].alpha == Catch::Approx(map.gaussians()[i].alpha));
        REQUIRE((back.descriptors()[i].feature - map.descriptors()[i].feature).norm() < 1e-4);
    }
    std::filesystem::remove(path);
}
