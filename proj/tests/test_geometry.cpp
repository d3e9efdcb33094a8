#include <gsnav/geometry.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace gsnav;
using geom::Mat3;
using geom::RigidPose;
using geom::Vec3;

namespace {

std::mt19937_64 rng(42);

double uni(double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
}

RigidPose random_pose() {
    geom::SpherePose sp;
    sp.x = uni(-5, 5);
    sp.y = uni(-5, 5);
    sp.z = uni(-2, 2);
    sp.theta_deg = uni(-80, 80);
    sp.phi_deg = uni(0, 360);
    return geom::sphere_to_rigid(sp);
}

}  // namespace

TEST_CASE("rigid pose invariants") {
    for (int i = 0; i < 50; ++i) {
        const auto p = random_pose();
        REQUIRE(p.is_valid());
        const auto id = p.compose(p.inverse());
        REQUIRE((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE(id.translation.norm() < 1e-9);
    }
}

TEST_CASE("rotation composition associativity") {
    for (int i = 0; i < 20; ++i) {
        const auto a = random_pose(), b = random_pose(), c = random_pose();
        const auto lhs = a.compose(b).compose(c);
        const auto rhs = a.compose(b.compose(c));
        REQUIRE((lhs.rotation - rhs.rotation).cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE((lhs.translation - rhs.translation).norm() < 1e-9);
    }
}

TEST_CASE("project hits principal point on the optical axis") {
    geom::CameraIntrinsics intr;
    intr.fx = intr.fy = 100;
    intr.cx = 80;
    intr.cy = 60;
    intr.width = 160;
    intr.height = 120;
    const auto p = geom::project({0, 0, 2.0}, intr);
    REQUIRE(p.has_value());
    REQUIRE(p->u == Catch::Approx(80.0));
    REQUIRE(p->v == Catch::Approx(60.0));
    REQUIRE(p->depth == Catch::Approx(2.0));

    const auto q = geom::project({1.0, 0, 1.0}, intr);
    REQUIRE(q->u == Catch::Approx(180.0));
    REQUIRE(q->v == Catch::Approx(60.0));
    REQUIRE(q->depth == Catch::Approx(1.0));

    REQUIRE_FALSE(geom::project({0, 0, -1.0}, intr).has_value());
    REQUIRE_FALSE(geom::project({0, 0, 0.0}, intr).has_value());
}

TEST_CASE("unproject principal point and translation additivity") {
    geom::CameraIntrinsics intr;
    intr.fx = intr.fy = 100;
    intr.cx = 80;
    intr.cy = 60;
    intr.width = 160;
    intr.height = 120;
    const auto w = geom::unproject(80, 60, 3.0, intr, RigidPose::identity());
    REQUIRE((*w - Vec3(0, 0, 3.0)).norm() < 1e-12);

    RigidPose t;
    t.translation = Vec3(1, 2, 3);
    const auto w2 = geom::unproject(100, 80, 2.0, intr, t);
    const Vec3 cam = geom::unproject_camera(100, 80, 2.0, intr);
    REQUIRE((*w2 - (cam + Vec3(1, 2, 3))).norm() < 1e-12);

    REQUIRE_FALSE(geom::unproject(10, 10, 0.0, intr, t).has_value());
}

TEST_CASE("project / unproject round-trip") {
    geom::CameraIntrinsics intr;
    intr.fx = 123.4;
    intr.fy = 119.2;
    intr.cx = 81.3;
    intr.cy = 59.1;
    intr.width = 160;
    intr.height = 120;
    for (int i = 0; i < 1000; ++i) {
        const auto pose = random_pose();
        const Vec3 cam(uni(-2, 2), uni(-2, 2), uni(0.1, 10.0));
        const auto px = geom::project(cam, intr);
        REQUIRE(px.has_value());
        const Vec3 world = pose.apply(cam);
        const auto back = geom::unproject(px->u, px->v, px->depth, intr, pose);
        REQUIRE((*back - world).norm() < 1e-9);
    }
}

TEST_CASE("bev projection drops height") {
    RigidPose p;
    p.translation = Vec3(1, 2, 3);
    REQUIRE((geom::bev_project(p) - Eigen::Vector2d(1, 2)).norm() == 0.0);

    RigidPose q = p;
    q.translation.z() = -7;
    REQUIRE((geom::bev_project(p) - geom::bev_project(q)).norm() == 0.0);

    for (int i = 0; i < 10; ++i) {
        const auto a = random_pose(), b = random_pose();
        const double dist = (geom::bev_project(a) - geom::bev_project(b)).norm();
        const double expect = std::hypot(a.translation.x() - b.translation.x(),
                                         a.translation.y() - b.translation.y());
        REQUIRE(dist == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("icosphere vertex counts and nesting") {
    REQUIRE(geom::icosphere(0).vertex_count() == 12);
    REQUIRE(geom::icosphere(1).vertex_count() == 42);
    REQUIRE(geom::icosphere(2).vertex_count() == 162);
    REQUIRE(geom::icosphere(3).vertex_count() == 642);

    for (int level = 0; level <= 3; ++level) {
        const auto mesh = geom::icosphere(level);
        for (const auto& v : mesh.vertices) REQUIRE(std::abs(v.norm() - 1.0) < 1e-12);
    }

    // lower-level vertices survive subdivision bit-exactly as a prefix
    for (int level = 1; level <= 3; ++level) {
        const auto lo = geom::icosphere(level - 1);
        const auto hi = geom::icosphere(level);
        for (int i = 0; i < lo.vertex_count(); ++i)
            REQUIRE((hi.vertices[i] - lo.vertices[i]).norm() == 0.0);
    }

    REQUIRE_THROWS_AS(geom::icosphere(-1), std::invalid_argument);
    REQUIRE_THROWS_AS(geom::icosphere(6), std::invalid_argument);
}

TEST_CASE("sphere pose canonical and pure yaw") {
    const auto id = geom::sphere_to_rigid({0, 0, 0, 0, 0});
    REQUIRE((id.rotation.col(2) - Vec3(1, 0, 0)).norm() < 1e-12);   // forward = +x
    REQUIRE((id.rotation.col(1) - Vec3(0, 0, -1)).norm() < 1e-12);  // down = -z
    REQUIRE(id.translation.norm() == 0.0);

    const auto yaw = geom::sphere_to_rigid({0, 0, 0, 0, 90});
    REQUIRE((yaw.rotation.col(2) - Vec3(0, 1, 0)).norm() < 1e-12);
    // up axis unchanged by pure yaw
    REQUIRE((yaw.rotation.col(1) - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("sphere pose round-trips through rotation") {
    for (int i = 0; i < 200; ++i) {
        geom::SpherePose sp;
        sp.x = uni(-3, 3);
        sp.y = uni(-3, 3);
        sp.z = uni(-1, 1);
        sp.theta_deg = uni(-89.9, 89.9);
        sp.phi_deg = uni(0, 359.99);
        const auto pose = geom::sphere_to_rigid(sp);
        // zero roll: the camera x axis stays horizontal
        REQUIRE(std::abs(pose.rotation.col(0).z()) < 1e-12);
        const auto back = geom::rigid_to_sphere(pose);
        REQUIRE(back.theta_deg == Catch::Approx(sp.theta_deg).margin(1e-9));
        const double dphi = std::abs(geom::wrap_degrees(back.phi_deg - sp.phi_deg));
        REQUIRE(std::min(dphi, 360.0 - dphi) < 1e-9);
    }
}

TEST_CASE("icosphere directions recoverable as sphere poses") {
    const auto mesh = geom::icosphere(3);
    // one icosphere edge at level 3 is about 7.5 degrees
    for (const auto& v : mesh.vertices) {
        const auto sp = geom::direction_to_sphere(v);
        const Vec3 fwd = geom::sphere_to_rigid(sp).rotation.col(2);
        REQUIRE((fwd - v).norm() < 1e-9);
    }
    // nearest-vertex angular error from a random direction is below one edge
    for (int i = 0; i < 100; ++i) {
        Vec3 d(uni(-1, 1), uni(-1, 1), uni(-1, 1));
        if (d.norm() < 1e-3) continue;
        d.normalize();
        double best = 1e9;
        for (const auto& v : mesh.vertices)
            best = std::min(best, std::acos(std::clamp(v.dot(d), -1.0, 1.0)));
        REQUIRE(geom::rad2deg(best) < 7.5);
    }
}

TEST_CASE("se3 exp basics") {
    geom::Twist xi = geom::Twist::Zero();
    xi[0] = 0.3;
    const auto t = geom::se3_exp(xi);
    REQUIRE((t.translation - Vec3(0.3, 0, 0)).norm() < 1e-12);
    REQUIRE((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);

    geom::Twist w = geom::Twist::Zero();
    w[5] = geom::kPi / 2;
    const auto r = geom::se3_exp(w);
    REQUIRE((r.rotation * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);
}
