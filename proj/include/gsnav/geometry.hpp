#pragma once

// Rigid transforms, pinhole cameras, the sphere-pose parameterization and
// icosphere direction sets shared by every other module.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gsnav::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// ---------------------------------------------------------------------------
// RigidPose: camera/agent pose as rotation + translation (camera-to-world).
// ---------------------------------------------------------------------------

struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidPose identity() { return {}; }

    // Applies the pose to a point given in the local (camera) frame.
    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidPose inverse() const {
        RigidPose inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    RigidPose compose(const RigidPose& rhs) const {
        RigidPose out;
        out.rotation = rotation * rhs.rotation;
        out.translation = rotation * rhs.translation + translation;
        return out;
    }

    bool is_valid(double tol = 1e-9) const {
        const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
        return err.cwiseAbs().maxCoeff() < tol &&
               std::abs(rotation.determinant() - 1.0) < tol;
    }
};

inline RigidPose operator*(const RigidPose& a, const RigidPose& b) { return a.compose(b); }

// Horizontal (x, y) part of the pose position; the vertical axis is z.
inline Vec2 bev_project(const RigidPose& pose) {
    return pose.translation.head<2>();
}

// ---------------------------------------------------------------------------
// se(3) twists. Convention: twist = (rho, omega), pose update T * exp(twist),
// i.e. a perturbation expressed in the local (camera/body) frame.
// ---------------------------------------------------------------------------

using Twist = Eigen::Matrix<double, 6, 1>;

inline Mat3 skew(const Vec3& w) {
    Mat3 s;
    s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return s;
}

inline Mat3 so3_exp(const Vec3& w) {
    const double th = w.norm();
    if (th < 1e-12) return Mat3::Identity() + skew(w);
    const Mat3 k = skew(w / th);
    return Mat3::Identity() + std::sin(th) * k + (1.0 - std::cos(th)) * k * k;
}

inline RigidPose se3_exp(const Twist& xi) {
    const Vec3 rho = xi.head<3>();
    const Vec3 w = xi.tail<3>();
    const double th = w.norm();
    RigidPose out;
    out.rotation = so3_exp(w);
    if (th < 1e-12) {
        out.translation = rho + 0.5 * skew(w) * rho;
    } else {
        const Mat3 k = skew(w / th);
        const Mat3 jl = Mat3::Identity() + (1.0 - std::cos(th)) / th * k +
                        (1.0 - std::sin(th) / th) * k * k;
        out.translation = jl * rho;
    }
    return out;
}

// ---------------------------------------------------------------------------
// CameraIntrinsics
// ---------------------------------------------------------------------------

struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    static CameraIntrinsics from_fov(double horizontal_fov_deg, int width, int height) {
        if (!(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0))
            throw std::invalid_argument("horizontal fov out of (0, 180)");
        CameraIntrinsics k;
        k.width = width;
        k.height = height;
        k.fx = width / (2.0 * std::tan(deg2rad(horizontal_fov_deg) / 2.0));
        k.fy = k.fx;
        k.cx = width / 2.0;
        k.cy = height / 2.0;
        return k;
    }

    double horizontal_fov() const {
        return rad2deg(2.0 * std::atan(width / (2.0 * fx)));
    }

    bool is_valid() const {
        return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
    }
};

struct PixelDepth {
    double u = 0, v = 0;
    double depth = 0;
};

// Camera-frame point -> pixel + depth. Points at or behind the camera plane
// are rejected (the caller skips them).
inline std::optional<PixelDepth> project(const Vec3& p, const CameraIntrinsics& intr) {
    if (!(p.z() > 0.0)) return std::nullopt;
    PixelDepth out;
    out.u = intr.fx * p.x() / p.z() + intr.cx;
    out.v = intr.fy * p.y() / p.z() + intr.cy;
    out.depth = p.z();
    return out;
}

inline Vec3 unproject_camera(double u, double v, double depth, const CameraIntrinsics& intr) {
    return {(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth};
}

// Pixel + depth -> world point through a camera-to-world pose. depth must be
// positive; sentinel pixels are the caller's problem.
inline std::optional<Vec3> unproject(double u, double v, double depth,
                                     const CameraIntrinsics& intr, const RigidPose& pose) {
    if (!(depth > 0.0)) return std::nullopt;
    return pose.apply(unproject_camera(u, v, depth, intr));
}

// ---------------------------------------------------------------------------
// SpherePose: 5-DoF zero-roll pose (x, y, z, theta, phi) with theta the
// elevation in degrees and phi the azimuth in [0, 360). The camera frame is
// x-right, y-down, z-forward; at theta = phi = 0 the camera looks along
// world +x with world +z up.
// ---------------------------------------------------------------------------

struct SpherePose {
    double x = 0, y = 0, z = 0;
    double theta_deg = 0;  // elevation, [-90, 90]
    double phi_deg = 0;    // azimuth, [0, 360)
};

inline double wrap_degrees(double d) {
    d = std::fmod(d, 360.0);
    if (d < 0) d += 360.0;
    return d;
}

inline Vec3 sphere_forward(double theta_deg, double phi_deg) {
    const double t = deg2rad(theta_deg), p = deg2rad(phi_deg);
    return {std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), std::sin(t)};
}

inline Mat3 sphere_rotation(double theta_deg, double phi_deg) {
    const double p = deg2rad(phi_deg);
    const Vec3 fwd = sphere_forward(theta_deg, phi_deg);
    const Vec3 right(std::sin(p), -std::cos(p), 0.0);  // horizontal: zero roll
    const Vec3 down = fwd.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = fwd;
    return r;
}

inline RigidPose sphere_to_rigid(const SpherePose& sp) {
    RigidPose out;
    out.rotation = sphere_rotation(sp.theta_deg, sp.phi_deg);
    out.translation = Vec3(sp.x, sp.y, sp.z);
    return out;
}

// Extracts (theta, phi) back out of a zero-roll rotation.
inline SpherePose rigid_to_sphere(const RigidPose& pose) {
    const Vec3 fwd = pose.rotation.col(2);
    SpherePose sp;
    sp.x = pose.translation.x();
    sp.y = pose.translation.y();
    sp.z = pose.translation.z();
    sp.theta_deg = rad2deg(std::asin(std::clamp(fwd.z(), -1.0, 1.0)));
    sp.phi_deg = (std::abs(fwd.z()) >= 1.0 - 1e-15)
                     ? wrap_degrees(rad2deg(std::atan2(pose.rotation.col(0).x(),
                                                       -pose.rotation.col(0).y())))
                     : wrap_degrees(rad2deg(std::atan2(fwd.y(), fwd.x())));
    return sp;
}

// ---------------------------------------------------------------------------
// IcoSphere: gamma-level subdivision of a regular icosahedron. Vertex count
// is 10 * 4^gamma + 2; subdivision keeps lower-level vertices bit-exact.
// ---------------------------------------------------------------------------

struct IcoSphere {
    int level = 0;
    std::vector<Vec3> vertices;                 // unit directions
    std::vector<std::vector<int>> adjacency;    // vertex -> neighbor vertices
    std::vector<std::array<int, 3>> faces;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
};

inline IcoSphere icosphere(int level) {
    if (level < 0 || level > 5) throw std::invalid_argument("icosphere level out of [0,5]");

    IcoSphere mesh;
    mesh.level = level;
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    const std::array<Vec3, 12> base = {
        Vec3(-1, t, 0), Vec3(1, t, 0),  Vec3(-1, -t, 0), Vec3(1, -t, 0),
        Vec3(0, -1, t), Vec3(0, 1, t),  Vec3(0, -1, -t), Vec3(0, 1, -t),
        Vec3(t, 0, -1), Vec3(t, 0, 1),  Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
    for (const auto& v : base) mesh.vertices.push_back(v.normalized());
    mesh.faces = {{0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int iter = 0; iter < level; ++iter) {
        std::map<std::pair<int, int>, int> midpoint;  // edge -> new vertex
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const Vec3 m = (mesh.vertices[a] + mesh.vertices[b]).normalized();
            const int idx = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(m);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(mesh.faces.size() * 4);
        for (const auto& f : mesh.faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(next);
    }

    mesh.adjacency.assign(mesh.vertices.size(), {});
    auto link = [&](int a, int b) {
        auto& n = mesh.adjacency[a];
        for (int x : n)
            if (x == b) return;
        n.push_back(b);
    };
    for (const auto& f : mesh.faces) {
        link(f[0], f[1]);
        link(f[1], f[0]);
        link(f[1], f[2]);
        link(f[2], f[1]);
        link(f[2], f[0]);
        link(f[0], f[2]);
    }
    return mesh;
}

// Sphere-pose angles of an icosphere direction (position left at zero).
inline SpherePose direction_to_sphere(const Vec3& dir) {
    SpherePose sp;
    sp.theta_deg = rad2deg(std::asin(std::clamp(dir.z(), -1.0, 1.0)));
    sp.phi_deg = wrap_degrees(rad2deg(std::atan2(dir.y(), dir.x())));
    return sp;
}

}  // namespace gsnav::geom
