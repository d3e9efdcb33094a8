#pragma once

// Incremental gaussian scene representation: every RGB-D observation is
// lifted to pixel-aligned isotropic gaussians plus descriptor points, the
// map accumulates them and prunes back to a budget (lowest opacity first,
// then newest entries in over-dense cells, then newest overall).

#include <gsnav/geometry.hpp>
#include <gsnav/sim.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace gsnav::gsmap {

using geom::CameraIntrinsics;
using geom::Mat3;
using geom::RigidPose;
using geom::Vec3;

inline constexpr int kDescriptorDim = 12;
using Feature = Eigen::Matrix<double, kDescriptorDim, 1>;

struct Gaussian {
    Vec3 mu = Vec3::Zero();
    double alpha = 0.8;
    Vec3 scale = Vec3::Constant(0.01);        // stddevs in meters
    Eigen::Quaterniond rot = Eigen::Quaterniond::Identity();
    Vec3 color = Vec3::Zero();

    Mat3 covariance() const {
        const Mat3 r = rot.toRotationMatrix();
        return r * scale.cwiseProduct(scale).asDiagonal() * r.transpose();
    }
};

struct DescriptorPoint {
    Vec3 position = Vec3::Zero();
    Feature feature = Feature::Zero();
};

// ---------------------------------------------------------------------------
// Descriptors: 12 channels = mean RGB (3) + vertical-aligned gradient
// orientation histogram (4) + world-frame surface normal (3) + relative
// depth spread (1) + constant bias (1).
// ---------------------------------------------------------------------------

inline double luminance(const Vec3& c) { return 0.299 * c.x() + 0.587 * c.y() + 0.114 * c.z(); }

inline std::optional<Feature> describe_pixel(const sim::Observation& obs, int u, int v) {
    const int w = obs.width, h = obs.height;
    if (u < 0 || u >= w || v < 0 || v >= h) return std::nullopt;
    const double d0 = obs.depth_at(u, v);
    if (!(d0 > 0.0)) return std::nullopt;

    Feature f = Feature::Zero();

    // mean rgb over 3x3 (valid-depth pixels only)
    Vec3 mean_rgb = Vec3::Zero();
    int n_rgb = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            const int x = u + dx, y = v + dy;
            if (x < 0 || x >= w || y < 0 || y >= h) continue;
            if (!(obs.depth_at(x, y) > 0.0)) continue;
            mean_rgb += obs.rgb_at(x, y);
            ++n_rgb;
        }
    if (n_rgb > 0) mean_rgb /= n_rgb;
    f.segment<3>(0) = mean_rgb;

    // reference direction: world vertical projected into the image
    const Vec3 up_cam = obs.pose.rotation.transpose() * Vec3(0, 0, 1);
    double ref = 0.0;
    if (up_cam.head<2>().norm() > 1e-9) ref = std::atan2(up_cam.y(), up_cam.x());

    // 4-bin gradient orientation histogram over 5x5, soft-assigned
    Eigen::Vector4d hist = Eigen::Vector4d::Zero();
    int n_grad = 0;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            const int x = u + dx, y = v + dy;
            if (x < 1 || x >= w - 1 || y < 1 || y >= h - 1) continue;
            if (!(obs.depth_at(x, y) > 0.0) || !(obs.depth_at(x - 1, y) > 0.0) ||
                !(obs.depth_at(x + 1, y) > 0.0) || !(obs.depth_at(x, y - 1) > 0.0) ||
                !(obs.depth_at(x, y + 1) > 0.0))
                continue;
            const double gx =
                0.5 * (luminance(obs.rgb_at(x + 1, y)) - luminance(obs.rgb_at(x - 1, y)));
            const double gy =
                0.5 * (luminance(obs.rgb_at(x, y + 1)) - luminance(obs.rgb_at(x, y - 1)));
            const double mag = std::hypot(gx, gy);
            ++n_grad;
            if (mag < 1e-9) continue;
            double ang = std::atan2(gy, gx) - ref;
            ang = std::fmod(ang, 2.0 * geom::kPi);
            if (ang < 0) ang += 2.0 * geom::kPi;
            const double pos = ang / (0.5 * geom::kPi);  // in [0,4)
            const int b0 = static_cast<int>(pos) % 4;
            const double fr = pos - std::floor(pos);
            hist[b0] += mag * (1.0 - fr);
            hist[(b0 + 1) % 4] += mag * fr;
        }
    if (n_grad > 0) hist /= n_grad;
    f.segment<4>(3) = hist.cwiseMin(1.0);

    // surface normal from depth, expressed in the world frame, camera-facing
    auto cam_point = [&](int x, int y) {
        return geom::unproject_camera(x, y, obs.depth_at(x, y), obs.intrinsics);
    };
    Vec3 n_world = Vec3::Zero();
    {
        const int xl = std::max(u - 1, 0), xr = std::min(u + 1, w - 1);
        const int yt = std::max(v - 1, 0), yb = std::min(v + 1, h - 1);
        if (obs.depth_at(xl, v) > 0 && obs.depth_at(xr, v) > 0 && obs.depth_at(u, yt) > 0 &&
            obs.depth_at(u, yb) > 0 && xr > xl && yb > yt) {
            const Vec3 du = cam_point(xr, v) - cam_point(xl, v);
            const Vec3 dv = cam_point(u, yb) - cam_point(u, yt);
            Vec3 n_cam = du.cross(dv);
            const double nn = n_cam.norm();
            if (nn > 1e-12) {
                n_cam /= nn;
                if (n_cam.dot(cam_point(u, v)) > 0) n_cam = -n_cam;
                n_world = obs.pose.rotation * n_cam;
            }
        }
    }
    f.segment<3>(7) = n_world;

    // relative depth spread over 5x5
    double sum = 0, sum2 = 0;
    int n_d = 0;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            const int x = u + dx, y = v + dy;
            if (x < 0 || x >= w || y < 0 || y >= h) continue;
            const double d = obs.depth_at(x, y);
            if (!(d > 0.0)) continue;
            sum += d;
            sum2 += d * d;
            ++n_d;
        }
    if (n_d > 1) {
        const double mean = sum / n_d;
        const double var = std::max(0.0, sum2 / n_d - mean * mean);
        f[10] = std::min(1.0, 10.0 * std::sqrt(var) / std::max(mean, 1e-6));
    }

    f[11] = 1.0;  // bias
    return f;
}

// ---------------------------------------------------------------------------
// Lifting
// ---------------------------------------------------------------------------

struct LiftConfig {
    int stride = 2;
    double alpha = 0.8;
    double sigma_pixel_factor = 0.7;  // sigma = factor * stride * depth / fx
    double sigma_min = 0.005, sigma_max = 0.2;
};

struct Lifted {
    std::vector<Gaussian> gaussians;
    std::vector<DescriptorPoint> descriptors;  // parallel to gaussians
};

inline Lifted lift_observation(const sim::Observation& obs, const LiftConfig& cfg = {}) {
    Lifted out;
    if (obs.pose_in_solid) return out;
    const auto& intr = obs.intrinsics;
    for (int v = 0; v < obs.height; v += cfg.stride)
        for (int u = 0; u < obs.width; u += cfg.stride) {
            const double d = obs.depth_at(u, v);
            if (!(d > 0.0)) continue;
            const auto feat = describe_pixel(obs, u, v);
            if (!feat) continue;
            Gaussian g;
            g.mu = *geom::unproject(u, v, d, intr, obs.pose);
            g.alpha = cfg.alpha;
            const double s = std::clamp(cfg.sigma_pixel_factor * cfg.stride * d / intr.fx,
                                        cfg.sigma_min, cfg.sigma_max);
            g.scale = Vec3::Constant(s);
            g.color = obs.rgb_at(u, v);
            out.gaussians.push_back(g);
            out.descriptors.push_back({g.mu, *feat});
        }
    return out;
}

// Goal-image descriptors relative to the goal camera, truncated to
// `max_radius`. The camera is placed at the origin in the canonical zero-roll
// orientation (elevation and azimuth zero), so descriptors computed here are
// consistent with map descriptors up to the unknown (theta, phi) rotation
// that the coarse kernel bank searches over. Fails when less than 1% of the
// depth is valid.
inline std::optional<std::vector<DescriptorPoint>> describe_goal(
    const sim::Observation& goal_view, double max_radius = 4.0, int stride = 2) {
    if (goal_view.valid_fraction() < 0.01) return std::nullopt;
    sim::Observation local = goal_view;
    local.pose = geom::sphere_to_rigid({0, 0, 0, 0, 0});
    std::vector<DescriptorPoint> out;
    for (int v = 0; v < local.height; v += stride)
        for (int u = 0; u < local.width; u += stride) {
            const double d = local.depth_at(u, v);
            if (!(d > 0.0)) continue;
            const Vec3 p = *geom::unproject(u, v, d, local.intrinsics, local.pose);
            if (p.norm() > max_radius) continue;
            const auto feat = describe_pixel(local, u, v);
            if (!feat) continue;
            out.push_back({p, *feat});
        }
    if (out.empty()) return std::nullopt;
    return out;
}

// ---------------------------------------------------------------------------
// GaussianMap
// ---------------------------------------------------------------------------

class GaussianMap {
  public:
    explicit GaussianMap(size_t budget = 200000) : budget_(budget) {}

    const std::vector<Gaussian>& gaussians() const { return gaussians_; }
    const std::vector<DescriptorPoint>& descriptors() const { return descriptors_; }
    size_t size() const { return gaussians_.size(); }
    size_t budget() const { return budget_; }
    int frame_count() const { return frame_count_; }

    void integrate(const sim::Observation& obs, const LiftConfig& cfg = {}) {
        integrate(lift_observation(obs, cfg));
    }

    void integrate(const Lifted& lifted) {
        const int frame = frame_count_++;
        gaussians_.insert(gaussians_.end(), lifted.gaussians.begin(), lifted.gaussians.end());
        descriptors_.insert(descriptors_.end(), lifted.descriptors.begin(),
                            lifted.descriptors.end());
        frame_of_.insert(frame_of_.end(), lifted.gaussians.size(), frame);
        if (gaussians_.size() > budget_) prune();
    }

  private:
    struct CellKey {
        int x, y, z;
        bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct CellHash {
        size_t operator()(const CellKey& k) const {
            size_t h = 1469598103934665603ULL;
            for (int v : {k.x, k.y, k.z}) {
                h ^= static_cast<size_t>(v) + 0x9e3779b9;
                h *= 1099511628211ULL;
            }
            return h;
        }
    };

    void prune() {
        const size_t excess = gaussians_.size() - budget_;
        const size_t n = gaussians_.size();

        // spatial density per hash cell
        const double cell = 0.1;
        std::unordered_map<CellKey, int, CellHash> counts;
        counts.reserve(n);
        std::vector<CellKey> key_of(n);
        for (size_t i = 0; i < n; ++i) {
            const Vec3& p = gaussians_[i].mu;
            key_of[i] = {static_cast<int>(std::floor(p.x() / cell)),
                         static_cast<int>(std::floor(p.y() / cell)),
                         static_cast<int>(std::floor(p.z() / cell))};
            counts[key_of[i]] += 1;
        }
        std::vector<int> cell_counts;
        cell_counts.reserve(counts.size());
        for (const auto& kv : counts) cell_counts.push_back(kv.second);
        std::nth_element(cell_counts.begin(), cell_counts.begin() + cell_counts.size() / 2,
                         cell_counts.end());
        const int median = cell_counts.empty() ? 0 : cell_counts[cell_counts.size() / 2];
        const int dense_cut = 4 * std::max(1, median);

        // removal priority: low alpha, then newest-in-overdense-cell, then newest
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (gaussians_[a].alpha != gaussians_[b].alpha)
                return gaussians_[a].alpha < gaussians_[b].alpha;
            const bool da = counts[key_of[a]] > dense_cut;
            const bool db = counts[key_of[b]] > dense_cut;
            if (da != db) return da;
            if (frame_of_[a] != frame_of_[b]) return frame_of_[a] > frame_of_[b];
            return a > b;
        });

        std::vector<std::uint8_t> remove(n, 0);
        for (size_t i = 0; i < excess; ++i) remove[order[i]] = 1;

        size_t out = 0;
        for (size_t i = 0; i < n; ++i) {
            if (remove[i]) continue;
            gaussians_[out] = gaussians_[i];
            descriptors_[out] = descriptors_[i];
            frame_of_[out] = frame_of_[i];
            ++out;
        }
        gaussians_.resize(out);
        descriptors_.resize(out);
        frame_of_.resize(out);
    }

    std::vector<Gaussian> gaussians_;
    std::vector<DescriptorPoint> descriptors_;
    std::vector<int> frame_of_;
    size_t budget_;
    int frame_count_ = 0;
};

// ---------------------------------------------------------------------------
// Serialization: versioned little-endian float32 record stream.
// ---------------------------------------------------------------------------

namespace io {

inline void write_f32(std::ostream& os, double v) {
    const float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), 4);
}
inline double read_f32(std::istream& is) {
    float f = 0;
    is.read(reinterpret_cast<char*>(&f), 4);
    return f;
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace io

inline void save_map(const GaussianMap& map, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open map file for writing: " + path);
    os.write("GSNVMAP1", 8);
    io::write_u32(os, 1);  // version
    io::write_u32(os, kDescriptorDim);
    io::write_u64(os, map.gaussians().size());
    io::write_u64(os, map.descriptors().size());
    for (const auto& g : map.gaussians()) {
        for (int i = 0; i < 3; ++i) io::write_f32(os, g.mu[i]);
        io::write_f32(os, g.alpha);
        for (int i = 0; i < 3; ++i) io::write_f32(os, g.scale[i]);
        io::write_f32(os, g.rot.w());
        io::write_f32(os, g.rot.x());
        io::write_f32(os, g.rot.y());
        io::write_f32(os, g.rot.z());
        for (int i = 0; i < 3; ++i) io::write_f32(os, g.color[i]);
    }
    for (const auto& d : map.descriptors()) {
        for (int i = 0; i < 3; ++i) io::write_f32(os, d.position[i]);
        for (int i = 0; i < kDescriptorDim; ++i) io::write_f32(os, d.feature[i]);
    }
}

inline GaussianMap load_map(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open map file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, "GSNVMAP1", 8) != 0)
        throw std::runtime_error("bad map magic in " + path);
    if (io::read_u32(is) != 1) throw std::runtime_error("unsupported map version");
    if (io::read_u32(is) != kDescriptorDim)
        throw std::runtime_error("descriptor width mismatch");
    const auto ng = io::read_u64(is);
    const auto nd = io::read_u64(is);
    Lifted data;
    data.gaussians.resize(ng);
    data.descriptors.resize(nd);
    for (auto& g : data.gaussians) {
        for (int i = 0; i < 3; ++i) g.mu[i] = io::read_f32(is);
        g.alpha = io::read_f32(is);
        for (int i = 0; i < 3; ++i) g.scale[i] = io::read_f32(is);
        const double w = io::read_f32(is), x = io::read_f32(is), y = io::read_f32(is),
                     z = io::read_f32(is);
        g.rot = Eigen::Quaterniond(w, x, y, z);
        for (int i = 0; i < 3; ++i) g.color[i] = io::read_f32(is);
    }
    for (auto& d : data.descriptors) {
        for (int i = 0; i < 3; ++i) d.position[i] = io::read_f32(is);
        for (int i = 0; i < kDescriptorDim; ++i) d.feature[i] = io::read_f32(is);
    }
    if (!is) throw std::runtime_error("truncated map file: " + path);
    GaussianMap map(std::max<size_t>(ng, 1));
    map.integrate(data);
    return map;
}

}  // namespace gsnav::gsmap
