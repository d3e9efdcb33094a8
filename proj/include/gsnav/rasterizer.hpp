#pragma once

// Software EWA splatting for GaussianMap: front-to-back alpha compositing of
// color and expected depth over 16x16 tiles, per-pixel contributor lists for
// gradient replay, and analytic gradients of a pixel loss with respect to a
// 6-dim twist perturbation of the camera pose (T -> T * exp(xi), xi applied
// in the camera frame).

#include <gsnav/gaussian_map.hpp>
#include <gsnav/geometry.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <unordered_map>
#include <vector>

namespace gsnav::splat {

using geom::CameraIntrinsics;
using geom::Mat3;
using geom::RigidPose;
using geom::Twist;
using geom::Vec2;
using geom::Vec3;
using gsmap::Gaussian;
using gsmap::GaussianMap;
using Mat2 = Eigen::Matrix2d;

struct RenderSettings {
    double near_clip = 0.05;
    double lowpass = 0.3;        // EWA screen-space dilation (px^2)
    double cutoff_sq = 9.0;      // 3-sigma extent
    double alpha_min = 1e-5;     // ignore weaker contributions
    double alpha_max = 0.999;
    double term_transmittance = 1e-3;
    double depth_acc_min = 0.01;  // alpha_acc below this renders sentinel depth
    int max_contribs = 256;
    int tile = 16;
    int threads = 1;
    bool record_contribs = true;
};

struct RenderOutput {
    int width = 0, height = 0;
    std::vector<double> rgb;        // H*W*3
    std::vector<double> depth;      // H*W, 0 where alpha_acc < depth_acc_min
    std::vector<double> alpha_acc;  // H*W
    std::vector<std::vector<std::int32_t>> contribs;  // per pixel, front-to-back gaussian ids

    double depth_at(int u, int v) const { return depth[v * width + u]; }
    Vec3 rgb_at(int u, int v) const {
        const size_t i = 3 * (static_cast<size_t>(v) * width + u);
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
};

namespace detail {

struct ScreenSplat {
    std::int32_t id;   // index into map.gaussians()
    double z;          // camera-frame depth of the mean
    Vec2 mean2;
    Mat2 cov2, cov2_inv;
    double alpha;
    Vec3 color;
    Vec3 p_cam;
    Mat3 sigma_cam;
    int x0, x1, y0, y1;  // inclusive pixel bbox
};

inline Eigen::Matrix<double, 2, 3> proj_jacobian(const Vec3& p, const CameraIntrinsics& intr) {
    Eigen::Matrix<double, 2, 3> j;
    const double iz = 1.0 / p.z();
    j << intr.fx * iz, 0, -intr.fx * p.x() * iz * iz, 0, intr.fy * iz,
        -intr.fy * p.y() * iz * iz;
    return j;
}

inline std::vector<ScreenSplat> project_splats(const GaussianMap& map,
                                               const CameraIntrinsics& intr,
                                               const RigidPose& pose,
                                               const RenderSettings& cfg) {
    const Mat3 rcw = pose.rotation.transpose();
    const Vec3 tcw = -(rcw * pose.translation);
    std::vector<ScreenSplat> out;
    out.reserve(map.size() / 4 + 16);
    const auto& gs = map.gaussians();
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(gs.size()); ++i) {
        const Gaussian& g = gs[i];
        const Vec3 p = rcw * g.mu + tcw;
        if (p.z() <= cfg.near_clip) continue;
        ScreenSplat s;
        s.id = i;
        s.z = p.z();
        s.p_cam = p;
        s.mean2 = {intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy};
        const bool iso = g.scale.x() == g.scale.y() && g.scale.y() == g.scale.z();
        s.sigma_cam = iso ? Mat3(Mat3::Identity() * g.scale.x() * g.scale.x())
                          : Mat3(rcw * g.covariance() * rcw.transpose());
        const auto j = proj_jacobian(p, intr);
        s.cov2 = j * s.sigma_cam * j.transpose() + Mat2::Identity() * cfg.lowpass;
        const double a = s.cov2(0, 0), b = s.cov2(0, 1), c = s.cov2(1, 1);
        const double det = a * c - b * b;
        if (det <= 1e-12) continue;
        s.cov2_inv << c / det, -b / det, -b / det, a / det;
        const double lmax = 0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        const double r = 3.0 * std::sqrt(lmax);
        s.x0 = std::max(0, static_cast<int>(std::floor(s.mean2.x() - r)));
        s.x1 = std::min(intr.width - 1, static_cast<int>(std::ceil(s.mean2.x() + r)));
        s.y0 = std::max(0, static_cast<int>(std::floor(s.mean2.y() - r)));
        s.y1 = std::min(intr.height - 1, static_cast<int>(std::ceil(s.mean2.y() + r)));
        if (s.x0 > s.x1 || s.y0 > s.y1) continue;
        s.alpha = g.alpha;
        s.color = g.color;
        out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const ScreenSplat& a, const ScreenSplat& b) {
        return a.z != b.z ? a.z < b.z : a.id < b.id;
    });
    return out;
}

}  // namespace detail

inline RenderOutput rasterize(const GaussianMap& map, const CameraIntrinsics& intr,
                              const RigidPose& pose, const RenderSettings& cfg = {}) {
    RenderOutput out;
    out.width = intr.width;
    out.height = intr.height;
    const size_t npix = static_cast<size_t>(intr.width) * intr.height;
    out.rgb.assign(npix * 3, 0.0);
    out.depth.assign(npix, 0.0);
    out.alpha_acc.assign(npix, 0.0);
    if (cfg.record_contribs) out.contribs.assign(npix, {});
    if (map.size() == 0) return out;

    const auto splats = detail::project_splats(map, intr, pose, cfg);
    if (splats.empty()) return out;

    const int tile = std::max(8, cfg.tile);
    const int tx = (intr.width + tile - 1) / tile;
    const int ty = (intr.height + tile - 1) / tile;
    std::vector<std::vector<std::int32_t>> bins(static_cast<size_t>(tx) * ty);
    for (std::int32_t si = 0; si < static_cast<std::int32_t>(splats.size()); ++si) {
        const auto& s = splats[si];
        for (int by = s.y0 / tile; by <= s.y1 / tile; ++by)
            for (int bx = s.x0 / tile; bx <= s.x1 / tile; ++bx)
                bins[by * tx + bx].push_back(si);
    }

    auto run_tile = [&](int bi) {
        const int bx = bi % tx, by = bi / tx;
        const auto& bin = bins[bi];
        if (bin.empty()) return;
        const int ux0 = bx * tile, ux1 = std::min(intr.width, ux0 + tile);
        const int vy0 = by * tile, vy1 = std::min(intr.height, vy0 + tile);
        for (int v = vy0; v < vy1; ++v)
            for (int u = ux0; u < ux1; ++u) {
                double T = 1.0, acc = 0.0, dnum = 0.0;
                Vec3 c_acc = Vec3::Zero();
                const size_t pi = static_cast<size_t>(v) * intr.width + u;
                int count = 0;
                for (const std::int32_t si : bin) {
                    const auto& s = splats[si];
                    if (u < s.x0 || u > s.x1 || v < s.y0 || v > s.y1) continue;
                    const Vec2 d(u - s.mean2.x(), v - s.mean2.y());
                    const double q = d.dot(s.cov2_inv * d);
                    if (q > cfg.cutoff_sq) continue;
                    double a = s.alpha * std::exp(-0.5 * q);
                    if (a < cfg.alpha_min) continue;
                    a = std::min(a, cfg.alpha_max);
                    const double w = a * T;
                    c_acc += s.color * w;
                    dnum += s.z * w;
                    acc += w;
                    if (cfg.record_contribs) out.contribs[pi].push_back(s.id);
                    T *= 1.0 - a;
                    ++count;
                    if (T < cfg.term_transmittance || count >= cfg.max_contribs) break;
                }
                out.rgb[3 * pi] = c_acc.x();
                out.rgb[3 * pi + 1] = c_acc.y();
                out.rgb[3 * pi + 2] = c_acc.z();
                out.alpha_acc[pi] = acc;
                out.depth[pi] = acc >= cfg.depth_acc_min ? dnum / acc : 0.0;
            }
    };

    const int nbins = tx * ty;
    if (cfg.threads <= 1) {
        for (int bi = 0; bi < nbins; ++bi) run_tile(bi);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < cfg.threads; ++t)
            pool.emplace_back([&] {
                for (int bi = next.fetch_add(1); bi < nbins; bi = next.fetch_add(1))
                    run_tile(bi);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pose gradient: given per-pixel dL/d(depth) and dL/d(rgb) at a set of
// pixels, replays the recorded contributor lists and chains through the
// compositing, the 2D projection (including the Jacobian's dependence on the
// camera-frame mean and the rotation of the 3D covariance) down to the twist.
// ---------------------------------------------------------------------------

struct PixelGrad {
    int u = 0, v = 0;
    double d_depth = 0.0;      // dL/d(depth at pixel)
    Vec3 d_rgb = Vec3::Zero(); // dL/d(rgb at pixel)
};

namespace detail {

struct SplatDerivs {
    std::array<Vec2, 6> dmean2;
    std::array<Mat2, 6> dcov2;
    std::array<double, 6> dz;
};

inline SplatDerivs splat_derivs(const ScreenSplat& s, const CameraIntrinsics& intr) {
    SplatDerivs out;
    const Vec3& p = s.p_cam;
    const double iz = 1.0 / p.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    const auto j = proj_jacobian(p, intr);

    Eigen::Matrix<double, 2, 3> djdx = Eigen::Matrix<double, 2, 3>::Zero();
    djdx(0, 2) = -intr.fx * iz2;
    Eigen::Matrix<double, 2, 3> djdy = Eigen::Matrix<double, 2, 3>::Zero();
    djdy(1, 2) = -intr.fy * iz2;
    Eigen::Matrix<double, 2, 3> djdz;
    djdz << -intr.fx * iz2, 0, 2 * intr.fx * p.x() * iz3, 0, -intr.fy * iz2,
        2 * intr.fy * p.y() * iz3;

    const Mat3 px = geom::skew(p);
    for (int a = 0; a < 6; ++a) {
        Vec3 dp;
        Mat3 dsigma = Mat3::Zero();
        if (a < 3) {
            dp = -Vec3::Unit(a);
        } else {
            const Vec3 e = Vec3::Unit(a - 3);
            dp = px * e;
            dsigma = -geom::skew(e) * s.sigma_cam + s.sigma_cam * geom::skew(e);
        }
        const Eigen::Matrix<double, 2, 3> dj = djdx * dp.x() + djdy * dp.y() + djdz * dp.z();
        Mat2 ds = dj * s.sigma_cam * j.transpose() + j * s.sigma_cam * dj.transpose();
        if (a >= 3) ds += j * dsigma * j.transpose();
        out.dmean2[a] = j * dp;
        out.dcov2[a] = ds;
        out.dz[a] = dp.z();
    }
    return out;
}

}  // namespace detail

inline Twist render_gradient(const GaussianMap& map, const CameraIntrinsics& intr,
                             const RigidPose& pose, const RenderOutput& rendered,
                             const std::vector<PixelGrad>& pixels,
                             const RenderSettings& cfg = {}) {
    Twist grad = Twist::Zero();
    if (pixels.empty() || rendered.contribs.empty()) return grad;

    const auto splats = detail::project_splats(map, intr, pose, cfg);
    std::unordered_map<std::int32_t, std::int32_t> by_id;
    by_id.reserve(splats.size());
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(splats.size()); ++i)
        by_id.emplace(splats[i].id, i);

    std::unordered_map<std::int32_t, detail::SplatDerivs> deriv_cache;

    for (const auto& px : pixels) {
        if (px.u < 0 || px.u >= rendered.width || px.v < 0 || px.v >= rendered.height) continue;
        const size_t pi = static_cast<size_t>(px.v) * rendered.width + px.u;
        const auto& ids = rendered.contribs[pi];
        if (ids.empty()) continue;

        const int n = static_cast<int>(ids.size());
        std::vector<double> a_eff(n), zs(n), ts(n);
        std::vector<Vec3> cols(n);
        std::vector<Vec2> vs(n);
        std::vector<std::int32_t> sidx(n);
        std::vector<std::uint8_t> clamped(n, 0);

        double T = 1.0, acc = 0.0, dnum = 0.0;
        for (int k = 0; k < n; ++k) {
            const auto it = by_id.find(ids[k]);
            if (it == by_id.end()) {
                sidx[k] = -1;
                a_eff[k] = 0;
                ts[k] = T;
                zs[k] = 0;
                cols[k] = Vec3::Zero();
                vs[k] = Vec2::Zero();
                continue;
            }
            const auto& s = splats[it->second];
            const Vec2 d(px.u - s.mean2.x(), px.v - s.mean2.y());
            const double q = d.dot(s.cov2_inv * d);
            double a = s.alpha * std::exp(-0.5 * q);
            if (a > cfg.alpha_max) {
                a = cfg.alpha_max;
                clamped[k] = 1;
            }
            sidx[k] = it->second;
            a_eff[k] = a;
            zs[k] = s.z;
            cols[k] = s.color;
            vs[k] = s.cov2_inv * d;
            ts[k] = T;
            acc += a * T;
            dnum += s.z * a * T;
            T *= 1.0 - a;
        }

        const bool depth_ok = acc >= cfg.depth_acc_min;
        const double gd = depth_ok ? px.d_depth : 0.0;
        const double inv_acc = depth_ok ? 1.0 / acc : 0.0;

        Vec3 c_after = Vec3::Zero();
        double a_after = 0.0, dn_after = 0.0;
        for (int k = n - 1; k >= 0; --k) {
            if (sidx[k] < 0) continue;
            const double a = a_eff[k];
            const double om = std::max(1.0 - a, 1e-9);
            // dL/d(alpha_eff_k)
            double dl_da = px.d_rgb.dot(cols[k] * ts[k] - c_after / om);
            if (depth_ok) {
                const double d_dnum = zs[k] * ts[k] - dn_after / om;
                const double d_acc = ts[k] - a_after / om;
                dl_da += gd * (d_dnum * inv_acc - dnum * inv_acc * inv_acc * d_acc);
            }
            const double dl_dz = depth_ok ? gd * a * ts[k] * inv_acc : 0.0;

            c_after += cols[k] * (a * ts[k]);
            a_after += a * ts[k];
            dn_after += zs[k] * a * ts[k];

            const auto& s = splats[sidx[k]];
            auto dit = deriv_cache.find(sidx[k]);
            if (dit == deriv_cache.end())
                dit = deriv_cache.emplace(sidx[k], detail::splat_derivs(s, intr)).first;
            const auto& dv = dit->second;

            for (int axis = 0; axis < 6; ++axis) {
                double da = 0.0;
                if (!clamped[k])
                    da = a * (vs[k].dot(dv.dmean2[axis]) +
                              0.5 * vs[k].dot(dv.dcov2[axis] * vs[k]));
                grad[axis] += dl_da * da + dl_dz * dv.dz[axis];
            }
        }
    }
    return grad;
}

}  // namespace gsnav::splat
