#pragma once

// Fine target localization: a deterministic multi-scale NCC patch matcher
// between the goal image and map renderings, the rendering-based stopper,
// and matching-constrained pose optimization (first-order twist descent with
// backtracking plus periodic closed-form rigid registration).

#include <gsnav/coarse_match.hpp>
#include <gsnav/gaussian_map.hpp>
#include <gsnav/rasterizer.hpp>
#include <gsnav/sim.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace gsnav::fine {

using geom::CameraIntrinsics;
using geom::RigidPose;
using geom::Twist;
using geom::Vec3;
using gsmap::GaussianMap;

// ---------------------------------------------------------------------------
// Image views
// ---------------------------------------------------------------------------

struct RgbdView {
    int width = 0, height = 0;
    const std::vector<double>* rgb = nullptr;    // H*W*3
    const std::vector<double>* depth = nullptr;  // H*W

    double depth_at(int u, int v) const { return (*depth)[v * width + u]; }
    double lum_at(int u, int v) const {
        const size_t i = 3 * (static_cast<size_t>(v) * width + u);
        return 0.299 * (*rgb)[i] + 0.587 * (*rgb)[i + 1] + 0.114 * (*rgb)[i + 2];
    }
};

inline RgbdView view_of(const sim::Observation& obs) {
    return {obs.width, obs.height, &obs.rgb, &obs.depth};
}
inline RgbdView view_of(const splat::RenderOutput& r) {
    return {r.width, r.height, &r.rgb, &r.depth};
}

// ---------------------------------------------------------------------------
// Matcher
// ---------------------------------------------------------------------------

struct MatchPair {
    int gu = 0, gv = 0;  // goal pixel
    int ru = 0, rv = 0;  // rendered pixel
    double depth_goal = 0.0, depth_rendered = 0.0;
    double score = 0.0;  // NCC clamped to [0,1]
};

struct MatchSet {
    std::vector<MatchPair> pairs;
    size_t size() const { return pairs.size(); }
};

struct MatchConfig {
    int patch = 11;
    int stride = 4;          // level-0 grid stride
    double ratio = 0.9;      // coarse-level distance-ratio test
    double min_score = 0.55; // final NCC floor
    int exclude_radius = 2;  // grid cells ignored around the best for 2nd-best
};

namespace detail {

struct PyramidLevel {
    int w = 0, h = 0;
    std::vector<float> lum;
};

struct PatchGrid {
    int i_lo = 0, i_hi = -1, j_lo = 0, j_hi = -1;  // shared grid index range
    int ni = 0, nj = 0;
    // per level: normalized patches, rows = j_idx * ni + i_idx
    std::array<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 3> p;
    std::array<std::vector<std::uint8_t>, 3> valid;
};

struct MatcherContext {
    std::array<PyramidLevel, 3> levels;
    PatchGrid grid;
};

inline std::array<PyramidLevel, 3> build_pyramid(const RgbdView& img) {
    std::array<PyramidLevel, 3> out;
    out[0].w = img.width;
    out[0].h = img.height;
    out[0].lum.resize(static_cast<size_t>(img.width) * img.height);
    for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u)
            out[0].lum[v * img.width + u] = static_cast<float>(img.lum_at(u, v));
    for (int l = 1; l < 3; ++l) {
        const auto& src = out[l - 1];
        auto& dst = out[l];
        dst.w = src.w / 2;
        dst.h = src.h / 2;
        dst.lum.resize(static_cast<size_t>(dst.w) * dst.h);
        for (int v = 0; v < dst.h; ++v)
            for (int u = 0; u < dst.w; ++u)
                dst.lum[v * dst.w + u] =
                    0.25f * (src.lum[(2 * v) * src.w + 2 * u] +
                             src.lum[(2 * v) * src.w + 2 * u + 1] +
                             src.lum[(2 * v + 1) * src.w + 2 * u] +
                             src.lum[(2 * v + 1) * src.w + 2 * u + 1]);
    }
    return out;
}

inline MatcherContext build_context(const RgbdView& img, const MatchConfig& cfg) {
    MatcherContext ctx;
    ctx.levels = build_pyramid(img);
    const int m = cfg.patch / 2;
    auto& g = ctx.grid;
    g.i_lo = (m + cfg.stride - 1) / cfg.stride;
    g.i_hi = (img.width - 1 - m) / cfg.stride;
    g.j_lo = (m + cfg.stride - 1) / cfg.stride;
    g.j_hi = (img.height - 1 - m) / cfg.stride;
    g.ni = std::max(0, g.i_hi - g.i_lo + 1);
    g.nj = std::max(0, g.j_hi - g.j_lo + 1);
    const int n = g.ni * g.nj, plen = cfg.patch * cfg.patch;

    for (int l = 0; l < 3; ++l) {
        const int stride_l = std::max(1, cfg.stride >> l);
        const auto& lvl = ctx.levels[l];
        g.p[l].resize(n, plen);
        g.valid[l].assign(n, 0);
        for (int j = g.j_lo; j <= g.j_hi; ++j)
            for (int i = g.i_lo; i <= g.i_hi; ++i) {
                const int row = (j - g.j_lo) * g.ni + (i - g.i_lo);
                const int cu = std::clamp(i * stride_l, m, lvl.w - 1 - m);
                const int cv = std::clamp(j * stride_l, m, lvl.h - 1 - m);
                float mean = 0;
                for (int dy = -m; dy <= m; ++dy)
                    for (int dx = -m; dx <= m; ++dx)
                        mean += lvl.lum[(cv + dy) * lvl.w + cu + dx];
                mean /= plen;
                float nrm = 0;
                auto prow = g.p[l].row(row);
                int idx = 0;
                for (int dy = -m; dy <= m; ++dy)
                    for (int dx = -m; dx <= m; ++dx, ++idx) {
                        const float v = lvl.lum[(cv + dy) * lvl.w + cu + dx] - mean;
                        prow[idx] = v;
                        nrm += v * v;
                    }
                nrm = std::sqrt(nrm);
                if (nrm > 1e-7f) {
                    prow /= nrm;
                    g.valid[l][row] = 1;
                } else {
                    prow.setZero();
                }
            }
    }
    return ctx;
}

// NCC between one goal grid cell and one rendered grid cell at a level.
inline float cell_score(const MatcherContext& a, const MatcherContext& b, int level, int row_a,
                        int row_b) {
    if (!a.grid.valid[level][row_a] || !b.grid.valid[level][row_b]) return -2.0f;
    return a.grid.p[level].row(row_a).dot(b.grid.p[level].row(row_b));
}

}  // namespace detail

using MatcherContext = detail::MatcherContext;

inline MatcherContext make_matcher_context(const RgbdView& img, const MatchConfig& cfg = {}) {
    return detail::build_context(img, cfg);
}

// Matches goal -> rendered on shared stride-`stride` grids: exhaustive NCC at
// the coarsest octave with mutual-nearest-neighbor and ratio tests, then
// per-octave local refinement down to level 0. Pairs lacking valid depth on
// either side are dropped.
inline MatchSet match(const MatcherContext& goal_ctx, const RgbdView& goal,
                      const MatcherContext& rend_ctx, const RgbdView& rendered,
                      const MatchConfig& cfg = {}) {
    MatchSet out;
    const auto& gg = goal_ctx.grid;
    const auto& rg = rend_ctx.grid;
    if (gg.ni <= 0 || gg.nj <= 0 || rg.ni != gg.ni || rg.nj != gg.nj) return out;
    const int n = gg.ni * gg.nj;

    // coarsest level: full score matrix
    Eigen::MatrixXf s2 = gg.p[2] * rg.p[2].transpose();
    for (int r = 0; r < n; ++r)
        if (!gg.valid[2][r]) s2.row(r).setConstant(-2.0f);
    for (int c = 0; c < n; ++c)
        if (!rg.valid[2][c]) s2.col(c).setConstant(-2.0f);

    std::vector<int> fwd_best(n, -1), rev_best(n, -1);
    for (int c = 0; c < n; ++c) {
        Eigen::Index arg;
        if (s2.col(c).maxCoeff(&arg) > -1.5f) rev_best[c] = static_cast<int>(arg);
    }

    for (int r = 0; r < n; ++r) {
        if (!gg.valid[2][r]) continue;
        Eigen::Index arg;
        const float best = s2.row(r).maxCoeff(&arg);
        if (best <= -1.5f) continue;
        const int bi = static_cast<int>(arg) % gg.ni, bj = static_cast<int>(arg) / gg.ni;
        // second best outside the exclusion neighborhood
        float second = -2.0f;
        for (int c = 0; c < n; ++c) {
            const int ci = c % gg.ni, cj = c / gg.ni;
            if (std::max(std::abs(ci - bi), std::abs(cj - bj)) <= cfg.exclude_radius) continue;
            second = std::max(second, s2(r, c));
        }
        if (second > -1.5f) {
            const double d1 = 1.0 - best, d2 = 1.0 - second;
            if (!(d1 < cfg.ratio * d2 + 1e-12)) continue;  // ambiguous
        }
        if (rev_best[static_cast<int>(arg)] != r) continue;  // not mutual
        fwd_best[r] = static_cast<int>(arg);
    }

    // refine through the finer octaves with a +-1 grid-cell window
    const int m = cfg.patch / 2;
    for (int r = 0; r < n; ++r) {
        if (fwd_best[r] < 0) continue;
        int ci = fwd_best[r] % gg.ni, cj = fwd_best[r] / gg.ni;
        float score = -2.0f;
        for (int level = 1; level >= 0; --level) {
            float best = -2.0f;
            int bi = ci, bj = cj;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const int ii = ci + di, jj = cj + dj;
                    if (ii < 0 || ii >= gg.ni || jj < 0 || jj >= gg.nj) continue;
                    const float s =
                        detail::cell_score(goal_ctx, rend_ctx, level, r, jj * gg.ni + ii);
                    if (s > best) {
                        best = s;
                        bi = ii;
                        bj = jj;
                    }
                }
            ci = bi;
            cj = bj;
            score = best;
        }
        if (score < cfg.min_score) continue;

        MatchPair p;
        p.gu = std::clamp((r % gg.ni + gg.i_lo) * cfg.stride, m, goal.width - 1 - m);
        p.gv = std::clamp((r / gg.ni + gg.j_lo) * cfg.stride, m, goal.height - 1 - m);
        p.ru = std::clamp((ci + rg.i_lo) * cfg.stride, m, rendered.width - 1 - m);
        p.rv = std::clamp((cj + rg.j_lo) * cfg.stride, m, rendered.height - 1 - m);
        p.depth_goal = goal.depth_at(p.gu, p.gv);
        p.depth_rendered = rendered.depth_at(p.ru, p.rv);
        if (!(p.depth_goal > 0.0) || !(p.depth_rendered > 0.0)) continue;
        p.score = std::clamp<double>(score, 0.0, 1.0);
        out.pairs.push_back(p);
    }
    return out;
}

inline MatchSet match(const RgbdView& goal, const RgbdView& rendered,
                      const MatchConfig& cfg = {}) {
    const auto gctx = make_matcher_context(goal, cfg);
    const auto rctx = make_matcher_context(rendered, cfg);
    return match(gctx, goal, rctx, rendered, cfg);
}

// ---------------------------------------------------------------------------
// Stopper: render the map at the agent's pose with the goal intrinsics and
// count matches against the goal image.
// ---------------------------------------------------------------------------

inline bool stopper(const GaussianMap& map, const RigidPose& agent_pose, const RgbdView& goal,
                    const CameraIntrinsics& goal_intr, int tau,
                    const MatcherContext* goal_ctx = nullptr, const MatchConfig& mcfg = {},
                    splat::RenderSettings rcfg = {}, int* match_count = nullptr) {
    if (tau <= 0) {
        if (match_count) *match_count = 0;
        return true;
    }
    rcfg.record_contribs = false;
    const auto ro = splat::rasterize(map, goal_intr, agent_pose, rcfg);
    const auto rview = view_of(ro);
    const auto rctx = make_matcher_context(rview, mcfg);
    MatchSet ms = goal_ctx ? match(*goal_ctx, goal, rctx, rview, mcfg)
                           : match(make_matcher_context(goal, mcfg), goal, rctx, rview, mcfg);
    if (match_count) *match_count = static_cast<int>(ms.size());
    return static_cast<int>(ms.size()) >= tau;
}

// ---------------------------------------------------------------------------
// Matching-constrained pose optimization
// ---------------------------------------------------------------------------

struct PoseEstimate {
    RigidPose pose;
    double final_loss = 0.0;
    int iterations_used = 0;
    bool converged = false;
};

struct FineError {
    std::string message;
};

struct OptimizeConfig {
    int max_iterations = 100;
    double loss_tolerance = 0.02;   // meters
    double step_tolerance = 1e-5;   // twist norm
    int min_matches = 8;
    double trim_sigma = 3.0;
    int registration_period = 10;
    double initial_step = 0.15;
    int backtrack_limit = 8;
    MatchConfig match;
    splat::RenderSettings render;
};

namespace detail {

struct IterationData {
    std::vector<Eigen::Vector2i> rend_px;  // rendered pixel per kept pair
    std::vector<Vec3> x_goal;              // goal-frame points
    std::vector<Vec3> dirs;                // unprojection ray of the rendered pixel
    std::vector<double> fallback;          // residual at the incumbent pose
};

// Mean Euclidean distance between matched 3D points, with match coordinates
// held fixed; pairs whose re-rendered depth goes invalid keep their previous
// residual so backtracking comparisons stay well-defined.
inline double fixed_match_loss(const IterationData& it, const splat::RenderOutput& ro) {
    double sum = 0.0;
    for (size_t i = 0; i < it.x_goal.size(); ++i) {
        const double d = ro.depth_at(it.rend_px[i].x(), it.rend_px[i].y());
        sum += d > 0.0 ? (it.dirs[i] * d - it.x_goal[i]).norm() : it.fallback[i];
    }
    return it.x_goal.empty() ? 0.0 : sum / static_cast<double>(it.x_goal.size());
}

}  // namespace detail

inline std::variant<PoseEstimate, FineError> optimize_pose(
    const GaussianMap& map, const RgbdView& goal, const CameraIntrinsics& goal_intr,
    const RigidPose& init, const OptimizeConfig& cfg = {},
    const MatcherContext* goal_ctx_in = nullptr) {
    if (map.size() == 0) return FineError{"empty map"};

    MatcherContext local_ctx;
    const MatcherContext* goal_ctx = goal_ctx_in;
    if (!goal_ctx) {
        local_ctx = make_matcher_context(goal, cfg.match);
        goal_ctx = &local_ctx;
    }

    RigidPose pose = init;
    double loss = 0.0;
    bool converged = false;
    int iter = 0;

    splat::RenderSettings rec = cfg.render;
    rec.record_contribs = true;
    splat::RenderSettings norec = cfg.render;
    norec.record_contribs = false;

    for (; iter <= cfg.max_iterations; ++iter) {
        const auto ro = splat::rasterize(map, goal_intr, pose, rec);
        const auto rview = view_of(ro);
        const auto rctx = make_matcher_context(rview, cfg.match);
        const MatchSet ms = match(*goal_ctx, goal, rctx, rview, cfg.match);

        if (static_cast<int>(ms.size()) < cfg.min_matches) {
            if (iter == 0) return FineError{"not enough matches at init"};
            break;
        }

        // residuals + 3-sigma trim
        std::vector<double> res(ms.size());
        std::vector<Vec3> xg(ms.size()), xr(ms.size());
        for (size_t i = 0; i < ms.pairs.size(); ++i) {
            const auto& p = ms.pairs[i];
            xg[i] = geom::unproject_camera(p.gu, p.gv, p.depth_goal, goal_intr);
            xr[i] = geom::unproject_camera(p.ru, p.rv, p.depth_rendered, goal_intr);
            res[i] = (xr[i] - xg[i]).norm();
        }
        double mean = 0;
        for (double r : res) mean += r;
        mean /= res.size();
        double var = 0;
        for (double r : res) var += (r - mean) * (r - mean);
        const double cut = mean + cfg.trim_sigma * std::sqrt(var / res.size());

        detail::IterationData it;
        for (size_t i = 0; i < ms.pairs.size(); ++i) {
            if (res[i] > cut && res.size() > static_cast<size_t>(cfg.min_matches)) continue;
            const auto& p = ms.pairs[i];
            it.rend_px.push_back({p.ru, p.rv});
            it.x_goal.push_back(xg[i]);
            it.dirs.push_back(geom::unproject_camera(p.ru, p.rv, 1.0, goal_intr));
            it.fallback.push_back(res[i]);
        }
        if (static_cast<int>(it.x_goal.size()) < cfg.min_matches) {
            it.rend_px.clear();
            it.x_goal.clear();
            it.dirs.clear();
            it.fallback.clear();
            for (size_t i = 0; i < ms.pairs.size(); ++i) {
                const auto& p = ms.pairs[i];
                it.rend_px.push_back({p.ru, p.rv});
                it.x_goal.push_back(xg[i]);
                it.dirs.push_back(geom::unproject_camera(p.ru, p.rv, 1.0, goal_intr));
                it.fallback.push_back(res[i]);
            }
        }

        loss = detail::fixed_match_loss(it, ro);
        if (loss < cfg.loss_tolerance) {
            converged = true;
            break;
        }
        if (iter == cfg.max_iterations) break;

        bool stepped = false;
        double update_norm = 0.0;

        // periodic closed-form rigid alignment of the matched 3D sets
        if (cfg.registration_period > 0 && iter > 0 && iter % cfg.registration_period == 0 &&
            it.x_goal.size() >= 3) {
            const int q = static_cast<int>(it.x_goal.size());
            Eigen::Matrix3Xd src(3, q), dst(3, q);
            for (int i = 0; i < q; ++i) {
                const double d = ro.depth_at(it.rend_px[i].x(), it.rend_px[i].y());
                src.col(i) = it.dirs[i] * (d > 0.0 ? d : it.fallback[i]);
                dst.col(i) = it.x_goal[i];
            }
            const Eigen::Matrix4d m = Eigen::umeyama(src, dst, false);
            RigidPose align;
            align.rotation = m.topLeftCorner<3, 3>();
            align.translation = m.topRightCorner<3, 1>();
            const RigidPose cand = pose.compose(align.inverse());
            const auto cand_ro = splat::rasterize(map, goal_intr, cand, norec);
            const double cand_loss = detail::fixed_match_loss(it, cand_ro);
            if (cand_loss < loss) {
                pose = cand;
                update_norm = align.translation.norm() +
                              Eigen::AngleAxisd(align.rotation).angle();
                stepped = true;
            }
        }

        if (!stepped) {
            // first-order step through the renderer
            std::vector<splat::PixelGrad> pgs;
            const double q = static_cast<double>(it.x_goal.size());
            for (size_t i = 0; i < it.x_goal.size(); ++i) {
                const double d = ro.depth_at(it.rend_px[i].x(), it.rend_px[i].y());
                if (!(d > 0.0)) continue;
                const Vec3 diff = it.dirs[i] * d - it.x_goal[i];
                const double r = diff.norm();
                if (r < 1e-12) continue;
                splat::PixelGrad pg;
                pg.u = it.rend_px[i].x();
                pg.v = it.rend_px[i].y();
                pg.d_depth = diff.dot(it.dirs[i]) / (q * r);
                pgs.push_back(pg);
            }
            const Twist g = splat::render_gradient(map, goal_intr, pose, ro, pgs, cfg.render);
            const double gn = g.norm();
            if (gn < 1e-14) break;
            const Twist dir = -g / gn;
            double s = cfg.initial_step;
            for (int bt = 0; bt < cfg.backtrack_limit; ++bt, s *= 0.5) {
                const RigidPose cand = pose.compose(geom::se3_exp(s * dir));
                const auto cand_ro = splat::rasterize(map, goal_intr, cand, norec);
                if (detail::fixed_match_loss(it, cand_ro) < loss) {
                    pose = cand;
                    update_norm = s;
                    stepped = true;
                    break;
                }
            }
        }

        if (!stepped || update_norm < cfg.step_tolerance) {
            converged = loss < cfg.loss_tolerance || update_norm < cfg.step_tolerance;
            ++iter;
            break;
        }
    }

    PoseEstimate est;
    est.pose = pose;
    est.final_loss = loss;
    est.iterations_used = std::min(iter, cfg.max_iterations);
    est.converged = converged || loss < cfg.loss_tolerance;
    return est;
}

}  // namespace gsnav::fine
