#pragma once

// Coarse target localization over the discretized 5-DoF pose space: voxelize
// descriptor clouds, build one rotated goal kernel per icosphere direction,
// and score every (voxel, direction) either by direct evaluation
// (brute_force_align, the reference) or as a 3D convolution (conv_align,
// full3d scatter-GEMM or pillar z-folded form). A float streaming variant
// (coarse_bev_match) produces the BEV score map without materializing the
// full activation volume.

#include <gsnav/gaussian_map.hpp>
#include <gsnav/geometry.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsnav::coarse {

using geom::IcoSphere;
using geom::Mat3;
using geom::Vec3;
using gsmap::DescriptorPoint;
using gsmap::Feature;
using gsmap::kDescriptorDim;

// ---------------------------------------------------------------------------
// FeatureVoxelGrid: mean descriptor per occupied voxel, L2-normalized.
// Stored sparsely; feature_at() presents the dense X*Y*Z*C contract.
// ---------------------------------------------------------------------------

struct FeatureVoxelGrid {
    Vec3 origin = Vec3::Zero();
    double voxel = 0.2;
    int nx = 0, ny = 0, nz = 0;
    std::vector<std::int32_t> cell_index;        // nx*ny*nz, -1 = empty
    std::vector<Eigen::Vector3i> occ_cells;      // occupied voxel coordinates
    Eigen::Matrix<double, Eigen::Dynamic, kDescriptorDim, Eigen::RowMajor> features;

    int lin(int x, int y, int z) const { return (x * ny + y) * nz + z; }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }
    bool occupied(int x, int y, int z) const { return cell_index[lin(x, y, z)] >= 0; }
    Feature feature_at(int x, int y, int z) const {
        const auto i = cell_index[lin(x, y, z)];
        return i < 0 ? Feature::Zero() : Feature(features.row(i).transpose());
    }
    Eigen::Vector3i cell_of(const Vec3& p) const {
        return {static_cast<int>(std::floor((p.x() - origin.x()) / voxel)),
                static_cast<int>(std::floor((p.y() - origin.y()) / voxel)),
                static_cast<int>(std::floor((p.z() - origin.z()) / voxel))};
    }
};

inline FeatureVoxelGrid voxelize_scene(const std::vector<DescriptorPoint>& descriptors,
                                       double voxel) {
    if (descriptors.empty()) throw std::invalid_argument("voxelize_scene: empty cloud");
    Vec3 lo = descriptors.front().position, hi = lo;
    for (const auto& d : descriptors) {
        lo = lo.cwiseMin(d.position);
        hi = hi.cwiseMax(d.position);
    }
    FeatureVoxelGrid g;
    g.voxel = voxel;
    for (int a = 0; a < 3; ++a) g.origin[a] = voxel * std::floor(lo[a] / voxel);
    g.nx = static_cast<int>(std::floor((hi.x() - g.origin.x()) / voxel)) + 1;
    g.ny = static_cast<int>(std::floor((hi.y() - g.origin.y()) / voxel)) + 1;
    g.nz = static_cast<int>(std::floor((hi.z() - g.origin.z()) / voxel)) + 1;
    g.cell_index.assign(static_cast<size_t>(g.nx) * g.ny * g.nz, -1);

    std::vector<int> counts;
    std::vector<Feature> sums;
    for (const auto& d : descriptors) {
        const auto c = g.cell_of(d.position);
        const int l = g.lin(c.x(), c.y(), c.z());
        if (g.cell_index[l] < 0) {
            g.cell_index[l] = static_cast<std::int32_t>(g.occ_cells.size());
            g.occ_cells.push_back(c);
            counts.push_back(0);
            sums.push_back(Feature::Zero());
        }
        const int i = g.cell_index[l];
        sums[i] += d.feature;
        counts[i] += 1;
    }
    g.features.resize(static_cast<Eigen::Index>(sums.size()), kDescriptorDim);
    for (size_t i = 0; i < sums.size(); ++i) {
        Feature f = sums[i] / counts[i];
        const double n = f.norm();
        if (n > 1e-12) f /= n;
        g.features.row(static_cast<Eigen::Index>(i)) = f.transpose();
    }
    return g;
}

// ---------------------------------------------------------------------------
// KernelBank: the goal cloud rotated to each icosphere direction and
// quantized into a centered L^3 grid with the same rule and normalization as
// the scene grid. Kernels are stored sparsely (occupied cells only); every
// direction shares the same logical L x L x L x C shape.
// ---------------------------------------------------------------------------

struct KernelCell {
    Eigen::Vector3i offset;  // in [0, L)^3
    Feature feature;
};

// Rotation taking the canonical goal frame (camera looking along +x, zero
// roll) to the candidate icosphere direction. Applied to positions and to
// the orientation-carrying feature channels.
inline Mat3 kernel_rotation(const Vec3& direction) {
    const auto sp = geom::direction_to_sphere(direction);
    return geom::sphere_rotation(sp.theta_deg, sp.phi_deg) *
           geom::sphere_rotation(0.0, 0.0).transpose();
}

// surface-normal channels live at [7, 10)
inline Feature rotate_feature(const Feature& f, const Mat3& r) {
    Feature out = f;
    out.segment<3>(7) = r * f.segment<3>(7);
    return out;
}

struct KernelBank {
    int kernel_size = 41;  // L
    double voxel = 0.2;
    int level = 3;
    std::vector<Vec3> directions;                 // N icosphere vertices
    std::vector<std::vector<KernelCell>> kernels; // per direction
    std::vector<Eigen::Matrix<float, Eigen::Dynamic, kDescriptorDim, Eigen::RowMajor>>
        kernels_f;  // float mirror for the streaming path

    int center() const { return kernel_size / 2; }
    int count() const { return static_cast<int>(kernels.size()); }
    double max_possible_score() const {
        size_t m = 0;
        for (const auto& k : kernels) m = std::max(m, k.size());
        return static_cast<double>(m);
    }
};

// max_cells > 0 truncates each kernel to the cells holding the most points
// (deterministic tie-break), a runtime knob for in-run matching.
inline KernelBank build_kernel_bank(const std::vector<DescriptorPoint>& goal,
                                    const IcoSphere& sphere, double voxel, int kernel_size,
                                    int max_cells = 0) {
    if (goal.empty()) throw std::invalid_argument("build_kernel_bank: empty goal cloud");
    if (kernel_size < 3 || kernel_size % 2 == 0)
        throw std::invalid_argument("kernel_size must be odd and >= 3");
    KernelBank bank;
    bank.kernel_size = kernel_size;
    bank.voxel = voxel;
    bank.level = sphere.level;
    bank.directions = sphere.vertices;
    bank.kernels.resize(sphere.vertices.size());
    bank.kernels_f.resize(sphere.vertices.size());
    const int c = bank.center();

    for (size_t k = 0; k < sphere.vertices.size(); ++k) {
        const Mat3 rot = kernel_rotation(sphere.vertices[k]);

        std::vector<int> counts;
        std::vector<Feature> sums;
        std::vector<Eigen::Vector3i> cells;
        std::vector<int> cell_of_lin(static_cast<size_t>(kernel_size) * kernel_size *
                                         kernel_size,
                                     -1);
        auto lin = [&](int x, int y, int z) {
            return (x * kernel_size + y) * kernel_size + z;
        };
        for (const auto& d : goal) {
            const Vec3 p = rot * d.position;
            const int x = static_cast<int>(std::floor(p.x() / voxel)) + c;
            const int y = static_cast<int>(std::floor(p.y() / voxel)) + c;
            const int z = static_cast<int>(std::floor(p.z() / voxel)) + c;
            if (x < 0 || x >= kernel_size || y < 0 || y >= kernel_size || z < 0 ||
                z >= kernel_size)
                continue;
            const int l = lin(x, y, z);
            if (cell_of_lin[l] < 0) {
                cell_of_lin[l] = static_cast<int>(cells.size());
                cells.push_back({x, y, z});
                counts.push_back(0);
                sums.push_back(Feature::Zero());
            }
            sums[cell_of_lin[l]] += rotate_feature(d.feature, rot);
            counts[cell_of_lin[l]] += 1;
        }

        std::vector<int> keep(cells.size());
        std::iota(keep.begin(), keep.end(), 0);
        if (max_cells > 0 && static_cast<int>(keep.size()) > max_cells) {
            std::sort(keep.begin(), keep.end(), [&](int a, int b) {
                if (counts[a] != counts[b]) return counts[a] > counts[b];
                return lin(cells[a].x(), cells[a].y(), cells[a].z()) <
                       lin(cells[b].x(), cells[b].y(), cells[b].z());
            });
            keep.resize(max_cells);
        }
        // deterministic cell order within the kernel
        std::sort(keep.begin(), keep.end(), [&](int a, int b) {
            return lin(cells[a].x(), cells[a].y(), cells[a].z()) <
                   lin(cells[b].x(), cells[b].y(), cells[b].z());
        });

        auto& cellsk = bank.kernels[k];
        cellsk.reserve(keep.size());
        for (const int i : keep) {
            Feature f = sums[i] / counts[i];
            const double n = f.norm();
            if (n > 1e-12) f /= n;
            cellsk.push_back({cells[i], f});
        }
        auto& fm = bank.kernels_f[k];
        fm.resize(static_cast<Eigen::Index>(cellsk.size()), kDescriptorDim);
        for (size_t i = 0; i < cellsk.size(); ++i)
            fm.row(static_cast<Eigen::Index>(i)) = cellsk[i].feature.cast<float>().transpose();
    }
    return bank;
}

// ---------------------------------------------------------------------------
// ActivationVolume: X*Y*Z*N scores, argmax with smallest-linear-index ties.
// ---------------------------------------------------------------------------

struct ActivationVolume {
    int nx = 0, ny = 0, nz = 0, n_dirs = 0;
    Vec3 origin = Vec3::Zero();
    double voxel = 0.2;
    std::vector<double> scores;  // ((x*Y + y)*Z + z)*N + k
    int ax = 0, ay = 0, az = 0, ak = 0;
    double max_score = 0.0;

    size_t idx4(int x, int y, int z, int k) const {
        return (static_cast<size_t>((x * ny + y) * nz + z)) * n_dirs + k;
    }

    void find_argmax() {
        max_score = -std::numeric_limits<double>::infinity();
        size_t best = 0;
        for (size_t i = 0; i < scores.size(); ++i)
            if (scores[i] > max_score) {
                max_score = scores[i];
                best = i;
            }
        ak = static_cast<int>(best % n_dirs);
        size_t v = best / n_dirs;
        az = static_cast<int>(v % nz);
        v /= nz;
        ay = static_cast<int>(v % ny);
        ax = static_cast<int>(v / ny);
    }
};

inline constexpr size_t kMaxActivationEntries = 64ull << 20;  // dense-volume guard

inline ActivationVolume make_activation(const FeatureVoxelGrid& scene, const KernelBank& bank) {
    if (std::abs(scene.voxel - bank.voxel) > 1e-12)
        throw std::invalid_argument("voxel size mismatch between scene grid and kernel bank");
    ActivationVolume act;
    act.nx = scene.nx;
    act.ny = scene.ny;
    act.nz = scene.nz;
    act.n_dirs = bank.count();
    act.origin = scene.origin;
    act.voxel = scene.voxel;
    const size_t total = static_cast<size_t>(scene.nx) * scene.ny * scene.nz * bank.count();
    if (total > kMaxActivationEntries)
        throw std::invalid_argument("activation volume too large; use coarse_bev_match");
    act.scores.assign(total, 0.0);
    return act;
}

// Direct evaluation of the alignment score: for every output voxel and
// direction, the sum over kernel cells of the dot between the translated
// scene feature and the kernel feature, zeros outside the grid.
inline ActivationVolume brute_force_align(const FeatureVoxelGrid& scene,
                                          const KernelBank& bank) {
    ActivationVolume act = make_activation(scene, bank);
    const int c = bank.center();
    for (int x = 0; x < act.nx; ++x)
        for (int y = 0; y < act.ny; ++y)
            for (int z = 0; z < act.nz; ++z)
                for (int k = 0; k < act.n_dirs; ++k) {
                    double s = 0.0;
                    for (const auto& cell : bank.kernels[k]) {
                        const int sx = x + cell.offset.x() - c;
                        const int sy = y + cell.offset.y() - c;
                        const int sz = z + cell.offset.z() - c;
                        if (!scene.in_bounds(sx, sy, sz)) continue;
                        const auto i = scene.cell_index[scene.lin(sx, sy, sz)];
                        if (i < 0) continue;
                        s += scene.features.row(i).dot(cell.feature.transpose());
                    }
                    act.scores[act.idx4(x, y, z, k)] = s;
                }
    act.find_argmax();
    return act;
}

enum class ConvMode { Full3D, Pillar };

namespace detail {

// full3d: for each direction, one GEMM between the occupied scene features
// and the kernel features, scattered into the output volume.
inline void conv_full3d(const FeatureVoxelGrid& scene, const KernelBank& bank,
                        ActivationVolume& act) {
    const int c = bank.center();
    const Eigen::Index s_occ = scene.features.rows();
    Eigen::MatrixXd dots;  // s_occ x kernel_cells
    for (int k = 0; k < act.n_dirs; ++k) {
        const auto& cells = bank.kernels[k];
        if (cells.empty()) continue;
        Eigen::Matrix<double, Eigen::Dynamic, kDescriptorDim, Eigen::RowMajor> kf(
            static_cast<Eigen::Index>(cells.size()), kDescriptorDim);
        for (size_t i = 0; i < cells.size(); ++i)
            kf.row(static_cast<Eigen::Index>(i)) = cells[i].feature.transpose();
        dots.noalias() = scene.features * kf.transpose();
        for (Eigen::Index si = 0; si < s_occ; ++si) {
            const auto& sc = scene.occ_cells[static_cast<size_t>(si)];
            for (size_t ci = 0; ci < cells.size(); ++ci) {
                const int x = sc.x() - (cells[ci].offset.x() - c);
                const int y = sc.y() - (cells[ci].offset.y() - c);
                const int z = sc.z() - (cells[ci].offset.z() - c);
                if (x < 0 || x >= act.nx || y < 0 || y >= act.ny || z < 0 || z >= act.nz)
                    continue;
                act.scores[act.idx4(x, y, z, k)] += dots(si, static_cast<Eigen::Index>(ci));
            }
        }
    }
}

struct PillarGroup {
    int ox, oy;       // 2D kernel offset
    int oz_min, oz_max;
    Eigen::VectorXd fold;  // dense over the z-span, (oz - oz_min)*C + ch
    std::vector<std::pair<int, Feature>> cells;  // (oz, feature) for boundary rows
};

// pillar: fold z into the channel axis of both sides; each output z-slice is
// a 2D convolution of scene pillars with the z-shifted folded kernel.
inline void conv_pillar(const FeatureVoxelGrid& scene, const KernelBank& bank,
                        ActivationVolume& act) {
    const int c = bank.center();
    const int nzc = scene.nz * kDescriptorDim;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> pillars(
        scene.nx * scene.ny, nzc);
    pillars.setZero();
    for (Eigen::Index si = 0; si < scene.features.rows(); ++si) {
        const auto& sc = scene.occ_cells[static_cast<size_t>(si)];
        pillars.block<1, kDescriptorDim>(sc.x() * scene.ny + sc.y(),
                                         sc.z() * kDescriptorDim) = scene.features.row(si);
    }

    for (int k = 0; k < act.n_dirs; ++k) {
        // group kernel cells by their 2D offset
        std::vector<PillarGroup> groups;
        {
            std::vector<int> group_of(static_cast<size_t>(bank.kernel_size) * bank.kernel_size,
                                      -1);
            for (const auto& cell : bank.kernels[k]) {
                const int g2 = cell.offset.x() * bank.kernel_size + cell.offset.y();
                if (group_of[g2] < 0) {
                    group_of[g2] = static_cast<int>(groups.size());
                    groups.push_back({cell.offset.x(), cell.offset.y(), cell.offset.z(),
                                      cell.offset.z(), {}, {}});
                }
                auto& g = groups[group_of[g2]];
                g.oz_min = std::min(g.oz_min, cell.offset.z());
                g.oz_max = std::max(g.oz_max, cell.offset.z());
                g.cells.emplace_back(cell.offset.z(), cell.feature);
            }
            for (auto& g : groups) {
                g.fold = Eigen::VectorXd::Zero((g.oz_max - g.oz_min + 1) * kDescriptorDim);
                for (const auto& [oz, f] : g.cells)
                    g.fold.segment<kDescriptorDim>((oz - g.oz_min) * kDescriptorDim) = f;
            }
        }

        for (int x = 0; x < act.nx; ++x)
            for (int y = 0; y < act.ny; ++y) {
                for (const auto& g : groups) {
                    const int sx = x + g.ox - c, sy = y + g.oy - c;
                    if (sx < 0 || sx >= scene.nx || sy < 0 || sy >= scene.ny) continue;
                    const auto row = pillars.row(sx * scene.ny + sy);
                    const int span = static_cast<int>(g.fold.size());
                    for (int z = 0; z < act.nz; ++z) {
                        const int z_start = z + g.oz_min - c;
                        double s;
                        if (z_start >= 0 && z_start * kDescriptorDim + span <= nzc) {
                            s = row.segment(z_start * kDescriptorDim, span).dot(g.fold);
                        } else {
                            s = 0.0;
                            for (const auto& [oz, f] : g.cells) {
                                const int sz = z + oz - c;
                                if (sz < 0 || sz >= scene.nz) continue;
                                s += row.segment<kDescriptorDim>(sz * kDescriptorDim)
                                         .dot(f.transpose());
                            }
                        }
                        act.scores[act.idx4(x, y, z, k)] += s;
                    }
                }
            }
    }
}

}  // namespace detail

struct ConvOptions {
    int pillar_fold_limit = 64;  // max Z the pillar fold accepts
};

inline ActivationVolume conv_align(const FeatureVoxelGrid& scene, const KernelBank& bank,
                                   ConvMode mode, const ConvOptions& opt = {}) {
    ActivationVolume act = make_activation(scene, bank);
    if (mode == ConvMode::Pillar && scene.nz > opt.pillar_fold_limit)
        throw std::invalid_argument("pillar mode: Z exceeds the fold limit");
    if (mode == ConvMode::Full3D)
        detail::conv_full3d(scene, bank, act);
    else
        detail::conv_pillar(scene, bank, act);
    act.find_argmax();
    return act;
}

// ---------------------------------------------------------------------------
// BEV projection of the activation: per (x,y) the max over z and directions,
// zeroed below the threshold.
// ---------------------------------------------------------------------------

struct BevScoreMap {
    int nx = 0, ny = 0;
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    double voxel = 0.2;
    std::vector<double> scores;  // x*ny + y
    double max_score = 0.0;
    int ax = 0, ay = 0;

    bool any_positive() const { return max_score > 0.0; }
    Eigen::Vector2d cell_center(int x, int y) const {
        return origin + Eigen::Vector2d((x + 0.5) * voxel, (y + 0.5) * voxel);
    }
};

inline BevScoreMap activation_to_bev(const ActivationVolume& act, double sigma_a) {
    BevScoreMap bev;
    bev.nx = act.nx;
    bev.ny = act.ny;
    bev.origin = act.origin.head<2>();
    bev.voxel = act.voxel;
    bev.scores.assign(static_cast<size_t>(act.nx) * act.ny, 0.0);
    bev.max_score = 0.0;
    for (int x = 0; x < act.nx; ++x)
        for (int y = 0; y < act.ny; ++y) {
            double m = 0.0;
            for (int z = 0; z < act.nz; ++z) {
                const size_t base = act.idx4(x, y, z, 0);
                for (int k = 0; k < act.n_dirs; ++k) m = std::max(m, act.scores[base + k]);
            }
            if (m < sigma_a) m = 0.0;
            bev.scores[x * act.ny + y] = m;
            if (m > bev.max_score) {
                bev.max_score = m;
                bev.ax = x;
                bev.ay = y;
            }
        }
    return bev;
}

// ---------------------------------------------------------------------------
// Streaming float path for in-run matching: equivalent to
// activation_to_bev(conv_align(...)) plus the 5-DoF argmax, evaluated one
// direction slab at a time so the dense volume never exists.
// ---------------------------------------------------------------------------

struct CoarseResult {
    BevScoreMap bev;
    int ax = 0, ay = 0, az = 0, ak = 0;
    double origin_z = 0.0;
    double max_score = 0.0;
    geom::SpherePose argmax_pose(const KernelBank& bank) const {
        auto sp = geom::direction_to_sphere(bank.directions[ak]);
        sp.x = bev.origin.x() + (ax + 0.5) * bev.voxel;
        sp.y = bev.origin.y() + (ay + 0.5) * bev.voxel;
        sp.z = origin_z + (az + 0.5) * bev.voxel;
        return sp;
    }
};

inline CoarseResult coarse_bev_match(const FeatureVoxelGrid& scene, const KernelBank& bank,
                                     double sigma_a) {
    if (std::abs(scene.voxel - bank.voxel) > 1e-12)
        throw std::invalid_argument("voxel size mismatch between scene grid and kernel bank");
    CoarseResult res;
    res.origin_z = scene.origin.z();
    res.bev.nx = scene.nx;
    res.bev.ny = scene.ny;
    res.bev.origin = scene.origin.head<2>();
    res.bev.voxel = scene.voxel;
    res.bev.scores.assign(static_cast<size_t>(scene.nx) * scene.ny, 0.0);

    const int c = bank.center();
    const size_t vol = static_cast<size_t>(scene.nx) * scene.ny * scene.nz;
    std::vector<float> slab(vol);
    Eigen::Matrix<float, Eigen::Dynamic, kDescriptorDim, Eigen::RowMajor> sf =
        scene.features.cast<float>();
    Eigen::MatrixXf dots;

    double best = -std::numeric_limits<double>::infinity();
    size_t best_lin4 = 0;
    auto lin3 = [&](int x, int y, int z) {
        return (static_cast<size_t>(x) * scene.ny + y) * scene.nz + z;
    };

    for (int k = 0; k < bank.count(); ++k) {
        const auto& cells = bank.kernels[k];
        if (cells.empty()) continue;
        std::fill(slab.begin(), slab.end(), 0.0f);
        dots.noalias() = sf * bank.kernels_f[k].transpose();
        for (Eigen::Index si = 0; si < sf.rows(); ++si) {
            const auto& sc = scene.occ_cells[static_cast<size_t>(si)];
            for (size_t ci = 0; ci < cells.size(); ++ci) {
                const int x = sc.x() - (cells[ci].offset.x() - c);
                const int y = sc.y() - (cells[ci].offset.y() - c);
                const int z = sc.z() - (cells[ci].offset.z() - c);
                if (x < 0 || x >= scene.nx || y < 0 || y >= scene.ny || z < 0 || z >= scene.nz)
                    continue;
                slab[lin3(x, y, z)] += dots(si, static_cast<Eigen::Index>(ci));
            }
        }
        for (int x = 0; x < scene.nx; ++x)
            for (int y = 0; y < scene.ny; ++y) {
                double colmax = 0.0;
                for (int z = 0; z < scene.nz; ++z) {
                    const double s = slab[lin3(x, y, z)];
                    if (s > colmax) colmax = s;
                    const size_t l4 =
                        (static_cast<size_t>((x * scene.ny + y) * scene.nz + z)) *
                            bank.count() +
                        k;
                    if (s > best || (s == best && l4 < best_lin4)) {
                        best = s;
                        best_lin4 = l4;
                        res.ax = x;
                        res.ay = y;
                        res.az = z;
                        res.ak = k;
                    }
                }
                auto& cell = res.bev.scores[x * scene.ny + y];
                cell = std::max(cell, colmax);
            }
    }
    res.max_score = best;

    res.bev.max_score = 0.0;
    for (int x = 0; x < res.bev.nx; ++x)
        for (int y = 0; y < res.bev.ny; ++y) {
            auto& s = res.bev.scores[x * res.bev.ny + y];
            if (s < sigma_a) s = 0.0;
            if (s > res.bev.max_score) {
                res.bev.max_score = s;
                res.bev.ax = x;
                res.bev.ay = y;
            }
        }
    return res;
}

// ---------------------------------------------------------------------------
// KernelBank serialization (binary, little-endian float32 payload).
// ---------------------------------------------------------------------------

inline void save_kernel_bank(const KernelBank& bank, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open kernel bank file for writing: " + path);
    os.write("GSNVKB01", 8);
    gsmap::io::write_u32(os, static_cast<std::uint32_t>(bank.kernel_size));
    gsmap::io::write_f32(os, bank.voxel);
    gsmap::io::write_u32(os, static_cast<std::uint32_t>(bank.level));
    gsmap::io::write_u32(os, static_cast<std::uint32_t>(bank.count()));
    for (int k = 0; k < bank.count(); ++k) {
        for (int a = 0; a < 3; ++a) gsmap::io::write_f32(os, bank.directions[k][a]);
        gsmap::io::write_u32(os, static_cast<std::uint32_t>(bank.kernels[k].size()));
        for (const auto& cell : bank.kernels[k]) {
            for (int a = 0; a < 3; ++a)
                gsmap::io::write_u32(os, static_cast<std::uint32_t>(cell.offset[a]));
            for (int i = 0; i < kDescriptorDim; ++i) gsmap::io::write_f32(os, cell.feature[i]);
        }
    }
}

inline KernelBank load_kernel_bank(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open kernel bank file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, "GSNVKB01", 8) != 0)
        throw std::runtime_error("bad kernel bank magic in " + path);
    KernelBank bank;
    bank.kernel_size = static_cast<int>(gsmap::io::read_u32(is));
    bank.voxel = gsmap::io::read_f32(is);
    bank.level = static_cast<int>(gsmap::io::read_u32(is));
    const int n = static_cast<int>(gsmap::io::read_u32(is));
    bank.directions.resize(n);
    bank.kernels.resize(n);
    bank.kernels_f.resize(n);
    for (int k = 0; k < n; ++k) {
        for (int a = 0; a < 3; ++a) bank.directions[k][a] = gsmap::io::read_f32(is);
        const int m = static_cast<int>(gsmap::io::read_u32(is));
        bank.kernels[k].resize(m);
        for (auto& cell : bank.kernels[k]) {
            for (int a = 0; a < 3; ++a)
                cell.offset[a] = static_cast<int>(gsmap::io::read_u32(is));
            for (int i = 0; i < kDescriptorDim; ++i) cell.feature[i] = gsmap::io::read_f32(is);
        }
        auto& fm = bank.kernels_f[k];
        fm.resize(m, kDescriptorDim);
        for (int i = 0; i < m; ++i)
            fm.row(i) = bank.kernels[k][i].feature.cast<float>().transpose();
    }
    if (!is) throw std::runtime_error("truncated kernel bank file: " + path);
    return bank;
}

}  // namespace gsnav::coarse
