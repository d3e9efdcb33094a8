#pragma once

// Evaluation harness: deterministic dataset generation, the per-episode
// navigation controller wiring mapping, coarse/fine localization and the
// policy together, SR/SPL metrics with a failure taxonomy, artifact dumps
// and trajectory logs with exact replay.

#include <gsnav/coarse_match.hpp>
#include <gsnav/fine_align.hpp>
#include <gsnav/gaussian_map.hpp>
#include <gsnav/geometry.hpp>
#include <gsnav/grid2d.hpp>
#include <gsnav/image_io.hpp>
#include <gsnav/policy.hpp>
#include <gsnav/rasterizer.hpp>
#include <gsnav/scene_io.hpp>
#include <gsnav/sim.hpp>

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace gsnav::bench {

using geom::Vec2;
using geom::Vec3;
using nlohmann::json;

// ---------------------------------------------------------------------------
// RunConfig: a run is a pure function of this document.
// ---------------------------------------------------------------------------

struct RunConfig {
    std::vector<std::uint64_t> scene_seeds = {11, 23, 37, 41, 59};
    int rooms = 5;
    int episodes_per_cell = 50;
    std::vector<sim::Difficulty> difficulties = {sim::Difficulty::Easy};
    std::vector<sim::FovBand> fov_bands = {sim::FovBand::Narrow};
    std::uint64_t rng_seed = 7;

    // observation / map
    int obs_width = 160, obs_height = 120;
    double agent_fov_deg = 79.0;
    int lift_stride = 2;
    std::size_t budget = 200000;

    // coarse localization
    int gamma = 3;
    double voxel = 0.2;
    int kernel_size = 41;       // L; L*v covers twice the goal radius
    double goal_radius = 4.0;   // R_g truncation
    int goal_stride = 8;        // goal descriptor sampling for the kernel bank
    int kernel_max_cells = 80;  // per-direction kernel truncation
    double sigma_a_fraction = 0.35;
    int coarse_cadence = 10;
    std::size_t coarse_min_descriptors = 1500;

    // fine localization
    int tau = 40;
    int stopper_cadence = 3;
    int fine_recadence = 5;

    // policy / episode
    double success_radius = 1.0;  // epsilon
    int max_steps = 500;          // T
    bool initial_scan = true;
    std::string policy = "full";  // "full" or "random"

    int workers = 1;
    std::string out_dir;
    bool write_artifacts = false;
};

inline json config_to_json(const RunConfig& c) {
    json j;
    j["scene_seeds"] = c.scene_seeds;
    j["rooms"] = c.rooms;
    j["episodes_per_cell"] = c.episodes_per_cell;
    j["difficulties"] = json::array();
    for (auto d : c.difficulties) j["difficulties"].push_back(sim::difficulty_name(d));
    j["fov_bands"] = json::array();
    for (auto f : c.fov_bands) j["fov_bands"].push_back(sim::fov_band_name(f));
    j["rng_seed"] = c.rng_seed;
    j["obs_width"] = c.obs_width;
    j["obs_height"] = c.obs_height;
    j["agent_fov_deg"] = c.agent_fov_deg;
    j["lift_stride"] = c.lift_stride;
    j["budget"] = c.budget;
    j["gamma"] = c.gamma;
    j["voxel"] = c.voxel;
    j["kernel_size"] = c.kernel_size;
    j["goal_radius"] = c.goal_radius;
    j["goal_stride"] = c.goal_stride;
    j["kernel_max_cells"] = c.kernel_max_cells;
    j["sigma_a_fraction"] = c.sigma_a_fraction;
    j["coarse_cadence"] = c.coarse_cadence;
    j["coarse_min_descriptors"] = c.coarse_min_descriptors;
    j["tau"] = c.tau;
    j["stopper_cadence"] = c.stopper_cadence;
    j["fine_recadence"] = c.fine_recadence;
    j["success_radius"] = c.success_radius;
    j["max_steps"] = c.max_steps;
    j["initial_scan"] = c.initial_scan;
    j["policy"] = c.policy;
    j["workers"] = c.workers;
    j["out_dir"] = c.out_dir;
    j["write_artifacts"] = c.write_artifacts;
    return j;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    auto get = [&](const char* k, auto& field) {
        if (j.contains(k)) field = j.at(k).template get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("scene_seeds"))
        c.scene_seeds = j.at("scene_seeds").get<std::vector<std::uint64_t>>();
    get("rooms", c.rooms);
    get("episodes_per_cell", c.episodes_per_cell);
    if (j.contains("difficulties")) {
        c.difficulties.clear();
        for (const auto& s : j.at("difficulties")) {
            const std::string d = s;
            c.difficulties.push_back(d == "easy"     ? sim::Difficulty::Easy
                                     : d == "medium" ? sim::Difficulty::Medium
                                                     : sim::Difficulty::Hard);
        }
    }
    if (j.contains("fov_bands")) {
        c.fov_bands.clear();
        for (const auto& s : j.at("fov_bands"))
            c.fov_bands.push_back(s == "narrow" ? sim::FovBand::Narrow : sim::FovBand::Wide);
    }
    get("rng_seed", c.rng_seed);
    get("obs_width", c.obs_width);
    get("obs_height", c.obs_height);
    get("agent_fov_deg", c.agent_fov_deg);
    get("lift_stride", c.lift_stride);
    get("budget", c.budget);
    get("gamma", c.gamma);
    get("voxel", c.voxel);
    get("kernel_size", c.kernel_size);
    get("goal_radius", c.goal_radius);
    get("goal_stride", c.goal_stride);
    get("kernel_max_cells", c.kernel_max_cells);
    get("sigma_a_fraction", c.sigma_a_fraction);
    get("coarse_cadence", c.coarse_cadence);
    get("coarse_min_descriptors", c.coarse_min_descriptors);
    get("tau", c.tau);
    get("stopper_cadence", c.stopper_cadence);
    get("fine_recadence", c.fine_recadence);
    get("success_radius", c.success_radius);
    get("max_steps", c.max_steps);
    get("initial_scan", c.initial_scan);
    get("policy", c.policy);
    get("workers", c.workers);
    get("out_dir", c.out_dir);
    get("write_artifacts", c.write_artifacts);
    return c;
}

// ---------------------------------------------------------------------------
// Episode execution
// ---------------------------------------------------------------------------

enum class Outcome : int { Success, NeverDetected, WrongRoom, Timeout, FineDivergence };

inline const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Success: return "success";
        case Outcome::NeverDetected: return "never_detected";
        case Outcome::WrongRoom: return "wrong_room";
        case Outcome::Timeout: return "timeout";
        default: return "fine_divergence";
    }
}

struct StepRecord {
    int step = 0;
    sim::Action action = sim::Action::Stop;
    double x = 0, y = 0, yaw_deg = 0;
    policy::Phase phase = policy::Phase::Explore;
    double wx = 0, wy = 0;
    double sa_max = 0;
    int stopper = 0;
    double fine_loss = -1;
};

struct EpisodeResult {
    sim::Episode episode;
    bool success = false;
    Outcome outcome = Outcome::NeverDetected;
    int steps = 0;
    double path_length = 0.0;
    double final_error = 0.0;
    double spl = 0.0;
    std::vector<StepRecord> trajectory;
    // stop-step artifacts
    std::vector<double> stop_rgb, goal_rgb;
    std::vector<double> occupancy_dump;
    std::vector<double> sa_dump;
    int occ_w = 0, occ_h = 0, sa_w = 0, sa_h = 0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace detail

inline EpisodeResult run_episode(const sim::Scene& scene, const sim::Episode& ep,
                                 const RunConfig& cfg) {
    EpisodeResult res;
    res.episode = ep;

    const auto agent_intr =
        geom::CameraIntrinsics::from_fov(cfg.agent_fov_deg, cfg.obs_width, cfg.obs_height);
    const auto goal_intr = ep.goal_intrinsics();
    const auto goal_view = sim::render(scene, ep.goal_pose(), goal_intr);
    const auto goal_rgbd = fine::view_of(goal_view);

    sim::AgentState agent;
    agent.bev = ep.start_bev;
    agent.yaw_deg = ep.start_yaw_deg;

    const bool random_policy = cfg.policy == "random";
    std::mt19937_64 policy_rng(detail::mix_seed(ep.scene_seed, 7777 + ep.index));

    // full-policy state
    gsmap::GaussianMap map(cfg.budget);
    gsmap::LiftConfig lift;
    lift.stride = cfg.lift_stride;
    const Vec2 occ_lo = scene.bounds_lo.head<2>() - Vec2(0.3, 0.3);
    const Vec2 occ_hi = scene.bounds_hi.head<2>() + Vec2(0.3, 0.3);
    policy::OccupancyGrid occ(0.05, occ_lo,
                              static_cast<int>(std::ceil((occ_hi.x() - occ_lo.x()) / 0.05)),
                              static_cast<int>(std::ceil((occ_hi.y() - occ_lo.y()) / 0.05)));

    fine::MatchConfig mcfg;
    fine::MatcherContext goal_ctx;
    std::optional<coarse::KernelBank> bank;
    double sigma_a = 0.0;
    fine::OptimizeConfig ocfg;
    if (!random_policy) {
        goal_ctx = fine::make_matcher_context(goal_rgbd, mcfg);
        const auto goal_desc =
            gsmap::describe_goal(goal_view, cfg.goal_radius, cfg.goal_stride);
        if (goal_desc) {
            bank = coarse::build_kernel_bank(*goal_desc, geom::icosphere(cfg.gamma), cfg.voxel,
                                             cfg.kernel_size, cfg.kernel_max_cells);
            sigma_a = cfg.sigma_a_fraction * bank->max_possible_score();
        }
    }

    policy::PolicyState pstate;
    std::optional<coarse::CoarseResult> coarse_res;
    std::vector<Vec2> visited_peaks, scanned_at;
    int scan_remaining = (!random_policy && cfg.initial_scan) ? 24 : 0;
    if (!random_policy && cfg.initial_scan) scanned_at.push_back(agent.bev);
    int fine_attempts = 0, fine_successes = 0;
    int reach_fine_age = 0;
    bool entered_reach = false;
    int forward_blocked_streak = 0;

    const Vec2 goal_bev(ep.goal.x, ep.goal.y);

    for (int step_i = 0; step_i < cfg.max_steps; ++step_i) {
        sim::Action action = sim::Action::Stop;
        StepRecord rec;
        rec.step = step_i;

        if (random_policy) {
            const int pick = std::uniform_int_distribution<int>(0, 79)(policy_rng);
            action = pick == 0 ? sim::Action::Stop
                     : pick % 3 == 0
                         ? sim::Action::TurnLeft
                         : (pick % 3 == 1 ? sim::Action::TurnRight : sim::Action::MoveForward);
        } else {
            const auto obs = sim::render(scene, agent.pose(), agent_intr, step_i);
            map.integrate(obs, lift);
            policy::update_occupancy(occ, obs);

            const bool scanning = scan_remaining > 0 && pstate.phase == policy::Phase::Explore;

            // coarse localization on its cadence (paused while scanning except
            // on the last scan step, when the sweep is complete)
            if (bank && pstate.phase == policy::Phase::Explore &&
                map.descriptors().size() >= cfg.coarse_min_descriptors &&
                ((!scanning && step_i % cfg.coarse_cadence == 0) ||
                 (scanning && scan_remaining == 1))) {
                const auto grid = coarse::voxelize_scene(map.descriptors(), cfg.voxel);
                coarse_res = coarse::coarse_bev_match(grid, *bank, sigma_a);
                // suppress already-visited activation peaks
                for (const auto& p : visited_peaks) {
                    for (int x = 0; x < coarse_res->bev.nx; ++x)
                        for (int y = 0; y < coarse_res->bev.ny; ++y)
                            if ((coarse_res->bev.cell_center(x, y) - p).norm() < 0.6)
                                coarse_res->bev.scores[x * coarse_res->bev.ny + y] = 0.0;
                }
                coarse_res->bev.max_score = 0.0;
                for (int x = 0; x < coarse_res->bev.nx; ++x)
                    for (int y = 0; y < coarse_res->bev.ny; ++y) {
                        const double s = coarse_res->bev.scores[x * coarse_res->bev.ny + y];
                        if (s > coarse_res->bev.max_score) {
                            coarse_res->bev.max_score = s;
                            coarse_res->bev.ax = x;
                            coarse_res->bev.ay = y;
                        }
                    }
            }

            // stopper + fine localization
            bool stopper_hit = false;
            std::optional<fine::PoseEstimate> fine_est;
            const int cadence = scanning ? 2 : cfg.stopper_cadence;
            if (pstate.phase == policy::Phase::Explore && map.size() > 0 &&
                step_i % cadence == 0) {
                stopper_hit = fine::stopper(map, agent.pose(), goal_rgbd, goal_intr, cfg.tau,
                                            &goal_ctx, mcfg);
                if (stopper_hit) {
                    ++fine_attempts;
                    std::vector<geom::RigidPose> inits;
                    if (coarse_res && coarse_res->max_score > sigma_a && bank)
                        inits.push_back(geom::sphere_to_rigid(coarse_res->argmax_pose(*bank)));
                    inits.push_back(agent.pose());
                    for (const auto& init : inits) {
                        auto r = fine::optimize_pose(map, goal_rgbd, goal_intr, init, ocfg,
                                                     &goal_ctx);
                        if (std::holds_alternative<fine::PoseEstimate>(r)) {
                            const auto& est = std::get<fine::PoseEstimate>(r);
                            const Vec2 wp = geom::bev_project(est.pose);
                            const bool sane = est.converged &&
                                              wp.x() > occ_lo.x() && wp.x() < occ_hi.x() &&
                                              wp.y() > occ_lo.y() && wp.y() < occ_hi.y();
                            if (sane) {
                                fine_est = est;
                                ++fine_successes;
                                break;
                            }
                        }
                    }
                    if (!fine_est) stopper_hit = false;  // unusable detection
                }
            } else if (pstate.phase == policy::Phase::Reach) {
                ++reach_fine_age;
                if (reach_fine_age >= cfg.fine_recadence && pstate.fine_estimate) {
                    reach_fine_age = 0;
                    ++fine_attempts;
                    auto r = fine::optimize_pose(map, goal_rgbd, goal_intr,
                                                 pstate.fine_estimate->pose, ocfg, &goal_ctx);
                    if (std::holds_alternative<fine::PoseEstimate>(r)) {
                        const auto& est = std::get<fine::PoseEstimate>(r);
                        if (est.converged) {
                            fine_est = est;
                            ++fine_successes;
                        }
                    }
                }
            }

            const auto s_f = grid::frontiers(occ, agent.bev);
            const auto decision =
                policy::decide(pstate, occ, agent.bev,
                               coarse_res ? &coarse_res->bev : nullptr, s_f, stopper_hit,
                               fine_est);
            const bool was_explore = pstate.phase == policy::Phase::Explore;
            pstate = decision.state;
            if (was_explore && pstate.phase == policy::Phase::Reach) {
                entered_reach = true;
                scan_remaining = 0;
                reach_fine_age = 0;
            }

            if (decision.emit_stop) {
                action = sim::Action::Stop;
            } else if (scanning && pstate.phase == policy::Phase::Explore) {
                action = sim::Action::TurnLeft;
                --scan_remaining;
            } else if (pstate.waypoint) {
                // arriving at an exploration waypoint triggers a look-around
                if (pstate.phase == policy::Phase::Explore &&
                    (agent.bev - *pstate.waypoint).norm() < 0.35) {
                    bool fresh = true;
                    for (const auto& p : scanned_at)
                        if ((p - agent.bev).norm() < 0.75) fresh = false;
                    if (coarse_res && coarse_res->bev.any_positive()) {
                        const Vec2 peak = coarse_res->bev.cell_center(coarse_res->bev.ax,
                                                                      coarse_res->bev.ay);
                        if ((peak - *pstate.waypoint).norm() < 0.45)
                            visited_peaks.push_back(peak);
                    }
                    if (fresh) {
                        scanned_at.push_back(agent.bev);
                        scan_remaining = 24;
                        action = sim::Action::TurnLeft;
                        --scan_remaining;
                    } else {
                        action = sim::Action::TurnLeft;  // nudge away from a stale waypoint
                        pstate.waypoint.reset();
                    }
                } else {
                    auto plan = policy::plan_actions(occ, agent.pose(), agent.yaw_deg,
                                                     *pstate.waypoint);
                    if (plan.status == policy::PlanStatus::Unreachable &&
                        pstate.phase == policy::Phase::Explore && !s_f.empty) {
                        // steer toward the frontier cell nearest the blocked waypoint
                        double best = grid::kInf;
                        Vec2 alt = agent.bev;
                        for (int iy = 0; iy < occ.height; ++iy)
                            for (int ix = 0; ix < occ.width; ++ix) {
                                if (!s_f.mask[occ.index(ix, iy)]) continue;
                                const double d =
                                    (occ.center_of(ix, iy) - *pstate.waypoint).norm();
                                if (d < best) {
                                    best = d;
                                    alt = occ.center_of(ix, iy);
                                }
                            }
                        plan = policy::plan_actions(occ, agent.pose(), agent.yaw_deg, alt);
                    }
                    action = plan.status == policy::PlanStatus::Ok ? plan.action
                                                                   : sim::Action::TurnLeft;
                }
            } else {
                action = sim::Action::TurnLeft;  // no waypoint yet; keep looking
            }

            // unstick: repeated blocked forwards turn instead
            if (action == sim::Action::MoveForward && forward_blocked_streak >= 3)
                action = sim::Action::TurnLeft;

            rec.phase = pstate.phase;
            rec.stopper = stopper_hit ? 1 : 0;
            rec.sa_max = coarse_res ? coarse_res->bev.max_score : 0.0;
            if (pstate.waypoint) {
                rec.wx = pstate.waypoint->x();
                rec.wy = pstate.waypoint->y();
            }
            if (pstate.fine_estimate) rec.fine_loss = pstate.fine_estimate->final_loss;
        }

        const Vec2 before = agent.bev;
        const int collisions_before = agent.collision_count;
        agent = sim::step(scene, agent, action);
        res.path_length += (agent.bev - before).norm();
        if (action == sim::Action::MoveForward) {
            forward_blocked_streak =
                agent.collision_count > collisions_before ? forward_blocked_streak + 1 : 0;
        } else {
            forward_blocked_streak = 0;
        }

        rec.action = action;
        rec.x = agent.bev.x();
        rec.y = agent.bev.y();
        rec.yaw_deg = agent.yaw_deg;
        res.trajectory.push_back(rec);
        res.steps = agent.steps_taken;
        if (agent.stopped) break;
    }

    res.final_error = (agent.bev - goal_bev).norm();
    res.success = agent.stopped && res.final_error < cfg.success_radius;
    if (res.success) {
        const double l = ep.geodesic_m;
        res.spl = l > 1e-9 ? l / std::max(res.path_length, l) : 1.0;
        res.outcome = Outcome::Success;
    } else if (entered_reach) {
        res.outcome = agent.stopped ? Outcome::WrongRoom : Outcome::Timeout;
    } else if (fine_attempts >= 3 && fine_successes == 0) {
        res.outcome = Outcome::FineDivergence;
    } else {
        res.outcome = Outcome::NeverDetected;
    }

    // stop-step dumps
    if (cfg.write_artifacts) {
        const auto stop_view = sim::render(scene, agent.pose(), goal_intr);
        res.stop_rgb = stop_view.rgb;
        res.goal_rgb = goal_view.rgb;
        res.occ_w = occ.width;
        res.occ_h = occ.height;
        res.occupancy_dump.resize(occ.states.size());
        for (size_t i = 0; i < occ.states.size(); ++i)
            res.occupancy_dump[i] = occ.states[i] == grid::Cell::Free       ? 1.0
                                    : occ.states[i] == grid::Cell::Occupied ? 0.5
                                                                            : 0.0;
        if (coarse_res) {
            res.sa_w = coarse_res->bev.nx;
            res.sa_h = coarse_res->bev.ny;
            res.sa_dump = coarse_res->bev.scores;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct CellMetrics {
    sim::Difficulty difficulty = sim::Difficulty::Easy;
    sim::FovBand fov_band = sim::FovBand::Narrow;
    int episodes = 0;
    double sr = 0, spl = 0, mean_steps = 0, mean_err = 0;
};

struct MetricsReport {
    std::vector<CellMetrics> cells;
    double overall_sr = 0, overall_spl = 0, overall_steps = 0, overall_err = 0;
    int total_episodes = 0;
    std::map<std::string, int> failures;

    std::string csv() const {
        std::string out = "difficulty,fov,sr,spl,mean_steps,mean_err_m\n";
        char buf[256];
        for (const auto& c : cells) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f\n",
                          sim::difficulty_name(c.difficulty), sim::fov_band_name(c.fov_band),
                          c.sr, c.spl, c.mean_steps, c.mean_err);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "overall,all,%.6f,%.6f,%.6f,%.6f\n", overall_sr,
                      overall_spl, overall_steps, overall_err);
        out += buf;
        return out;
    }

    json to_json() const {
        json j;
        j["cells"] = json::array();
        for (const auto& c : cells)
            j["cells"].push_back({{"difficulty", sim::difficulty_name(c.difficulty)},
                                  {"fov", sim::fov_band_name(c.fov_band)},
                                  {"episodes", c.episodes},
                                  {"sr", c.sr},
                                  {"spl", c.spl},
                                  {"mean_steps", c.mean_steps},
                                  {"mean_err_m", c.mean_err}});
        j["overall"] = {{"sr", overall_sr},
                        {"spl", overall_spl},
                        {"mean_steps", overall_steps},
                        {"mean_err_m", overall_err},
                        {"episodes", total_episodes}};
        j["failures"] = failures;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Trajectory logs
// ---------------------------------------------------------------------------

inline std::string trajectory_log(const sim::Episode& ep, const EpisodeResult& res) {
    std::ostringstream os;
    os << "# gsnav-trajectory v1\n";
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "# scene_seed=%llu rooms=%d episode=%d difficulty=%s fov=%s\n",
                  static_cast<unsigned long long>(ep.scene_seed), ep.room_count, ep.index,
                  sim::difficulty_name(ep.difficulty), sim::fov_band_name(ep.fov_band));
    os << buf;
    std::snprintf(buf, sizeof(buf), "# start %.17g %.17g %.17g\n", ep.start_bev.x(),
                  ep.start_bev.y(), ep.start_yaw_deg);
    os << buf;
    std::snprintf(buf, sizeof(buf), "# goal %.17g %.17g %.17g %.17g %.17g %.17g\n", ep.goal.x,
                  ep.goal.y, ep.goal.z, ep.goal.theta_deg, ep.goal.phi_deg, ep.goal_fov_deg);
    os << buf;
    for (const auto& r : res.trajectory) {
        std::snprintf(buf, sizeof(buf),
                      "%d %s %.17g %.17g %.17g %s %.17g %.17g %.6f %d %.6f\n", r.step,
                      sim::action_name(r.action), r.x, r.y, r.yaw_deg,
                      policy::phase_name(r.phase), r.wx, r.wy, r.sa_max, r.stopper,
                      r.fine_loss);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "# result success=%d err=%.6f steps=%d path=%.6f geodesic=%.6f outcome=%s\n",
                  res.success ? 1 : 0, res.final_error, res.steps, res.path_length,
                  ep.geodesic_m, outcome_name(res.outcome));
    os << buf;
    return os.str();
}

struct ReplayResult {
    bool ok = false;
    double max_position_error = 0.0;
    int steps = 0;
    std::string message;
};

// Re-simulates the logged action sequence and compares the recorded poses.
inline ReplayResult replay_trajectory(const std::string& log_text) {
    ReplayResult out;
    std::istringstream is(log_text);
    std::string line;
    std::uint64_t scene_seed = 0;
    int rooms = 0;
    Vec2 start = Vec2::Zero();
    double start_yaw = 0;
    bool have_scene = false, have_start = false;

    struct Row {
        sim::Action action;
        double x, y, yaw;
    };
    std::vector<Row> rows;

    while (std::getline(is, line)) {
        if (line.rfind("# scene_seed=", 0) == 0) {
            unsigned long long s = 0;
            std::sscanf(line.c_str(), "# scene_seed=%llu rooms=%d", &s, &rooms);
            scene_seed = s;
            have_scene = true;
        } else if (line.rfind("# start", 0) == 0) {
            std::sscanf(line.c_str(), "# start %lg %lg %lg", &start.x(), &start.y(),
                        &start_yaw);
            have_start = true;
        } else if (!line.empty() && line[0] != '#') {
            std::istringstream ls(line);
            int step;
            std::string act;
            Row r{};
            ls >> step >> act >> r.x >> r.y >> r.yaw;
            const auto a = sim::action_from_name(act);
            if (!a) {
                out.message = "unknown action in log: " + act;
                return out;
            }
            r.action = *a;
            rows.push_back(r);
        }
    }
    if (!have_scene || !have_start) {
        out.message = "missing scene/start header";
        return out;
    }

    const auto scene = sim::generate_scene(scene_seed, rooms);
    sim::AgentState agent;
    agent.bev = start;
    agent.yaw_deg = start_yaw;
    for (const auto& r : rows) {
        agent = sim::step(scene, agent, r.action);
        const double err = std::max(
            {std::abs(agent.bev.x() - r.x), std::abs(agent.bev.y() - r.y),
             std::abs(agent.yaw_deg - r.yaw)});
        out.max_position_error = std::max(out.max_position_error, err);
        ++out.steps;
    }
    out.ok = out.max_position_error < 1e-9;
    if (!out.ok) out.message = "pose mismatch during replay";
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark driver
// ---------------------------------------------------------------------------

struct RunResult {
    MetricsReport report;
    std::vector<EpisodeResult> episodes;
};

inline std::vector<sim::Episode> build_episode_set(
    const RunConfig& cfg, const std::vector<sim::Scene>& scenes) {
    std::vector<sim::Episode> eps;
    int cell_idx = 0, global_idx = 0;
    for (const auto d : cfg.difficulties)
        for (const auto f : cfg.fov_bands) {
            for (int i = 0; i < cfg.episodes_per_cell; ++i) {
                const auto& scene = scenes[i % scenes.size()];
                sim::Episode ep;
                bool ok = false;
                for (std::uint64_t bump = 0; bump < 64 && !ok; ++bump) {
                    const auto seed = detail::mix_seed(
                        cfg.rng_seed, (static_cast<std::uint64_t>(cell_idx) << 32) +
                                          static_cast<std::uint64_t>(i) * 131 + bump);
                    auto r = sim::sample_episode(scene, d, f, seed, cfg.obs_width,
                                                 cfg.obs_height);
                    if (std::holds_alternative<sim::Episode>(r)) {
                        ep = std::get<sim::Episode>(r);
                        ok = true;
                    }
                }
                if (!ok)
                    throw std::runtime_error(
                        "episode sampling failed; scene too constrained for band");
                ep.index = global_idx++;
                eps.push_back(ep);
            }
            ++cell_idx;
        }
    return eps;
}

inline MetricsReport reduce_metrics(const RunConfig& cfg,
                                    const std::vector<EpisodeResult>& results) {
    MetricsReport rep;
    for (const auto d : cfg.difficulties)
        for (const auto f : cfg.fov_bands) {
            CellMetrics cm;
            cm.difficulty = d;
            cm.fov_band = f;
            for (const auto& r : results) {
                if (r.episode.difficulty != d || r.episode.fov_band != f) continue;
                cm.episodes += 1;
                cm.sr += r.success ? 1.0 : 0.0;
                cm.spl += r.spl;
                cm.mean_steps += r.steps;
                cm.mean_err += r.final_error;
            }
            if (cm.episodes > 0) {
                cm.sr /= cm.episodes;
                cm.spl /= cm.episodes;
                cm.mean_steps /= cm.episodes;
                cm.mean_err /= cm.episodes;
            }
            rep.cells.push_back(cm);
        }
    for (const auto& r : results) {
        rep.total_episodes += 1;
        rep.overall_sr += r.success ? 1.0 : 0.0;
        rep.overall_spl += r.spl;
        rep.overall_steps += r.steps;
        rep.overall_err += r.final_error;
        if (!r.success) rep.failures[outcome_name(r.outcome)] += 1;
    }
    if (rep.total_episodes > 0) {
        rep.overall_sr /= rep.total_episodes;
        rep.overall_spl /= rep.total_episodes;
        rep.overall_steps /= rep.total_episodes;
        rep.overall_err /= rep.total_episodes;
    }
    return rep;
}

inline RunResult run_benchmark(const RunConfig& cfg,
                               const std::function<void(int, int)>& progress = {}) {
    namespace fs = std::filesystem;
    if (cfg.write_artifacts) {
        if (cfg.out_dir.empty())
            throw std::runtime_error("artifact export requested without an output directory");
        fs::create_directories(cfg.out_dir);
        std::ofstream probe(fs::path(cfg.out_dir) / ".write_probe");
        if (!probe) throw std::runtime_error("output directory is not writable: " + cfg.out_dir);
        probe << "ok";
        probe.close();
        fs::remove(fs::path(cfg.out_dir) / ".write_probe");
    }

    std::vector<sim::Scene> scenes;
    scenes.reserve(cfg.scene_seeds.size());
    for (const auto s : cfg.scene_seeds) scenes.push_back(sim::generate_scene(s, cfg.rooms));
    const auto episodes = build_episode_set(cfg, scenes);

    std::map<std::uint64_t, const sim::Scene*> scene_by_seed;
    for (const auto& s : scenes) scene_by_seed[s.seed] = &s;

    RunResult run;
    run.episodes.resize(episodes.size());
    std::atomic<int> next{0}, done{0};
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < static_cast<int>(episodes.size());
             i = next.fetch_add(1)) {
            run.episodes[i] =
                run_episode(*scene_by_seed.at(episodes[i].scene_seed), episodes[i], cfg);
            const int d = done.fetch_add(1) + 1;
            if (progress) progress(d, static_cast<int>(episodes.size()));
        }
    };
    const int workers = std::max(1, cfg.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    run.report = reduce_metrics(cfg, run.episodes);
    return run;
}

inline void export_artifacts(const RunConfig& cfg, const RunResult& run) {
    namespace fs = std::filesystem;
    const fs::path root(cfg.out_dir);
    fs::create_directories(root);
    {
        std::ofstream os(root / "config.json");
        os << config_to_json(cfg).dump(1) << "\n";
    }
    {
        std::ofstream os(root / "metrics.csv");
        os << run.report.csv();
    }
    {
        std::ofstream os(root / "report.json");
        os << run.report.to_json().dump(1) << "\n";
    }
    for (const auto& r : run.episodes) {
        char name[64];
        std::snprintf(name, sizeof(name), "episode_%04d", r.episode.index);
        const fs::path dir = root / name;
        fs::create_directories(dir);
        {
            std::ofstream os(dir / "trajectory.log");
            os << trajectory_log(r.episode, r);
        }
        if (!r.stop_rgb.empty()) {
            imgio::write_ppm((dir / "stop_render.ppm").string(), r.episode.goal_width,
                             r.episode.goal_height, r.stop_rgb);
            imgio::write_ppm((dir / "goal.ppm").string(), r.episode.goal_width,
                             r.episode.goal_height, r.goal_rgb);
        }
        if (!r.occupancy_dump.empty())
            imgio::write_scaled_pgm((dir / "occupancy.pgm").string(), r.occ_w, r.occ_h,
                                    r.occupancy_dump);
        if (!r.sa_dump.empty()) {
            // stored x-major; transpose into row-major image layout
            std::vector<double> img(r.sa_dump.size());
            for (int x = 0; x < r.sa_w; ++x)
                for (int y = 0; y < r.sa_h; ++y)
                    img[static_cast<size_t>(y) * r.sa_w + x] =
                        r.sa_dump[static_cast<size_t>(x) * r.sa_h + y];
            imgio::write_scaled_pgm((dir / "activation_bev.pgm").string(), r.sa_w, r.sa_h,
                                    img);
        }
    }
}

}  // namespace gsnav::bench
