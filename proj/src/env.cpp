#include "morpholander/env.hpp"

#include <algorithm>
#include <cmath>

namespace morpho::env {

namespace {

constexpr double kHoldGain = 2.0;  // 1/s, scripted position hold during takeoff and relocation

double floor_height(const World& w, double x, double y) {
    return w.terrain.contains(x, y) ? w.terrain.height(x, y) : 0.0;
}

// Sum of discount^k for k >= 1: value of an absorbing state per unit reward.
double absorbing_weight(double discount) { return discount / (1.0 - discount); }

std::array<Vec3, gear::kLegCount> nominal_feet(const gear::PlatformConfig& cfg, double x, double y) {
    std::array<Vec3, gear::kLegCount> feet;
    for (int i = 0; i < gear::kLegCount; ++i) {
        feet[i] = gear::vertical_line_target(cfg.legs[i], 0) + Vec3(x, y, 0.0);
    }
    return feet;
}

void stabilize_at(World& w, double x, double y) {
    gear::StabilizeResult res;
    try {
        res = gear::stabilize(w.cfg.platform, w.terrain, x, y, 0.0, w.cfg.gear_max_ticks, w.rng);
        w.pose_solution = gear::solve_platform_pose(res.legs, w.terrain, w.cfg.platform, x, y, 0.0, &res.pose);
    } catch (const gear::NonConvergenceError& e) {
        throw EpisodeInvalid(std::string("platform did not stabilize: ") + e.what());
    } catch (const gear::UnstablePoseError& e) {
        throw EpisodeInvalid(std::string("platform pose unstable: ") + e.what());
    }
    w.platform.legs = res.legs;
    w.platform.pose = w.pose_solution.pose;
    w.platform.forces = w.pose_solution.forces;
    w.platform.contacts = w.pose_solution.contacts;
    w.stabilize_ticks = res.ticks;
}

void freeze(DroneSlot& d) {
    d.body.velocity.setZero();
    d.body.acceleration.setZero();
    d.body.body_rates.setZero();
}

void crash(DroneSlot& d, const char* reason) {
    d.outcome = Outcome::Crash;
    d.crash_reason = reason;
}

// Touchdown, deck impact, floor and bounds checks for one flying drone.
void check_events(World& w, DroneSlot& d) {
    const EnvConfig& c = w.cfg;
    const Vec3& p = d.body.position;
    if (std::abs(p.x()) > c.bounds_half_extent || std::abs(p.y()) > c.bounds_half_extent || p.z() > c.ceiling) {
        crash(d, "out of bounds");
        return;
    }
    const double foot_z = p.z() - c.rest_offset;
    if (w.task == rl::CurriculumStage::PositionSet) {
        const Vec3 deck_center = w.platform.pose.position;
        if ((p.head<2>() - deck_center.head<2>()).norm() <= c.platform.deck_radius) {
            const PadPose pad = pad_pose(w, d.pad);
            if (detect_touchdown(d.body, pad, c.rest_offset, c.touchdown)) {
                d.outcome = Outcome::Touchdown;
                d.touchdown = p;
                d.touchdown_pad = pad.center;
                d.shift_cm = landing_shift(p, pad.center);
                d.on_pad = d.shift_cm <= 100.0 * c.platform.pad_radius;
                freeze(d);
                return;
            }
            const double surface = pad.center.z() - (pad.normal.x() * (p.x() - pad.center.x()) +
                                                     pad.normal.y() * (p.y() - pad.center.y())) / pad.normal.z();
            if (foot_z - surface < 0.0) {
                crash(d, "hard impact on deck");
                return;
            }
        }
    }
    if (foot_z <= floor_height(w, p.x(), p.y())) crash(d, "floor contact");
}

void monitor_separation(World& w) {
    const double sep = (w.drones[0].body.position - w.drones[1].body.position).norm();
    if (sep < w.cfg.min_separation && w.min_separation_seen >= w.cfg.min_separation) ++w.near_misses;
    w.min_separation_seen = std::min(w.min_separation_seen, sep);
}

}  // namespace

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::EvenStatic: return "even-static";
        case Scenario::UnevenStatic: return "uneven-static";
        case Scenario::RelocateThenLand: return "relocate";
    }
    return "?";
}

Scenario parse_scenario(const std::string& name) {
    if (name == "even-static") return Scenario::EvenStatic;
    if (name == "uneven-static") return Scenario::UnevenStatic;
    if (name == "relocate") return Scenario::RelocateThenLand;
    throw ConfigError("unknown scenario '" + name + "' (expected even-static, uneven-static or relocate)");
}

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Takeoff: return "takeoff";
        case Phase::Relocate: return "relocate";
        case Phase::Landing: return "landing";
        case Phase::Finished: return "finished";
    }
    return "?";
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Flying: return "flying";
        case Outcome::Touchdown: return "touchdown";
        case Outcome::Crash: return "crash";
        case Outcome::Timeout: return "timeout";
    }
    return "?";
}

int EnvConfig::horizon_steps(rl::CurriculumStage stage) const {
    const double h = stage == rl::CurriculumStage::PositionSet ? horizon_set : horizon_hold;
    return static_cast<int>(std::lround(h / agent_period()));
}

void EnvConfig::validate() const {
    drone.validate();
    gains.validate();
    reward.validate();
    if (!(physics_dt > 0.0 && physics_dt <= dynamics::kMaxTimestep)) {
        throw ConfigError("env.physics_dt must lie in (0, 0.005]");
    }
    if (substeps < 1) throw ConfigError("env.substeps must be >= 1");
    if (!(spacing > 0.0 && start_distance > 0.0 && start_altitude > 0.0)) {
        throw ConfigError("env: spacing, start distance and altitude must be > 0");
    }
    if (!(start_jitter >= 0.0 && hold_offset >= 0.0)) throw ConfigError("env: jitter and hold offset must be >= 0");
    if (!(takeoff_speed > 0.0 && takeoff_duration > 0.0)) throw ConfigError("env: takeoff speed and duration must be > 0");
    if (!(rest_offset >= 0.0)) throw ConfigError("env.rest_offset must be >= 0");
    if (!(horizon_set > 0.0 && horizon_hold > 0.0)) throw ConfigError("env horizons must be > 0");
    if (!(crash_penalty >= 0.0)) throw ConfigError("env.crash_penalty must be >= 0");
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("env.discount must lie in (0, 1)");
    if (!(touchdown.max_gap > 0.0 && touchdown.max_descent > 0.0 && touchdown.max_horizontal > 0.0)) {
        throw ConfigError("touchdown limits must be > 0");
    }
    if (!(relocation.max_speed > 0.0 && relocation.max_speed <= 0.1 + 1e-12)) {
        throw ConfigError("relocation.max_speed must lie in (0, 0.1]");
    }
    if (!(relocation.acceleration > 0.0)) throw ConfigError("relocation.acceleration must be > 0");
    if (gear_max_ticks < 1) throw ConfigError("env.gear_max_ticks must be >= 1");
    if (!(terrain.max_step >= 0.0 && terrain.block_half_size > 0.0 && terrain.cell_size > 0.0)) {
        throw ConfigError("terrain parameters out of range");
    }
    // Everything the episode touches must stay on the heightfield.
    const double reach = std::hypot(start_distance + start_jitter, 0.5 * spacing + start_jitter);
    if (reach + 0.1 > terrain.half_extent) throw ConfigError("terrain.half_extent does not cover the drone start positions");
    const double rx = std::abs(relocation.dx);
    const double ry = std::abs(relocation.dy);
    const double leg_span = platform.legs[0].hip_mount.head<2>().norm() + platform.legs[0].stance_reach;
    if (std::max(rx, ry) + leg_span + terrain.block_half_size > terrain.half_extent) {
        throw ConfigError("relocation path leaves the terrain bounds");
    }
}

EnvConfig EnvConfig::prepared() const {
    validate();
    EnvConfig c = *this;
    c.platform.finalize();
    return c;
}

rl::PlatformState platform_state(const World& w) {
    rl::PlatformState s;
    s.body.position = w.platform.pose.position;
    s.body.velocity = w.platform_velocity;
    s.body.acceleration = w.platform_acceleration;
    for (int p = 0; p < 2; ++p) {
        s.pads[static_cast<std::size_t>(p)] = w.platform.pad_center_world(p);
    }
    return s;
}

PadPose pad_pose(const World& w, int pad) {
    PadPose p;
    p.center = w.platform.pad_center_world(pad);
    p.normal = w.platform.pose.rotation().col(2);
    return p;
}

rl::Observation observation(const World& w, int drone) {
    const DroneSlot& d = w.drones[static_cast<std::size_t>(drone)];
    rl::DroneState s;
    s.position = d.body.position;
    s.velocity = d.body.velocity;
    s.acceleration = d.body.acceleration;
    if (w.task == rl::CurriculumStage::PositionHold) return rl::observe(s, d.hold_target);
    return rl::observe(s, platform_state(w), d.pad);
}

bool detect_touchdown(const dynamics::RigidBodyState& drone, const PadPose& pad, double rest_offset,
                      const TouchdownLimits& limits) {
    const Vec3& p = drone.position;
    const double surface =
        pad.center.z() - (pad.normal.x() * (p.x() - pad.center.x()) + pad.normal.y() * (p.y() - pad.center.y())) /
                             pad.normal.z();
    const double gap = p.z() - rest_offset - surface;
    const double descent = -drone.velocity.z();
    const double horizontal = drone.velocity.head<2>().norm();
    return std::abs(gap) < limits.max_gap && descent < limits.max_descent && horizontal < limits.max_horizontal;
}

double landing_shift(const Vec3& touchdown, const Vec3& pad_center) {
    return 100.0 * std::hypot(touchdown.x() - pad_center.x(), touchdown.y() - pad_center.y());
}

double trapezoid_duration(double length, double vmax, double accel) {
    if (length <= 0.0) return 0.0;
    const double ramp = vmax * vmax / accel;  // distance spent accelerating plus braking
    if (length >= ramp) return length / vmax + vmax / accel;
    return 2.0 * std::sqrt(length / accel);
}

PathSample trapezoid_profile(double length, double vmax, double accel, double t) {
    PathSample s;
    const double total = trapezoid_duration(length, vmax, accel);
    if (length <= 0.0 || t >= total) {
        s.distance = std::max(length, 0.0);
        s.halted = true;
        return s;
    }
    const double peak = std::min(vmax, std::sqrt(length * accel));
    const double t_ramp = peak / accel;
    const double t_cruise = total - 2.0 * t_ramp;
    if (t < t_ramp) {
        s.speed = accel * t;
        s.distance = 0.5 * accel * t * t;
        s.acceleration = accel;
    } else if (t < t_ramp + t_cruise) {
        s.speed = peak;
        s.distance = 0.5 * peak * t_ramp + peak * (t - t_ramp);
    } else {
        const double tr = total - t;
        s.speed = accel * tr;
        s.distance = length - 0.5 * accel * tr * tr;
        s.acceleration = -accel;
    }
    return s;
}

void relocate_platform(World& w, double dt) {
    if (w.motion.halted) {
        w.platform_velocity.setZero();
        w.platform_acceleration.setZero();
        w.restabilize_hold = std::max(0.0, w.restabilize_hold - dt);
        return;
    }
    w.motion.elapsed += dt;
    const RelocationConfig& rc = w.cfg.relocation;
    const PathSample s = trapezoid_profile(w.motion.length, rc.max_speed, rc.acceleration, w.motion.elapsed);
    const Vec3 dir = (w.motion.end - w.motion.start) / w.motion.length;
    const Vec3 xy = w.motion.start + dir * s.distance;
    w.platform.pose.position.x() = xy.x();
    w.platform.pose.position.y() = xy.y();
    w.platform_velocity = dir * s.speed;
    w.platform_acceleration = dir * s.acceleration;
    if (s.halted) {
        w.motion.halted = true;
        w.platform_velocity.setZero();
        w.platform_acceleration.setZero();
        stabilize_at(w, w.motion.end.x(), w.motion.end.y());
        w.restabilize_hold = w.stabilize_ticks * gear::kGearTick;
    }
}

World reset(Scenario scenario, const EnvConfig& cfg, std::uint64_t seed, rl::CurriculumStage task) {
    World w;
    w.scenario = scenario;
    w.task = task;
    w.cfg = cfg.prepared();
    w.seed = seed;
    w.rng.seed(seed);
    const EnvConfig& c = w.cfg;

    const auto feet = nominal_feet(c.platform, 0.0, 0.0);
    if (scenario == Scenario::EvenStatic) {
        w.terrain = Terrain::flat(c.terrain.half_extent, c.terrain.cell_size);
        w.block_heights.fill(0.0);
    } else {
        w.terrain = make_foot_block_terrain(feet, c.terrain, w.rng, w.block_heights);
    }
    w.platform.config = c.platform;
    stabilize_at(w, 0.0, 0.0);

    w.motion.start = Vec3(0.0, 0.0, 0.0);
    w.motion.end = w.motion.start;
    if (scenario == Scenario::RelocateThenLand) {
        w.motion.end = Vec3(c.relocation.dx, c.relocation.dy, 0.0);
        w.motion.length = (w.motion.end - w.motion.start).norm();
        w.motion.halted = w.motion.length <= 0.0;
        if (!w.motion.halted) {
            std::uniform_real_distribution<double> h(0.0, c.terrain.max_step);
            for (const Vec3& f : nominal_feet(c.platform, w.motion.end.x(), w.motion.end.y())) {
                w.terrain.add_block(f.x(), f.y(), c.terrain.block_half_size, h(w.rng));
            }
        }
    }

    std::uniform_real_distribution<double> jitter(-c.start_jitter, c.start_jitter);
    std::uniform_real_distribution<double> offset(-c.hold_offset, c.hold_offset);
    for (int i = 0; i < kDrones; ++i) {
        DroneSlot& d = w.drones[static_cast<std::size_t>(i)];
        // Drone 0 starts on the left (+y) and lands on the right pad; crossed assignment.
        const double side = i == 0 ? 1.0 : -1.0;
        d.pad = i == 0 ? 1 : 0;
        const double x = -c.start_distance + (c.start_jitter > 0.0 ? jitter(w.rng) : 0.0);
        const double y = side * 0.5 * c.spacing + (c.start_jitter > 0.0 ? jitter(w.rng) : 0.0);
        d.body.position = Vec3(x, y, floor_height(w, x, y) + c.rest_offset);
        d.start = Vec3(x, y, c.start_altitude);
        d.hold_target.position = d.start;
        if (task == rl::CurriculumStage::PositionHold) {
            d.hold_target.position += Vec3(offset(w.rng), offset(w.rng), offset(w.rng));
        }
    }
    w.phase = Phase::Takeoff;
    monitor_separation(w);
    return w;
}

StepRecord env_step(World& w, const std::array<Vec3, kDrones>& actions) {
    if (w.phase == Phase::Finished) throw ConfigError("env_step called on a finished episode");
    const EnvConfig& c = w.cfg;
    StepRecord rec;
    rec.phase = w.phase;
    const bool landing = w.phase == Phase::Landing;

    for (int i = 0; i < kDrones; ++i) {
        DroneSlot& d = w.drones[static_cast<std::size_t>(i)];
        rec.active[static_cast<std::size_t>(i)] = landing && d.outcome == Outcome::Flying;
        if (landing) {
            require_finite(actions[static_cast<std::size_t>(i)], "env_step action");
            d.command = rl::clamp_action(actions[static_cast<std::size_t>(i)], c.gains.max_speed).velocity;
        }
    }

    const double dt = c.physics_dt;
    for (int s = 0; s < c.substeps; ++s) {
        for (DroneSlot& d : w.drones) {
            if (d.outcome != Outcome::Flying) continue;
            control::VelocityCommand cmd;
            if (landing) {
                cmd.velocity = d.command;
            } else {
                const Vec3 v = kHoldGain * (d.start - d.body.position);
                cmd.velocity = v.cwiseMax(-c.takeoff_speed).cwiseMin(c.takeoff_speed);
                d.command = cmd.velocity;
            }
            const auto motors = control::cascade_step(d.body, cmd, c.gains, c.drone, d.ctrl, dt);
            d.body = dynamics::step_dynamics(d.body, motors, c.drone, dt);
        }
        w.time += dt;
        if (w.phase == Phase::Relocate) relocate_platform(w, dt);
        if (landing) {
            if (c.gear_adaptive && w.task == rl::CurriculumStage::PositionSet) {
                w.gear_clock += dt;
                if (w.gear_clock >= gear::kGearTick - 1e-12) {
                    w.gear_clock -= gear::kGearTick;
                    if (gear::gear_tick(w.platform.legs, w.pose_solution, c.platform, w.rng)) {
                        try {
                            w.pose_solution = gear::solve_platform_pose(w.platform.legs, w.terrain, c.platform,
                                                                        w.platform.pose.position.x(),
                                                                        w.platform.pose.position.y(), 0.0,
                                                                        &w.platform.pose);
                        } catch (const gear::UnstablePoseError& e) {
                            throw EpisodeInvalid(std::string("platform lost stability while landing: ") + e.what());
                        }
                        w.platform.pose = w.pose_solution.pose;
                        w.platform.forces = w.pose_solution.forces;
                        w.platform.contacts = w.pose_solution.contacts;
                    }
                }
            }
            for (DroneSlot& d : w.drones) {
                if (d.outcome == Outcome::Flying) check_events(w, d);
            }
        }
        monitor_separation(w);
    }

    if (w.phase == Phase::Takeoff) {
        if (w.time >= c.takeoff_duration - 1e-9) {
            const bool moving = w.scenario == Scenario::RelocateThenLand && !w.motion.halted;
            w.phase = moving ? Phase::Relocate : Phase::Landing;
        }
    } else if (w.phase == Phase::Relocate) {
        if (w.motion.halted && w.restabilize_hold <= 0.0) w.phase = Phase::Landing;
    }

    const int horizon = c.horizon_steps(w.task);
    for (int i = 0; i < kDrones; ++i) {
        const auto k = static_cast<std::size_t>(i);
        DroneSlot& d = w.drones[k];
        rec.obs[k] = observation(w, i);
        if (!rec.active[k]) continue;
        ++d.steps;
        rl::Action u;
        u.velocity = d.command;
        double r = rl::reward(rec.obs[k], u, c.reward);
        if (d.outcome == Outcome::Touchdown) {
            // The drone rests on the deck from here on.
            rl::Observation rest = rec.obs[k];
            rest.segment<6>(3).setZero();
            r += rl::reward(rest, rl::Action{}, c.reward) * absorbing_weight(c.discount);
            rec.done[k] = rec.terminal[k] = true;
        } else if (d.outcome == Outcome::Crash) {
            r -= (rec.obs[k].head<3>().norm() + c.crash_penalty) * absorbing_weight(c.discount);
            rec.done[k] = rec.terminal[k] = true;
        } else if (d.steps >= horizon) {
            // A landing episode that runs out of time has failed; holding is open-ended.
            d.outcome = Outcome::Timeout;
            rec.done[k] = true;
            rec.terminal[k] = w.task == rl::CurriculumStage::PositionSet;
        }
        require_finite(r, "reward");
        require_finite(d.body.position, "drone position");
        rec.rewards[k] = r;
        d.rewards.push_back(r);
    }
    if (landing && std::none_of(w.drones.begin(), w.drones.end(),
                                [](const DroneSlot& d) { return d.outcome == Outcome::Flying; })) {
        w.phase = Phase::Finished;
    }
    return rec;
}

void run_until_landing(World& world) {
    run_until_landing(world, [](const StepRecord&) {});
}

}  // namespace morpho::env
