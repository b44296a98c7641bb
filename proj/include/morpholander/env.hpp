#pragma once

// Two-drone landing episodes on the legged platform: scripted takeoff,
// optional platform relocation, policy-driven landing, touchdown scoring.

#include "morpholander/control.hpp"
#include "morpholander/dynamics.hpp"
#include "morpholander/gear.hpp"
#include "morpholander/rl/signals.hpp"
#include "morpholander/terrain.hpp"

#include <array>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace morpho::env {

inline constexpr int kDrones = 2;

enum class Scenario { EvenStatic, UnevenStatic, RelocateThenLand };

const char* scenario_name(Scenario s);  // even-static, uneven-static, relocate
Scenario parse_scenario(const std::string& name);

struct TouchdownLimits {
    double max_gap = 0.01;         // m
    double max_descent = 0.1;      // m/s
    double max_horizontal = 0.1;   // m/s
};

struct RelocationConfig {
    double dx = 0.5;               // m, straight-line displacement of the platform
    double dy = 0.0;
    double max_speed = 0.1;        // m/s
    double acceleration = 0.1;     // m/s^2
};

struct EnvConfig {
    dynamics::DroneParams drone;
    control::CascadeGains gains;
    gear::PlatformConfig platform;
    FootBlockSpec terrain;
    RelocationConfig relocation;
    TouchdownLimits touchdown;
    rl::RewardWeights reward;
    rl::ObservationScale obs_scale;

    double physics_dt = 0.002;      // s
    int substeps = 50;              // physics steps per agent decision
    double spacing = 0.75;          // m between the two drones
    double start_distance = 1.5;    // m from the platform centre, along -x
    double start_altitude = 1.0;    // m above the floor after takeoff
    double start_jitter = 0.0;      // m, uniform horizontal start perturbation
    double takeoff_speed = 0.5;     // m/s
    double takeoff_duration = 3.0;  // s, ascent plus settle
    double rest_offset = 0.015;     // m, drone origin above its feet when resting
    double horizon_set = 15.0;      // s of landing phase
    double horizon_hold = 8.0;
    double hold_offset = 0.25;      // m, half-range of the position-hold target offset
    double crash_penalty = 1.0;     // per absorbing step, on top of the distance
    double discount = 0.99;         // values the absorbing touchdown and crash states
    double bounds_half_extent = 3.0;  // m, |x| and |y|
    double ceiling = 3.0;           // m
    double min_separation = 0.15;   // m, near-miss monitor
    int gear_max_ticks = 200;
    bool gear_adaptive = true;      // keep the gear loop running while drones land

    double agent_period() const { return physics_dt * substeps; }
    int horizon_steps(rl::CurriculumStage stage) const;
    void validate() const;  // finalizes nothing; see prepared()
    // Copy with the platform load model calibrated.
    EnvConfig prepared() const;
};

enum class Phase { Takeoff, Relocate, Landing, Finished };
const char* phase_name(Phase p);

enum class Outcome { Flying, Touchdown, Crash, Timeout };
const char* outcome_name(Outcome o);

struct DroneSlot {
    dynamics::RigidBodyState body;
    control::CascadeState ctrl;
    int pad = 0;
    Vec3 start = Vec3::Zero();      // hover point after takeoff
    rl::KinematicState hold_target;  // PositionHold target
    Vec3 command = Vec3::Zero();
    Outcome outcome = Outcome::Flying;
    std::string crash_reason;
    Vec3 touchdown = Vec3::Zero();
    Vec3 touchdown_pad = Vec3::Zero();  // assigned pad centre at the touchdown instant
    double shift_cm = 0.0;
    bool on_pad = false;
    int steps = 0;                  // landing-phase decisions taken
    std::vector<double> rewards;    // landing-phase rewards as logged
};

struct PadPose {
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

struct PlatformMotion {
    Vec3 start = Vec3::Zero();      // body xy start of the path
    Vec3 end = Vec3::Zero();
    double length = 0.0;
    double elapsed = 0.0;
    bool halted = true;
};

struct World {
    Scenario scenario = Scenario::EvenStatic;
    rl::CurriculumStage task = rl::CurriculumStage::PositionSet;
    EnvConfig cfg;
    std::uint64_t seed = 0;
    Terrain terrain = Terrain::flat(2.0, 0.05);
    std::array<double, gear::kLegCount> block_heights{};
    gear::Platform platform;
    gear::PoseSolution pose_solution;
    Vec3 platform_velocity = Vec3::Zero();
    Vec3 platform_acceleration = Vec3::Zero();
    PlatformMotion motion;
    double restabilize_hold = 0.0;  // s of hover left before landing clearance
    int stabilize_ticks = 0;
    Phase phase = Phase::Takeoff;
    double time = 0.0;
    double gear_clock = 0.0;
    std::array<DroneSlot, kDrones> drones;
    double min_separation_seen = 1e9;
    int near_misses = 0;
    std::mt19937_64 rng;
};

// Platform kinematics with the two pad centres as targets.
rl::PlatformState platform_state(const World& world);
PadPose pad_pose(const World& world, int pad);

struct StepRecord {
    Phase phase = Phase::Takeoff;   // phase the step ran in
    std::array<rl::Observation, kDrones> obs{};      // raw after the step
    std::array<double, kDrones> rewards{};
    std::array<bool, kDrones> active{};              // drone took a decision this step
    std::array<bool, kDrones> done{};                // ended during this step
    std::array<bool, kDrones> terminal{};            // no bootstrap: touchdown, crash, landing timeout
};

class EpisodeInvalid : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Builds the world: terrain from the seed, stabilized platform, drones on the
// floor. Throws EpisodeInvalid when the gear does not converge.
World reset(Scenario scenario, const EnvConfig& cfg, std::uint64_t seed,
            rl::CurriculumStage task = rl::CurriculumStage::PositionSet);

// Advances one agent period. During takeoff and relocation the actions are
// ignored and the drones hold position.
StepRecord env_step(World& world, const std::array<Vec3, kDrones>& actions);

// Runs takeoff (and relocation, if any) until the landing phase begins. The
// callback, if given, sees every pre-landing step.
template <typename Fn>
void run_until_landing(World& world, Fn&& on_step) {
    const std::array<Vec3, kDrones> zero{Vec3::Zero(), Vec3::Zero()};
    while (world.phase == Phase::Takeoff || world.phase == Phase::Relocate) {
        const StepRecord rec = env_step(world, zero);
        on_step(rec);
    }
}
void run_until_landing(World& world);

rl::Observation observation(const World& world, int drone);

bool detect_touchdown(const dynamics::RigidBodyState& drone, const PadPose& pad,
                      double rest_offset, const TouchdownLimits& limits);

// Horizontal distance between touchdown and pad centre, in cm.
double landing_shift(const Vec3& touchdown, const Vec3& pad_center);

// Trapezoidal-speed straight-line path. Returns distance covered, speed and
// signed acceleration along the path at time t.
struct PathSample {
    double distance = 0.0;
    double speed = 0.0;
    double acceleration = 0.0;
    bool halted = false;
};
PathSample trapezoid_profile(double length, double max_speed, double acceleration, double t);
double trapezoid_duration(double length, double max_speed, double acceleration);

// Advances the platform along its relocation path by dt.
void relocate_platform(World& world, double dt);

}  // namespace morpho::env
