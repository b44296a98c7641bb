#pragma once

// Adaptive landing gear: vertical-line leg IK, synthetic servo load readings,
// the load filter and lift-percent state machine, and the quasi-static pose
// solvers the stabilization loop runs against.

#include "morpholander/common.hpp"
#include "morpholander/terrain.hpp"

#include <array>
#include <random>

namespace morpho::gear {

inline constexpr int kLegCount = 4;
inline constexpr int kFilterWindow = 3;      // 0.15 s of samples at 0.05 s
inline constexpr double kGearTick = 0.05;    // s
inline constexpr double kRaiseThreshold = 5.0;  // % stall, lower edge of the raise band

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnstablePoseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LegGeometry {
    Vec3 hip_mount = Vec3::Zero();  // body frame, m
    double shoulder_yaw = 0.0;      // rad, direction the leg points in the body xy plane
    double coxa = 0.06;             // m
    double femur = 0.12;            // m
    double tibia = 0.12;            // m
    double stance_reach = 0.16;     // m, horizontal hip-to-foot distance
    double stance_depth = 0.17;     // m, foot depth below the hip with the limb fully lowered
    double max_lift = 0.10;         // m of vertical travel at 100 %

    // Throws GeometryError if the whole vertical stroke is not reachable.
    void validate() const;

    // Horizontal distance from the shoulder pitch joint to the foot.
    double shoulder_moment_arm() const { return stance_reach - coxa; }
};

struct JointAngles {
    double coxa = 0.0;   // yaw about the hip z axis, relative to shoulder_yaw
    double femur = 0.0;  // pitch, positive lifts the knee
    double knee = 0.0;   // pitch of the tibia relative to the femur
};

// Square hip layout with legs pointing diagonally outward.
std::array<LegGeometry, kLegCount> default_legs(double hip_half_span = 0.15);

Vec3 forward_kinematics(const LegGeometry& geom, const JointAngles& q);

// Body-frame foot target for a lift percent: nominal XY, raised by lift/100 * max_lift.
Vec3 vertical_line_target(const LegGeometry& geom, int lift_percent);

JointAngles ik_vertical(const LegGeometry& geom, int lift_percent);

enum class LegMotion { Static, Raising, Lowering, Airborne };

// Maps contact force to a servo load reading in % of stall torque.
struct LoadModel {
    double baseline = 4.0;           // % at the nominal (level) weight share
    double noise_sigma = 0.5;        // %
    double airborne_max = 4.0;       // airborne readings ~ U[0, airborne_max)
    double overload_ratio = 3.75;    // force / nominal share at which the limb counts as overloaded
    double overload_min = 15.0;      // overloaded readings are confined to [overload_min, overload_max]
    double overload_max = 20.0;
    double motion_min = 20.0;        // |offset| range while the limb is driven
    double motion_max = 50.0;
    double contact_epsilon = 1e-9;   // N; below this the foot counts as airborne
    double nominal_force = 0.0;      // N, weight share per leg on level ground
    double stall_torque = 0.0;       // N m, set so the nominal share reads `baseline`

    void calibrate(double nominal_share, const LegGeometry& geom);
};

double estimate_load(double contact_force, LegMotion motion, const LegGeometry& geom,
                     const LoadModel& model, std::mt19937_64& rng);

struct LegState {
    int lift = 0;                 // percent, 0..100
    JointAngles joints;
    double filtered_load = 0.0;   // % stall
    std::array<double, kFilterWindow> samples{};
    int sample_count = 0;
    int next_slot = 0;
};

// Pushes one 0.05 s sample and returns the mean over the buffered window.
double filter_step(LegState& leg, double sample);

// One step of the lift state machine.
int gear_update(int lift_percent, double filtered_load);

struct PlatformPose {
    Vec3 position = Vec3::Zero();  // body origin (hip plane centre), world frame
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;

    Eigen::Matrix3d rotation() const;
    // Angle between body z and world z.
    double tilt() const;
};

struct PlatformConfig {
    double body_mass = 2.5;                        // kg
    std::array<LegGeometry, kLegCount> legs = default_legs();
    Vec3 com_offset{0.0, 0.0, 0.05};              // body frame
    double leg_stiffness = 300.0;                  // N/m, vertical compliance per foot
    LoadModel load;
    int settle_ticks = 40;                         // weight transfer from thrust to legs
    int stable_ticks = 10;                         // unchanged ticks that count as converged
    double max_tilt = deg2rad(30.0);
    std::array<Vec3, 2> pad_centers{Vec3(0.0, 0.12, 0.03), Vec3(0.0, -0.12, 0.03)};
    double pad_radius = 0.10;                      // m
    double deck_radius = 0.25;                     // m, top surface that can catch a drone

    double weight() const { return body_mass * kGravity; }
    // Validates and calibrates the load model against the nominal share.
    void finalize();
};

struct PoseSolution {
    PlatformPose pose;
    std::array<double, kLegCount> forces{};        // N, vertical contact forces
    std::array<Vec3, kLegCount> feet{};            // world foot positions
    int contacts = 0;
};

std::array<LegState, kLegCount> initial_legs(const PlatformConfig& cfg);

// Free-standing quasi-static pose: body z, roll and pitch such that vertical
// spring contact forces balance the weight and its moments. Throws
// UnstablePoseError with fewer than three contacts or excessive tilt.
PoseSolution solve_platform_pose(const std::array<LegState, kLegCount>& legs,
                                 const Terrain& terrain, const PlatformConfig& cfg,
                                 double x, double y, double yaw,
                                 const PlatformPose* initial_guess = nullptr);

// Level body held by the leader's rotors while `leg_load` N of the weight rests
// on the legs; the remainder and all moments come from thrust.
PoseSolution solve_supported_pose(const std::array<LegState, kLegCount>& legs,
                                  const Terrain& terrain, const PlatformConfig& cfg,
                                  double x, double y, double yaw, double leg_load);

struct Platform {
    PlatformConfig config;
    std::array<LegState, kLegCount> legs;
    PlatformPose pose;
    std::array<double, kLegCount> forces{};
    int contacts = 0;

    Vec3 pad_center_world(int pad) const;
};

struct StabilizeResult {
    PlatformPose pose;
    std::array<LegState, kLegCount> legs;
    std::array<double, kLegCount> forces{};
    int ticks = 0;
};

class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, PlatformPose last_pose, int ticks)
        : std::runtime_error(what), last_pose_(last_pose), ticks_(ticks) {}
    const PlatformPose& last_pose() const { return last_pose_; }
    int ticks() const { return ticks_; }

private:
    PlatformPose last_pose_;
    int ticks_;
};

// One gear tick: sample loads for the given pose solution, filter, update lift
// percents and re-solve the joints. Returns true if any lift changed.
bool gear_tick(std::array<LegState, kLegCount>& legs, const PoseSolution& pose,
               const PlatformConfig& cfg, std::mt19937_64& rng);

// Runs the load-feedback loop from all limbs lowered until the lift percents
// stay unchanged for `stable_ticks` with the full weight on four feet and no
// filtered load at or above the raise threshold. The body is held level while
// its weight moves onto the legs over `settle_ticks`; the reported pose is the
// free-standing one after that. Throws NonConvergenceError otherwise.
StabilizeResult stabilize(const PlatformConfig& cfg, const Terrain& terrain, double x, double y,
                          double yaw, int max_ticks, std::mt19937_64& rng);

}  // namespace morpho::gear
