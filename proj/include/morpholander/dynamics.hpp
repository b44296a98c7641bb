#pragma once

// Fixed-timestep rigid-body model of an X-configuration micro-quadrotor.

#include "morpholander/common.hpp"

#include <array>

namespace morpho::dynamics {

inline constexpr double kMaxTimestep = 0.005;

struct DroneParams {
    double mass = 0.03;                          // kg
    Vec3 inertia{1.4e-5, 1.4e-5, 2.2e-5};        // kg m^2, body-frame diagonal
    double arm_length = 0.046;                   // m, motor offset from the roll and pitch axes
    double max_motor_thrust = 0.15;              // N per motor
    double yaw_torque_coeff = 0.006;             // N m of reaction torque per N of thrust
    double linear_drag = 0.004;                  // N s / m
    double gravity = kGravity;                   // m / s^2

    double hover_thrust() const { return mass * gravity; }

    // Throws ConfigError when the parameters cannot describe a flyable vehicle.
    void validate() const;
};

struct RigidBodyState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    // Net acceleration (gravity included) evaluated at the step that produced this state.
    Vec3 acceleration = Vec3::Zero();
    Attitude attitude = Attitude::Identity();
    Vec3 body_rates = Vec3::Zero();
};

// Motor order: 0 front-right, 1 rear-right, 2 rear-left, 3 front-left.
// Front is +x, left is +y. Motors 0 and 2 spin so their reaction torque is -z.
struct MotorCommand {
    std::array<double, 4> thrust{0.0, 0.0, 0.0, 0.0};
    bool saturated = false;

    double total() const { return thrust[0] + thrust[1] + thrust[2] + thrust[3]; }
};

// Body-frame torque produced by a set of motor thrusts.
Vec3 motor_torques(const MotorCommand& cmd, const DroneParams& params);

// Advances one step: velocity first, then position from the mean of the old and
// new velocity; body rates first, then the attitude from the new rates.
RigidBodyState step_dynamics(const RigidBodyState& state, const MotorCommand& cmd,
                             const DroneParams& params, double dt);

// Splits a collective thrust and body torque request over the four motors.
// When a motor would leave [0, max], the torque part is scaled down so the collective
// is preserved, and the result is flagged as saturated.
MotorCommand motor_mix(double total_thrust, const Vec3& body_torques, const DroneParams& params);

}  // namespace morpho::dynamics
