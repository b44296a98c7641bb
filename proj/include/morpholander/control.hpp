#pragma once

// Velocity -> attitude -> body-rate PID cascade feeding the motor mixer.

#include "morpholander/dynamics.hpp"

#include <array>

namespace morpho::control {

struct PidGains {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double output_limit = 1.0;
    double integrator_limit = 1.0;

    void validate(const char* name) const;
};

struct PidState {
    double integrator = 0.0;
    double previous_error = 0.0;
};

struct PidResult {
    double output = 0.0;
    PidState state;
};

// The integrator is clamped to +-integrator_limit before it contributes to the output.
PidResult pid_step(const PidGains& gains, const PidState& state, double error, double dt);

struct VelocityCommand {
    Vec3 velocity = Vec3::Zero();  // m/s, world frame
};

struct CascadeGains {
    PidGains velocity_xy{4.0, 3.0, 0.0, 4.0, 1.0};
    PidGains velocity_z{5.0, 4.0, 0.0, 5.0, 1.0};
    PidGains attitude_rp{9.0, 0.0, 0.0, 8.0, 1.0};
    PidGains attitude_yaw{3.0, 0.0, 0.0, 3.0, 1.0};
    PidGains rate_rp{70.0, 0.0, 0.0, 400.0, 1.0};
    PidGains rate_yaw{20.0, 0.0, 0.0, 50.0, 1.0};
    double max_tilt = deg2rad(20.0);  // rad
    double max_speed = 1.0;           // m/s, per axis

    void validate() const;
};

// Per-axis controller memory for one drone.
struct CascadeState {
    std::array<PidState, 3> velocity{};
    std::array<PidState, 3> attitude{};
    std::array<PidState, 3> rate{};
};

VelocityCommand clamp_command(const VelocityCommand& cmd, double max_speed);

// One 500 Hz control tick. Yaw is regulated to zero.
dynamics::MotorCommand cascade_step(const dynamics::RigidBodyState& drone,
                                    const VelocityCommand& cmd, const CascadeGains& gains,
                                    const dynamics::DroneParams& params, CascadeState& state,
                                    double dt);

}  // namespace morpho::control
