#include "morpholander/control.hpp"

#include <algorithm>

namespace morpho::control {

void PidGains::validate(const char* name) const {
    if (!(kp >= 0.0 && ki >= 0.0 && kd >= 0.0)) {
        throw ConfigError(std::string("pid gains ") + name + ": gains must be >= 0");
    }
    if (!(output_limit > 0.0 && integrator_limit > 0.0)) {
        throw ConfigError(std::string("pid gains ") + name + ": limits must be > 0");
    }
}

PidResult pid_step(const PidGains& gains, const PidState& state, double error, double dt) {
    require_finite(error, "pid_step: error");
    if (!(dt > 0.0)) throw ConfigError("pid_step: dt must be > 0");

    PidResult r;
    r.state.integrator = std::clamp(state.integrator + error * dt, -gains.integrator_limit,
                                    gains.integrator_limit);
    r.state.previous_error = error;
    const double derivative = (error - state.previous_error) / dt;
    const double raw = gains.kp * error + gains.ki * r.state.integrator + gains.kd * derivative;
    r.output = std::clamp(raw, -gains.output_limit, gains.output_limit);
    return r;
}

void CascadeGains::validate() const {
    velocity_xy.validate("velocity_xy");
    velocity_z.validate("velocity_z");
    attitude_rp.validate("attitude_rp");
    attitude_yaw.validate("attitude_yaw");
    rate_rp.validate("rate_rp");
    rate_yaw.validate("rate_yaw");
    if (!(max_tilt > 0.0 && max_tilt < deg2rad(60.0))) {
        throw ConfigError("cascade: max tilt must lie in (0, 60) deg");
    }
    if (!(max_speed > 0.0)) throw ConfigError("cascade: max speed must be > 0");
}

VelocityCommand clamp_command(const VelocityCommand& cmd, double max_speed) {
    VelocityCommand out;
    for (int i = 0; i < 3; ++i) out.velocity[i] = std::clamp(cmd.velocity[i], -max_speed, max_speed);
    return out;
}

namespace {

double run_pid(const PidGains& gains, PidState& state, double error, double dt) {
    const PidResult r = pid_step(gains, state, error, dt);
    state = r.state;
    return r.output;
}

// Desired attitude with the body z axis along `thrust_dir` and zero heading.
Attitude attitude_from_thrust(const Vec3& thrust_dir) {
    const Vec3 b3 = thrust_dir.normalized();
    const Vec3 b2 = b3.cross(Vec3::UnitX()).normalized();
    const Vec3 b1 = b2.cross(b3);
    Eigen::Matrix3d rot;
    rot.col(0) = b1;
    rot.col(1) = b2;
    rot.col(2) = b3;
    return Attitude(rot);
}

}  // namespace

dynamics::MotorCommand cascade_step(const dynamics::RigidBodyState& drone,
                                    const VelocityCommand& cmd, const CascadeGains& gains,
                                    const dynamics::DroneParams& params, CascadeState& state,
                                    double dt) {
    require_finite(cmd.velocity, "cascade_step: command");
    require_finite(drone.velocity, "cascade_step: velocity");
    require_finite(drone.body_rates, "cascade_step: body rates");
    if (!drone.attitude.coeffs().allFinite()) {
        throw NonFiniteError("non-finite vector in cascade_step: attitude");
    }

    const Vec3 setpoint = clamp_command(cmd, gains.max_speed).velocity;
    const Vec3 vel_err = setpoint - drone.velocity;

    // Velocity loop: desired world acceleration.
    Vec3 accel_des;
    accel_des.x() = run_pid(gains.velocity_xy, state.velocity[0], vel_err.x(), dt);
    accel_des.y() = run_pid(gains.velocity_xy, state.velocity[1], vel_err.y(), dt);
    accel_des.z() = run_pid(gains.velocity_z, state.velocity[2], vel_err.z(), dt);

    Vec3 thrust_vec = params.mass * (accel_des + Vec3(0.0, 0.0, params.gravity));
    thrust_vec.z() = std::max(thrust_vec.z(), 0.1 * params.mass * params.gravity);
    const double max_horizontal = thrust_vec.z() * std::tan(gains.max_tilt);
    const double horizontal = thrust_vec.head<2>().norm();
    if (horizontal > max_horizontal) thrust_vec.head<2>() *= max_horizontal / horizontal;

    const Attitude q_des = attitude_from_thrust(thrust_vec);
    const Eigen::Matrix3d rot = drone.attitude.toRotationMatrix();
    const double collective = std::max(0.0, thrust_vec.dot(rot.col(2)));

    // Attitude loop on the quaternion error, expressed in the body frame.
    Attitude q_err = drone.attitude.conjugate() * q_des;
    if (q_err.w() < 0.0) q_err.coeffs() *= -1.0;
    const Vec3 att_err = 2.0 * q_err.vec();
    Vec3 rate_sp;
    rate_sp.x() = run_pid(gains.attitude_rp, state.attitude[0], att_err.x(), dt);
    rate_sp.y() = run_pid(gains.attitude_rp, state.attitude[1], att_err.y(), dt);
    rate_sp.z() = run_pid(gains.attitude_yaw, state.attitude[2], att_err.z(), dt);

    // Rate loop: desired angular acceleration, mapped through the inertia.
    const Vec3 rate_err = rate_sp - drone.body_rates;
    Vec3 ang_accel;
    ang_accel.x() = run_pid(gains.rate_rp, state.rate[0], rate_err.x(), dt);
    ang_accel.y() = run_pid(gains.rate_rp, state.rate[1], rate_err.y(), dt);
    ang_accel.z() = run_pid(gains.rate_yaw, state.rate[2], rate_err.z(), dt);
    const Vec3 torque = params.inertia.cwiseProduct(ang_accel);

    return dynamics::motor_mix(collective, torque, params);
}

}  // namespace morpho::control
