#include "morpholander/dynamics.hpp"

#include <algorithm>
#include <sstream>

namespace morpho::dynamics {

namespace {

// Per-motor sign patterns for roll, pitch and yaw torque.
constexpr std::array<double, 4> kRollSign{-1.0, -1.0, 1.0, 1.0};
constexpr std::array<double, 4> kPitchSign{-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kYawSign{-1.0, 1.0, -1.0, 1.0};

void check_state(const RigidBodyState& s) {
    require_finite(s.position, "step_dynamics: position");
    require_finite(s.velocity, "step_dynamics: velocity");
    require_finite(s.body_rates, "step_dynamics: body rates");
    if (!s.attitude.coeffs().allFinite()) {
        throw NonFiniteError("non-finite vector in step_dynamics: attitude");
    }
}

}  // namespace

void DroneParams::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("drone params: " + msg); };
    if (!(mass > 0.0)) fail("mass must be > 0");
    if (!(inertia.minCoeff() > 0.0)) fail("inertia components must be > 0");
    if (!(arm_length > 0.0)) fail("arm length must be > 0");
    if (!(max_motor_thrust > 0.0)) fail("max motor thrust must be > 0");
    if (!(yaw_torque_coeff > 0.0)) fail("yaw torque coefficient must be > 0");
    if (!(linear_drag >= 0.0)) fail("linear drag must be >= 0");
    if (!(gravity > 0.0)) fail("gravity must be > 0");
    if (!(4.0 * max_motor_thrust > mass * gravity)) {
        std::ostringstream os;
        os << "hover infeasible: 4 x " << max_motor_thrust << " N <= " << mass * gravity << " N";
        fail(os.str());
    }
}

Vec3 motor_torques(const MotorCommand& cmd, const DroneParams& params) {
    Vec3 tau = Vec3::Zero();
    for (std::size_t i = 0; i < 4; ++i) {
        tau.x() += kRollSign[i] * params.arm_length * cmd.thrust[i];
        tau.y() += kPitchSign[i] * params.arm_length * cmd.thrust[i];
        tau.z() += kYawSign[i] * params.yaw_torque_coeff * cmd.thrust[i];
    }
    return tau;
}

RigidBodyState step_dynamics(const RigidBodyState& state, const MotorCommand& cmd,
                             const DroneParams& params, double dt) {
    if (!(dt > 0.0) || dt > kMaxTimestep) {
        throw ConfigError("step_dynamics: dt must lie in (0, 0.005] s");
    }
    check_state(state);
    for (double t : cmd.thrust) require_finite(t, "step_dynamics: motor thrust");

    MotorCommand clamped = cmd;
    for (double& t : clamped.thrust) t = std::clamp(t, 0.0, params.max_motor_thrust);

    const Eigen::Matrix3d rot = state.attitude.toRotationMatrix();
    const Vec3 thrust_world = rot.col(2) * clamped.total();
    const Vec3 force = thrust_world - params.linear_drag * state.velocity -
                       Vec3(0.0, 0.0, params.mass * params.gravity);
    const Vec3 accel = force / params.mass;

    RigidBodyState next;
    next.acceleration = accel;
    next.velocity = state.velocity + accel * dt;
    next.position = state.position + 0.5 * (state.velocity + next.velocity) * dt;

    const Vec3 tau = motor_torques(clamped, params);
    const Vec3& inertia = params.inertia;
    const Vec3& w = state.body_rates;
    const Vec3 gyro = w.cross(inertia.cwiseProduct(w));
    const Vec3 ang_accel = (tau - gyro).cwiseQuotient(inertia);
    next.body_rates = w + ang_accel * dt;

    const Vec3 half_rot = 0.5 * next.body_rates * dt;
    const double angle = half_rot.norm();
    Attitude dq;
    if (angle > 1e-12) {
        const Vec3 axis = half_rot / angle;
        dq = Attitude(std::cos(angle), axis.x() * std::sin(angle), axis.y() * std::sin(angle),
                      axis.z() * std::sin(angle));
    } else {
        dq = Attitude(1.0, half_rot.x(), half_rot.y(), half_rot.z());
    }
    next.attitude = (state.attitude * dq).normalized();

    if (!next.position.allFinite() || !next.velocity.allFinite() ||
        !next.body_rates.allFinite() || !next.attitude.coeffs().allFinite()) {
        throw NonFiniteError("step_dynamics produced a non-finite state");
    }
    return next;
}

MotorCommand motor_mix(double total_thrust, const Vec3& body_torques, const DroneParams& params) {
    require_finite(total_thrust, "motor_mix: total thrust");
    require_finite(body_torques, "motor_mix: body torques");

    MotorCommand out;
    const double max_total = 4.0 * params.max_motor_thrust;
    const double collective = std::clamp(total_thrust, 0.0, max_total);
    out.saturated = collective != total_thrust;

    const double base = collective / 4.0;
    std::array<double, 4> diff{};
    for (std::size_t i = 0; i < 4; ++i) {
        diff[i] = (kRollSign[i] * body_torques.x() / params.arm_length +
                   kPitchSign[i] * body_torques.y() / params.arm_length +
                   kYawSign[i] * body_torques.z() / params.yaw_torque_coeff) /
                  4.0;
    }

    // Largest scale in [0, 1] keeping every motor inside [0, max].
    double scale = 1.0;
    for (std::size_t i = 0; i < 4; ++i) {
        if (diff[i] > 0.0) {
            scale = std::min(scale, (params.max_motor_thrust - base) / diff[i]);
        } else if (diff[i] < 0.0) {
            scale = std::min(scale, -base / diff[i]);
        }
    }
    scale = std::max(scale, 0.0);
    if (scale < 1.0) out.saturated = true;

    for (std::size_t i = 0; i < 4; ++i) {
        out.thrust[i] = std::clamp(base + scale * diff[i], 0.0, params.max_motor_thrust);
    }
    return out;
}

}  // namespace morpho::dynamics
