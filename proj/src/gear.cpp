#include "morpholander/gear.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <sstream>

namespace morpho::gear {

// ---------------------------------------------------------------------------
// Leg kinematics
// ---------------------------------------------------------------------------

namespace {

double planar_cosine(const LegGeometry& g, double reach, double height) {
    return (reach * reach + height * height - g.femur * g.femur - g.tibia * g.tibia) /
           (2.0 * g.femur * g.tibia);
}

Vec3 radial(double yaw) { return Vec3(std::cos(yaw), std::sin(yaw), 0.0); }

}  // namespace

void LegGeometry::validate() const {
    if (!(coxa > 0.0 && femur > 0.0 && tibia > 0.0)) {
        throw GeometryError("leg geometry: link lengths must be > 0");
    }
    if (!(max_lift >= 0.10)) throw GeometryError("leg geometry: vertical stroke must cover 0.10 m");
    if (!(stance_reach > coxa)) throw GeometryError("leg geometry: stance reach must exceed the coxa");
    const double reach = shoulder_moment_arm();
    const double z_low = -stance_depth;
    const double z_high = -stance_depth + max_lift;
    // Distance to the target is extremal at the stroke ends or where z crosses zero.
    std::array<double, 3> zs{z_low, z_high, std::clamp(0.0, z_low, z_high)};
    for (double z : zs) {
        if (std::abs(planar_cosine(*this, reach, z)) > 1.0) {
            std::ostringstream os;
            os << "leg geometry: vertical stroke leaves the workspace at z = " << z;
            throw GeometryError(os.str());
        }
    }
}

std::array<LegGeometry, kLegCount> default_legs(double hip_half_span) {
    std::array<LegGeometry, kLegCount> legs;
    const std::array<Vec3, kLegCount> hips{Vec3(hip_half_span, hip_half_span, 0.0),
                                           Vec3(-hip_half_span, hip_half_span, 0.0),
                                           Vec3(-hip_half_span, -hip_half_span, 0.0),
                                           Vec3(hip_half_span, -hip_half_span, 0.0)};
    for (int i = 0; i < kLegCount; ++i) {
        legs[i].hip_mount = hips[i];
        legs[i].shoulder_yaw = std::atan2(hips[i].y(), hips[i].x());
    }
    return legs;
}

Vec3 forward_kinematics(const LegGeometry& geom, const JointAngles& q) {
    const double r = geom.coxa + geom.femur * std::cos(q.femur) + geom.tibia * std::cos(q.femur + q.knee);
    const double z = geom.femur * std::sin(q.femur) + geom.tibia * std::sin(q.femur + q.knee);
    return geom.hip_mount + r * radial(geom.shoulder_yaw + q.coxa) + Vec3(0.0, 0.0, z);
}

Vec3 vertical_line_target(const LegGeometry& geom, int lift_percent) {
    const double lift = geom.max_lift * static_cast<double>(lift_percent) / 100.0;
    return geom.hip_mount + geom.stance_reach * radial(geom.shoulder_yaw) +
           Vec3(0.0, 0.0, -geom.stance_depth + lift);
}

JointAngles ik_vertical(const LegGeometry& geom, int lift_percent) {
    if (lift_percent < 0 || lift_percent > 100) {
        throw GeometryError("ik_vertical: lift percent must lie in [0, 100]");
    }
    const double reach = geom.shoulder_moment_arm();
    const double z = -geom.stance_depth + geom.max_lift * static_cast<double>(lift_percent) / 100.0;
    const double c = planar_cosine(geom, reach, z);
    if (std::abs(c) > 1.0) {
        std::ostringstream os;
        os << "ik_vertical: lift " << lift_percent << "% is outside the leg workspace";
        throw GeometryError(os.str());
    }
    JointAngles q;
    q.coxa = 0.0;
    q.knee = -std::acos(c);  // knee above the hip-foot chord
    q.femur = std::atan2(z, reach) - std::atan2(geom.tibia * std::sin(q.knee),
                                                geom.femur + geom.tibia * std::cos(q.knee));
    return q;
}

// ---------------------------------------------------------------------------
// Load sensing and the lift state machine
// ---------------------------------------------------------------------------

void LoadModel::calibrate(double nominal_share, const LegGeometry& geom) {
    if (!(nominal_share > 0.0)) throw ConfigError("load model: nominal share must be > 0");
    if (!(baseline > 0.0 && noise_sigma >= 0.0 && airborne_max > 0.0)) {
        throw ConfigError("load model: baseline/airborne must be > 0, noise >= 0");
    }
    if (!(overload_min <= overload_max && motion_min <= motion_max && overload_ratio > 1.0)) {
        throw ConfigError("load model: inconsistent bands");
    }
    nominal_force = nominal_share;
    stall_torque = nominal_share * geom.shoulder_moment_arm() * 100.0 / baseline;
}

double estimate_load(double contact_force, LegMotion motion, const LegGeometry& geom,
                     const LoadModel& model, std::mt19937_64& rng) {
    require_finite(contact_force, "estimate_load: force");
    if (contact_force < 0.0) throw ConfigError("estimate_load: contact force must be >= 0");
    if (!(model.stall_torque > 0.0)) throw ConfigError("estimate_load: load model not calibrated");

    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double n = noise(rng) * model.noise_sigma;
    const double u = unit(rng);
    const double m = unit(rng);

    double reading;
    if (motion == LegMotion::Airborne || contact_force <= model.contact_epsilon) {
        reading = u * model.airborne_max;
    } else {
        reading = 100.0 * contact_force * geom.shoulder_moment_arm() / model.stall_torque + n;
        if (contact_force >= model.overload_ratio * model.nominal_force) {
            reading = std::clamp(reading, model.overload_min, model.overload_max);
        }
    }
    const double offset = model.motion_min + m * (model.motion_max - model.motion_min);
    if (motion == LegMotion::Raising) reading += offset;
    if (motion == LegMotion::Lowering) reading -= offset;
    return reading;
}

double filter_step(LegState& leg, double sample) {
    leg.samples[static_cast<std::size_t>(leg.next_slot)] = sample;
    leg.next_slot = (leg.next_slot + 1) % kFilterWindow;
    leg.sample_count = std::min(leg.sample_count + 1, kFilterWindow);
    double sum = 0.0;
    for (int i = 0; i < leg.sample_count; ++i) sum += leg.samples[static_cast<std::size_t>(i)];
    leg.filtered_load = sum / static_cast<double>(leg.sample_count);
    return leg.filtered_load;
}

int gear_update(int lift_percent, double filtered_load) {
    if (lift_percent < 0 || lift_percent > 100) {
        throw ConfigError("gear_update: lift percent must lie in [0, 100]");
    }
    int x = lift_percent;
    const double f = filtered_load;
    if (f >= kRaiseThreshold && f <= 15.0) {
        x += 10;
        if (x >= 100) x = 100;
    }
    if (f <= -4.0 && f >= -9.0) {
        x -= 5;
        if (x <= 0) x = 0;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Platform pose
// ---------------------------------------------------------------------------

Eigen::Matrix3d PlatformPose::rotation() const {
    return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(roll, Vec3::UnitX()))
        .toRotationMatrix();
}

double PlatformPose::tilt() const {
    return std::acos(std::clamp(rotation()(2, 2), -1.0, 1.0));
}

void PlatformConfig::finalize() {
    if (!(body_mass > 0.0)) throw ConfigError("platform: body mass must be > 0");
    if (!(leg_stiffness > 0.0)) throw ConfigError("platform: leg stiffness must be > 0");
    if (settle_ticks < 1 || stable_ticks < 1) throw ConfigError("platform: tick counts must be >= 1");
    if (!(pad_radius > 0.0 && deck_radius > pad_radius)) {
        throw ConfigError("platform: need 0 < pad radius < deck radius");
    }
    if ((pad_centers[0] - pad_centers[1]).head<2>().norm() < 2.0 * pad_radius) {
        throw ConfigError("platform: landing pads overlap");
    }
    for (const auto& leg : legs) leg.validate();
    load.calibrate(weight() / kLegCount, legs[0]);
}

Vec3 Platform::pad_center_world(int pad) const {
    return pose.position + pose.rotation() * config.pad_centers.at(static_cast<std::size_t>(pad));
}

std::array<LegState, kLegCount> initial_legs(const PlatformConfig& cfg) {
    std::array<LegState, kLegCount> legs;
    for (int i = 0; i < kLegCount; ++i) legs[i].joints = ik_vertical(cfg.legs[i], 0);
    return legs;
}

namespace {

struct FeetBody {
    std::array<Vec3, kLegCount> feet;
};

FeetBody feet_in_body(const std::array<LegState, kLegCount>& legs, const PlatformConfig& cfg) {
    FeetBody fb;
    for (int i = 0; i < kLegCount; ++i) fb.feet[i] = forward_kinematics(cfg.legs[i], legs[i].joints);
    return fb;
}

struct Evaluation {
    Eigen::Vector3d residual;  // force, moment/length, moment/length
    PoseSolution solution;
};

constexpr double kMomentScale = 0.25;  // m

Evaluation evaluate(const Eigen::Vector3d& q, const FeetBody& fb, const Terrain& terrain,
                    const PlatformConfig& cfg, double x, double y, double yaw) {
    Evaluation ev;
    PlatformPose& pose = ev.solution.pose;
    pose.position = Vec3(x, y, q[0]);
    pose.roll = q[1];
    pose.pitch = q[2];
    pose.yaw = yaw;
    const Eigen::Matrix3d rot = pose.rotation();
    const Vec3 com = pose.position + rot * cfg.com_offset;
    const double weight = cfg.weight();

    double fz = 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (int i = 0; i < kLegCount; ++i) {
        const Vec3 foot = pose.position + rot * fb.feet[i];
        const double penetration = terrain.height(foot.x(), foot.y()) - foot.z();
        const double f = cfg.leg_stiffness * std::max(0.0, penetration);
        ev.solution.forces[i] = f;
        ev.solution.feet[i] = Vec3(foot.x(), foot.y(), foot.z() + std::max(0.0, penetration));
        if (f > 1e-9 * weight) ++ev.solution.contacts;
        fz += f;
        mx += f * (foot.y() - com.y());
        my -= f * (foot.x() - com.x());
    }
    ev.residual = Eigen::Vector3d(fz - weight, mx / kMomentScale, my / kMomentScale);
    return ev;
}

}  // namespace

PoseSolution solve_supported_pose(const std::array<LegState, kLegCount>& legs,
                                  const Terrain& terrain, const PlatformConfig& cfg,
                                  double x, double y, double yaw, double leg_load) {
    require_finite(leg_load, "solve_supported_pose: leg load");
    if (leg_load < 0.0) throw ConfigError("solve_supported_pose: leg load must be >= 0");
    const FeetBody fb = feet_in_body(legs, cfg);
    PlatformPose pose;
    pose.position = Vec3(x, y, 0.0);
    pose.yaw = yaw;
    const Eigen::Matrix3d rot = pose.rotation();

    // Body height at which each foot just touches.
    std::array<double, kLegCount> touch{};
    std::array<Vec3, kLegCount> feet_xy{};
    for (int i = 0; i < kLegCount; ++i) {
        const Vec3 rel = rot * fb.feet[i];
        feet_xy[i] = Vec3(x + rel.x(), y + rel.y(), 0.0);
        touch[i] = terrain.height(feet_xy[i].x(), feet_xy[i].y()) - rel.z();
    }
    std::array<double, kLegCount> sorted = touch;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());

    const double k = cfg.leg_stiffness;
    double z = sorted[0];
    if (leg_load > 0.0) {
        double sum = 0.0;
        for (int m = 1; m <= kLegCount; ++m) {
            sum += sorted[static_cast<std::size_t>(m - 1)];
            const double candidate = (sum - leg_load / k) / static_cast<double>(m);
            const bool last = m == kLegCount;
            if (last || candidate >= sorted[static_cast<std::size_t>(m)]) {
                z = candidate;
                break;
            }
        }
    }

    PoseSolution sol;
    pose.position.z() = z;
    sol.pose = pose;
    for (int i = 0; i < kLegCount; ++i) {
        const double penetration = touch[i] - z;
        sol.forces[i] = k * std::max(0.0, penetration);
        const Vec3 rel = rot * fb.feet[i];
        sol.feet[i] = Vec3(feet_xy[i].x(), feet_xy[i].y(), z + rel.z() + std::max(0.0, penetration));
        if (sol.forces[i] > 1e-9 * std::max(leg_load, 1.0)) ++sol.contacts;
    }
    return sol;
}

PoseSolution solve_platform_pose(const std::array<LegState, kLegCount>& legs,
                                 const Terrain& terrain, const PlatformConfig& cfg,
                                 double x, double y, double yaw,
                                 const PlatformPose* initial_guess) {
    const FeetBody fb = feet_in_body(legs, cfg);
    Eigen::Vector3d q;
    if (initial_guess != nullptr) {
        q = Eigen::Vector3d(initial_guess->position.z(), initial_guess->roll, initial_guess->pitch);
    } else {
        const PoseSolution level = solve_supported_pose(legs, terrain, cfg, x, y, yaw, cfg.weight());
        q = Eigen::Vector3d(level.pose.position.z(), 0.0, 0.0);
    }

    const double tol = 1e-10 * cfg.weight();
    Evaluation ev = evaluate(q, fb, terrain, cfg, x, y, yaw);
    double lambda = 1e-6;
    bool converged = ev.residual.norm() < tol;
    for (int iter = 0; iter < 200 && !converged; ++iter) {
        Eigen::Matrix3d jac;
        for (int j = 0; j < 3; ++j) {
            const double h = j == 0 ? 1e-7 : 1e-6;
            Eigen::Vector3d qp = q;
            Eigen::Vector3d qm = q;
            qp[j] += h;
            qm[j] -= h;
            jac.col(j) = (evaluate(qp, fb, terrain, cfg, x, y, yaw).residual -
                          evaluate(qm, fb, terrain, cfg, x, y, yaw).residual) /
                         (2.0 * h);
        }
        const Eigen::Matrix3d jtj = jac.transpose() * jac;
        const Eigen::Vector3d grad = jac.transpose() * ev.residual;
        bool accepted = false;
        for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
            Eigen::Matrix3d a = jtj;
            a.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
            const Eigen::Vector3d step = a.ldlt().solve(-grad);
            Eigen::Vector3d trial = q + step;
            trial[1] = std::clamp(trial[1], -1.0, 1.0);
            trial[2] = std::clamp(trial[2], -1.0, 1.0);
            Evaluation tr = evaluate(trial, fb, terrain, cfg, x, y, yaw);
            if (tr.residual.norm() < ev.residual.norm()) {
                q = trial;
                ev = std::move(tr);
                lambda = std::max(lambda / 4.0, 1e-12);
                accepted = true;
            } else {
                lambda *= 8.0;
            }
        }
        if (!accepted) break;
        converged = ev.residual.norm() < tol;
    }

    if (!converged) {
        std::ostringstream os;
        os << "unstable pose: no static equilibrium (residual " << ev.residual.norm() << ")";
        throw UnstablePoseError(os.str());
    }
    if (ev.solution.contacts < 3) {
        throw UnstablePoseError("unstable pose: only " + std::to_string(ev.solution.contacts) +
                                " feet in contact");
    }
    if (std::abs(ev.solution.pose.roll) > cfg.max_tilt || std::abs(ev.solution.pose.pitch) > cfg.max_tilt) {
        throw UnstablePoseError("unstable pose: tilt exceeds limit");
    }
    return ev.solution;
}

// ---------------------------------------------------------------------------
// Stabilization loop
// ---------------------------------------------------------------------------

bool gear_tick(std::array<LegState, kLegCount>& legs, const PoseSolution& pose,
               const PlatformConfig& cfg, std::mt19937_64& rng) {
    bool changed = false;
    for (int i = 0; i < kLegCount; ++i) {
        LegState& leg = legs[i];
        const LegMotion motion = pose.forces[i] > 0.0 ? LegMotion::Static : LegMotion::Airborne;
        const double sample = estimate_load(pose.forces[i], motion, cfg.legs[i], cfg.load, rng);
        const double f = filter_step(leg, sample);
        const int next = gear_update(leg.lift, f);
        if (next != leg.lift) {
            leg.lift = next;
            leg.joints = ik_vertical(cfg.legs[i], next);
            changed = true;
        }
    }
    return changed;
}

StabilizeResult stabilize(const PlatformConfig& cfg, const Terrain& terrain, double x, double y,
                          double yaw, int max_ticks, std::mt19937_64& rng) {
    StabilizeResult result;
    result.legs = initial_legs(cfg);
    PoseSolution last;
    int unchanged = 0;
    bool converged = false;
    int tick = 0;
    while (tick < max_ticks) {
        ++tick;
        const double share = std::min(1.0, static_cast<double>(tick) / cfg.settle_ticks);
        last = solve_supported_pose(result.legs, terrain, cfg, x, y, yaw, share * cfg.weight());
        const bool changed = gear_tick(result.legs, last, cfg, rng);
        unchanged = changed ? 0 : unchanged + 1;
        const bool settled = std::all_of(result.legs.begin(), result.legs.end(), [](const LegState& l) {
            return l.filtered_load < kRaiseThreshold;
        });
        if (share >= 1.0 && unchanged >= cfg.stable_ticks && last.contacts == kLegCount && settled) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        const bool exhausted = std::any_of(result.legs.begin(), result.legs.end(), [](const LegState& l) {
            return l.lift == 100 && l.filtered_load >= kRaiseThreshold;
        });
        std::ostringstream os;
        os << "stabilize: no convergence within " << max_ticks << " ticks"
           << (exhausted ? " (limb range exhausted)" : "") << " (lifts";
        for (const auto& leg : result.legs) os << ' ' << leg.lift;
        os << ", " << last.contacts << " feet loaded)";
        throw NonConvergenceError(os.str(), last.pose, tick);
    }
    try {
        const PoseSolution rest = solve_platform_pose(result.legs, terrain, cfg, x, y, yaw, &last.pose);
        result.pose = rest.pose;
        result.forces = rest.forces;
    } catch (const UnstablePoseError& e) {
        throw NonConvergenceError(std::string("stabilize: final pose ") + e.what(), last.pose, tick);
    }
    result.ticks = tick;
    return result;
}

}  // namespace morpho::gear
