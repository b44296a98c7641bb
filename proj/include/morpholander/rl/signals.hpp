#pragma once

// Observation, reward and return definitions shared by training and evaluation.

#include "morpholander/common.hpp"

#include <Eigen/Core>

#include <array>
#include <span>

namespace morpho::rl {

inline constexpr int kObsDim = 9;
inline constexpr int kActDim = 3;

using Observation = Eigen::Matrix<double, kObsDim, 1>;

// Linear kinematics: position, velocity, acceleration.
struct KinematicState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 acceleration = Vec3::Zero();

    Observation stacked() const;
};

using DroneState = KinematicState;

// Platform body kinematics plus the world positions of its two pad targets.
struct PlatformState {
    KinematicState body;
    std::array<Vec3, 2> pads{Vec3::Zero(), Vec3::Zero()};

    // Kinematic state of one pad: its position, moving with the body.
    KinematicState pad_state(int pad) const;
};

// Platform (at the assigned pad) minus drone, componentwise.
Observation observe(const DroneState& drone, const PlatformState& platform, int pad);
Observation observe(const DroneState& drone, const KinematicState& target);

struct ObservationScale {
    // Position error is amplified so centimetre offsets near the pad are resolvable.
    Observation scale = (Observation() << 4, 4, 4, 2, 2, 2, 0.1, 0.1, 0.1).finished();

    Observation apply(const Observation& obs) const { return obs.cwiseProduct(scale); }
};

struct Action {
    Vec3 velocity = Vec3::Zero();
};

Action clamp_action(const Vec3& raw, double max_speed);

struct RewardWeights {
    double alpha = 0.1;            // relative velocity error
    double beta = 0.01;            // relative acceleration error
    double control = 0.05;         // commanded speed magnitude
    double proximity_bonus = 2.0;  // granted while the position error is below the threshold
    double proximity_threshold = 0.1;  // m

    void validate() const;
};

double reward(const Observation& delta, const Action& action, const RewardWeights& w);

double discounted_return(std::span<const double> rewards, double discount);

enum class CurriculumStage { PositionHold = 0, PositionSet = 1 };

const char* stage_name(CurriculumStage stage);
CurriculumStage parse_stage(const std::string& name);

// Promotes PositionHold to PositionSet once the recent mean return exceeds
// the threshold. Never demotes.
CurriculumStage curriculum_step(CurriculumStage stage, double recent_mean_return,
                                double promotion_threshold);

}  // namespace morpho::rl
