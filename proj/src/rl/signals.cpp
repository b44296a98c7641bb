#include "morpholander/rl/signals.hpp"

#include <algorithm>

namespace morpho::rl {

Observation KinematicState::stacked() const {
    Observation s;
    s << position, velocity, acceleration;
    return s;
}

KinematicState PlatformState::pad_state(int pad) const {
    KinematicState k = body;
    k.position = pads.at(static_cast<std::size_t>(pad));
    return k;
}

Observation observe(const DroneState& drone, const KinematicState& target) {
    return target.stacked() - drone.stacked();
}

Observation observe(const DroneState& drone, const PlatformState& platform, int pad) {
    return observe(drone, platform.pad_state(pad));
}

Action clamp_action(const Vec3& raw, double max_speed) {
    Action a;
    for (int i = 0; i < 3; ++i) a.velocity[i] = std::clamp(raw[i], -max_speed, max_speed);
    return a;
}

void RewardWeights::validate() const {
    if (!(alpha >= 0.0 && beta >= 0.0 && control >= 0.0 && proximity_bonus >= 0.0)) {
        throw ConfigError("reward weights must be >= 0");
    }
    if (!(proximity_threshold > 0.0)) throw ConfigError("reward proximity threshold must be > 0");
}

double reward(const Observation& delta, const Action& action, const RewardWeights& w) {
    const double e_d = delta.segment<3>(0).norm();
    const double e_v = delta.segment<3>(3).norm();
    const double e_a = delta.segment<3>(6).norm();
    const double e_u = action.velocity.norm();
    const double bonus = e_d < w.proximity_threshold ? w.proximity_bonus : 0.0;
    return -e_d - w.alpha * e_v - w.beta * e_a - w.control * e_u + bonus;
}

double discounted_return(std::span<const double> rewards, double discount) {
    double total = 0.0;
    double factor = 1.0;
    for (double r : rewards) {
        total += factor * r;
        factor *= discount;
    }
    return total;
}

const char* stage_name(CurriculumStage stage) {
    return stage == CurriculumStage::PositionHold ? "position_hold" : "position_set";
}

CurriculumStage parse_stage(const std::string& name) {
    if (name == "position_hold") return CurriculumStage::PositionHold;
    if (name == "position_set") return CurriculumStage::PositionSet;
    throw ConfigError("unknown curriculum stage '" + name + "'");
}

CurriculumStage curriculum_step(CurriculumStage stage, double recent_mean_return,
                                double promotion_threshold) {
    if (stage == CurriculumStage::PositionHold && recent_mean_return > promotion_threshold) {
        return CurriculumStage::PositionSet;
    }
    return stage;
}

}  // namespace morpho::rl
