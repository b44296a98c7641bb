#pragma once

// Plain-text, versioned training checkpoints. Values are written with 17
// significant digits so a save/load round trip is exact.

#include "morpholander/rl/ppo.hpp"

#include <string>

namespace morpho::rl {

inline constexpr int kCheckpointVersion = 1;

struct TrainerState {
    PolicyParams params;
    AdamState adam;
    CurriculumStage stage = CurriculumStage::PositionHold;
    long long samples = 0;   // environment transitions consumed
    long long updates = 0;
    long long episodes = 0;
    std::mt19937_64 rng;     // minibatch shuffling
    ReturnWindow window{20};
};

void save_checkpoint(const TrainerState& state, const std::string& path);
// Throws ConfigError naming the offending line on malformed input.
TrainerState load_checkpoint(const std::string& path);

std::string serialize_checkpoint(const TrainerState& state);
TrainerState parse_checkpoint(const std::string& text);

}  // namespace morpho::rl
