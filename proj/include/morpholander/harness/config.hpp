#pragma once

// Run configuration: every tunable in one YAML document. Unknown keys are
// rejected; serialization writes every field so a run can be reproduced from
// its archived copy alone.

#include "morpholander/env.hpp"
#include "morpholander/rl/policy.hpp"
#include "morpholander/rl/ppo.hpp"

#include <cstdint>
#include <string>

namespace morpho::harness {

struct TrainConfig {
    long long total_steps = 500000;   // agent transitions, both drones counted
    int rollout_steps = 4096;         // transitions per update
    int workers = 1;                  // parallel rollout workers
    double promotion_threshold = 60.0;  // mean undiscounted PositionHold return
    int promotion_window = 20;        // episodes in the running mean
    double uneven_fraction = 0.5;     // share of PositionSet episodes on uneven terrain
    double start_jitter = 0.15;       // m, start perturbation during training only
    int checkpoint_interval = 25;     // updates
    bool anneal_learning_rate = true;  // linear decay to zero over total_steps

    void validate() const;
};

struct EvalConfig {
    int trials = 16;

    void validate() const;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "runs/default";
    double hip_half_span = 0.15;      // m, square hip layout
    gear::LegGeometry leg;            // geometry shared by all four legs
    env::EnvConfig env;
    rl::Architecture policy;
    rl::PpoConfig ppo;
    TrainConfig train;
    EvalConfig eval;

    // Rebuilds derived fields (leg layout, shared discount and action bound)
    // and validates everything. Throws ConfigError.
    void finalize();
};

RunConfig parse_run_config(const std::string& yaml_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace morpho::harness
