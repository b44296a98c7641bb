#pragma once

// Training, evaluation and replay built on the env and rl modules.

#include "morpholander/harness/config.hpp"
#include "morpholander/rl/checkpoint.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace morpho::harness {

// Deterministic child seed from a master seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);

// ---- training ----

struct TrainRow {
    long long step = 0;        // transitions consumed after this update
    long long update = 0;
    double mean_return = 0.0;  // undiscounted, over episodes finished in this rollout
    int episodes = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    rl::CurriculumStage stage = rl::CurriculumStage::PositionHold;
    bool promoted = false;
};

std::string train_csv_header();
std::string train_csv_line(const TrainRow& row);

rl::TrainerState fresh_trainer(const RunConfig& cfg);

using UpdateHook = std::function<void(const TrainRow&, const rl::TrainerState&)>;

// Trains until state.samples reaches cfg.train.total_steps. Throws
// NonFiniteError when an update aborts.
void train(const RunConfig& cfg, rl::TrainerState& state, const UpdateHook& on_update = {});

// Collects one rollout of `steps` transitions with the current policy.
struct RolloutResult {
    rl::RolloutBuffer buffer;
    std::vector<double> episode_returns;  // finished episodes only
};
RolloutResult collect_rollout(const RunConfig& cfg, const rl::PolicyParams& params, rl::CurriculumStage stage,
                              int steps, std::uint64_t seed);

// Mean undiscounted return of the deterministic policy on `episodes` seeded
// episodes of the given task.
double mean_policy_return(const RunConfig& cfg, const rl::PolicyParams& params, rl::CurriculumStage stage,
                          int episodes, std::uint64_t seed);

// ---- evaluation ----

struct DroneResult {
    env::Outcome outcome = env::Outcome::Flying;
    std::string crash_reason;
    Vec3 touchdown = Vec3::Zero();
    Vec3 pad_center = Vec3::Zero();
    double shift_cm = 0.0;
    bool on_pad = false;
    double discounted_return = 0.0;
};

struct TrialResult {
    int trial = 0;
    std::uint64_t seed = 0;
    bool valid = true;
    std::string invalid_reason;
    std::array<DroneResult, env::kDrones> drones;
    double platform_tilt_deg = 0.0;
    int gear_ticks = 0;
    double min_separation = 0.0;
    int near_misses = 0;
};

struct EvalSummary {
    env::Scenario scenario = env::Scenario::EvenStatic;
    int trials = 0;
    int valid_trials = 0;
    int attempts = 0;      // drones in valid trials
    int touchdowns = 0;
    int pad_hits = 0;
    int crashes = 0;
    int timeouts = 0;
    double success_rate = 0.0;  // pad hits / attempts
    double mean_shift_cm = 0.0;  // over touchdowns
    double std_shift_cm = 0.0;   // sample standard deviation over touchdowns
    double mean_return = 0.0;    // discounted, over attempts
    std::vector<TrialResult> results;
};

EvalSummary summarize(env::Scenario scenario, std::vector<TrialResult> results);

// Runs the trials with action = policy mean. When `trajectory` is given the
// CSV log is written to it.
EvalSummary evaluate(const RunConfig& cfg, const rl::PolicyParams& params, env::Scenario scenario, int trials,
                     std::ostream* trajectory);

std::string trajectory_csv_header();
std::string metrics_json(const EvalSummary& summary, const RunConfig& cfg);

// Rebuilds the summary from a trajectory CSV. Throws ConfigError naming the
// offending line on malformed input.
EvalSummary replay_trajectory(const std::string& csv_text, const RunConfig& cfg);

struct ReplayComparison {
    bool match = true;
    double max_abs_error = 0.0;
    std::vector<std::string> mismatches;
};
// Compares replayed metrics with a metrics document written by metrics_json.
ReplayComparison compare_metrics(const EvalSummary& replayed, const std::string& metrics_json_text,
                                 double tolerance = 1e-9);

}  // namespace morpho::harness
