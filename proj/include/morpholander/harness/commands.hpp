#pragma once

// File-level commands behind the CLI: every command archives the config it ran
// with next to its outputs.

#include "morpholander/harness/run.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace morpho::harness {

struct TrainOptions {
    std::optional<std::filesystem::path> resume;     // checkpoint to continue from
    std::optional<rl::CurriculumStage> stage;        // overrides the checkpoint or fresh stage
    std::ostream* log = nullptr;                     // one progress line per update
};

struct TrainOutcome {
    rl::TrainerState state;
    std::filesystem::path final_checkpoint;
    std::vector<std::filesystem::path> checkpoints;  // interval and promotion checkpoints, in order
};

// Writes config.yaml, train.csv and checkpoints/ under cfg.output_dir. A
// resumed run appends to train.csv.
TrainOutcome cmd_train(const RunConfig& cfg, const TrainOptions& options = {});

struct EvalOutcome {
    EvalSummary summary;
    std::filesystem::path directory;  // <output_dir>/eval-<scenario>
    std::filesystem::path metrics;
    std::filesystem::path trajectory;
};

EvalOutcome cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, env::Scenario scenario,
                     int trials);

struct ReplayOutcome {
    EvalSummary summary;
    std::optional<ReplayComparison> comparison;  // present when a metrics file was given
};

ReplayOutcome cmd_replay(const RunConfig& cfg, const std::filesystem::path& trajectory,
                         const std::optional<std::filesystem::path>& metrics);

struct GearDemoResult {
    bool converged = false;
    int ticks = 0;
    double tilt_deg = 0.0;
    std::array<int, gear::kLegCount> lifts{};
    std::string error;  // non-convergence diagnostic
};

// Stabilizes the configured platform at (x, y) on a terrain grid file.
GearDemoResult cmd_gear_demo(const RunConfig& cfg, const std::filesystem::path& terrain, double x, double y,
                             int max_ticks);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace morpho::harness
