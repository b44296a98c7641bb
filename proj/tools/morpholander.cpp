#include "morpholander/harness/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace morpho;
namespace fs = std::filesystem;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "YAML run config (defaults when omitted)")->check(CLI::ExistingFile);
    cmd->add_option("-s,--seed", c.seed, "master seed, overrides the config");
    cmd->add_option("-o,--output", c.output, "output directory, overrides the config");
}

harness::RunConfig resolve(const Common& c) {
    harness::RunConfig cfg = c.config.empty() ? harness::parse_run_config("") : harness::load_run_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.output) cfg.output_dir = *c.output;
    cfg.finalize();
    return cfg;
}

std::string fmt_cm(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

void print_summary(const harness::EvalSummary& s) {
    std::printf("trials %d (valid %d)  touchdowns %d  pad hits %d  crashes %d  timeouts %d\n", s.trials,
                s.valid_trials, s.touchdowns, s.pad_hits, s.crashes, s.timeouts);
    std::printf("success rate %.4f  mean shift %s cm  std %s cm  mean discounted return %.6f\n", s.success_rate,
                fmt_cm(s.mean_shift_cm).c_str(), fmt_cm(s.std_shift_cm).c_str(), s.mean_return);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Legged landing platform simulator and PPO landing trainer"};
    app.require_subcommand(1);

    Common train_opts;
    std::string resume;
    std::string stage;
    bool quiet = false;
    auto* train = app.add_subcommand("train", "curriculum training with checkpoints and a training CSV");
    add_common(train, train_opts);
    train->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);
    train->add_option("--stage", stage, "stage override")->check(CLI::IsMember({"position_hold", "position_set"}));
    train->add_flag("-q,--quiet", quiet, "no per-update progress lines");

    Common eval_opts;
    std::string checkpoint;
    std::string scenario = "even-static";
    std::optional<int> trials;
    auto* eval = app.add_subcommand("eval", "deterministic evaluation trials");
    add_common(eval, eval_opts);
    eval->add_option("-k,--checkpoint", checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
    eval->add_option("--scenario", scenario, "scenario")
        ->check(CLI::IsMember({"even-static", "uneven-static", "relocate"}));
    eval->add_option("-n,--trials", trials, "trial count, overrides the config");

    Common replay_opts;
    std::string trajectory;
    std::string metrics;
    auto* replay = app.add_subcommand("replay", "recompute metrics from a trajectory CSV");
    add_common(replay, replay_opts);
    replay->add_option("-t,--trajectory", trajectory, "trajectory CSV from eval")->required()->check(CLI::ExistingFile);
    replay->add_option("-m,--metrics", metrics, "metrics.json to compare against")->check(CLI::ExistingFile);

    Common gear_opts;
    std::string terrain;
    double px = 0.0;
    double py = 0.0;
    std::optional<int> max_ticks;
    auto* gear_demo = app.add_subcommand("gear-demo", "stabilize the platform on a terrain grid file");
    add_common(gear_demo, gear_opts);
    gear_demo->add_option("-t,--terrain", terrain, "terrain grid file")->required()->check(CLI::ExistingFile);
    gear_demo->add_option("-x", px, "platform x, m");
    gear_demo->add_option("-y", py, "platform y, m");
    gear_demo->add_option("--max-ticks", max_ticks, "tick budget, overrides the config");

    Common dump_opts;
    auto* dump = app.add_subcommand("config", "print the resolved config as YAML");
    add_common(dump, dump_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const harness::RunConfig cfg = resolve(train_opts);
            harness::TrainOptions opts;
            if (!resume.empty()) opts.resume = resume;
            if (!stage.empty()) opts.stage = rl::parse_stage(stage);
            if (!quiet) opts.log = &std::cout;
            const harness::TrainOutcome r = harness::cmd_train(cfg, opts);
            std::printf("trained %lld steps in %lld updates, stage %s\nfinal checkpoint %s\n", r.state.samples,
                        r.state.updates, rl::stage_name(r.state.stage), r.final_checkpoint.string().c_str());
        } else if (*eval) {
            const harness::RunConfig cfg = resolve(eval_opts);
            const harness::EvalOutcome r =
                harness::cmd_eval(cfg, checkpoint, env::parse_scenario(scenario), trials.value_or(cfg.eval.trials));
            std::printf("%s\n", scenario.c_str());
            print_summary(r.summary);
            std::printf("metrics %s\ntrajectory %s\n", r.metrics.string().c_str(), r.trajectory.string().c_str());
        } else if (*replay) {
            const harness::RunConfig cfg = resolve(replay_opts);
            std::optional<fs::path> m;
            if (!metrics.empty()) m = metrics;
            const harness::ReplayOutcome r = harness::cmd_replay(cfg, trajectory, m);
            print_summary(r.summary);
            if (r.comparison) {
                if (!r.comparison->match) {
                    for (const auto& line : r.comparison->mismatches) std::fprintf(stderr, "mismatch: %s\n", line.c_str());
                    std::fprintf(stderr, "replay does not match %s\n", metrics.c_str());
                    return 1;
                }
                std::printf("replay matches %s (max abs error %.3g)\n", metrics.c_str(), r.comparison->max_abs_error);
            }
        } else if (*gear_demo) {
            const harness::RunConfig cfg = resolve(gear_opts);
            const harness::GearDemoResult r =
                harness::cmd_gear_demo(cfg, terrain, px, py, max_ticks.value_or(cfg.env.gear_max_ticks));
            if (!r.converged) {
                std::fprintf(stderr, "%s\nlast tilt %.4f deg after %d ticks\n", r.error.c_str(), r.tilt_deg, r.ticks);
                return 1;
            }
            std::printf("converged in %d ticks, tilt %.4f deg, lifts %d %d %d %d\n", r.ticks, r.tilt_deg, r.lifts[0],
                        r.lifts[1], r.lifts[2], r.lifts[3]);
        } else if (*dump) {
            std::cout << harness::serialize_run_config(resolve(dump_opts));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
