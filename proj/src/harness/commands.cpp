#include "morpholander/harness/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace morpho::harness {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

namespace {

std::string checkpoint_name(const char* prefix, long long update) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%06lld.ckpt", prefix, update);
    return buf;
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& cfg, const TrainOptions& options) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir / "checkpoints");
    save_run_config(cfg, (dir / "config.yaml").string());

    TrainOutcome result;
    rl::TrainerState& state = result.state;
    if (options.resume) {
        state = rl::load_checkpoint(options.resume->string());
        if (!(state.params.arch == cfg.policy)) {
            throw ConfigError("checkpoint architecture does not match the config policy section");
        }
    } else {
        state = fresh_trainer(cfg);
    }
    if (options.stage && *options.stage != state.stage) {
        state.stage = *options.stage;
        state.window.clear();
    }

    const fs::path csv_path = dir / "train.csv";
    const bool append = options.resume.has_value() && fs::exists(csv_path);
    std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
    if (!csv) throw ConfigError("cannot write '" + csv_path.string() + "'");
    if (!append) csv << train_csv_header() << '\n';

    train(cfg, state, [&](const TrainRow& row, const rl::TrainerState& s) {
        csv << train_csv_line(row) << '\n';
        csv.flush();
        if (row.update % cfg.train.checkpoint_interval == 0) {
            const fs::path p = dir / "checkpoints" / checkpoint_name("update", row.update);
            rl::save_checkpoint(s, p.string());
            result.checkpoints.push_back(p);
        }
        if (row.promoted) {
            const fs::path p = dir / "checkpoints" / checkpoint_name("promoted", row.update);
            rl::save_checkpoint(s, p.string());
            result.checkpoints.push_back(p);
        }
        if (options.log) {
            *options.log << "update " << row.update << " step " << row.step << " stage "
                         << rl::stage_name(row.stage) << " mean_return " << row.mean_return
                         << (row.promoted ? " promoted" : "") << '\n';
        }
    });
    result.final_checkpoint = dir / "final.ckpt";
    rl::save_checkpoint(state, result.final_checkpoint.string());
    return result;
}

EvalOutcome cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, env::Scenario scenario, int trials) {
    const rl::TrainerState state = rl::load_checkpoint(checkpoint.string());
    EvalOutcome out;
    out.directory = fs::path(cfg.output_dir) / (std::string("eval-") + env::scenario_name(scenario));
    fs::create_directories(out.directory);
    save_run_config(cfg, (out.directory / "config.yaml").string());
    out.trajectory = out.directory / "trajectory.csv";
    out.metrics = out.directory / "metrics.json";
    std::ofstream traj(out.trajectory, std::ios::binary | std::ios::trunc);
    if (!traj) throw ConfigError("cannot write '" + out.trajectory.string() + "'");
    out.summary = evaluate(cfg, state.params, scenario, trials, &traj);
    traj.close();
    write_text_file(out.metrics, metrics_json(out.summary, cfg));
    return out;
}

ReplayOutcome cmd_replay(const RunConfig& cfg, const fs::path& trajectory, const std::optional<fs::path>& metrics) {
    ReplayOutcome out;
    out.summary = replay_trajectory(read_text_file(trajectory), cfg);
    if (metrics) out.comparison = compare_metrics(out.summary, read_text_file(*metrics));
    return out;
}

GearDemoResult cmd_gear_demo(const RunConfig& cfg, const fs::path& terrain_path, double x, double y,
                             int max_ticks) {
    const Terrain terrain = Terrain::load(terrain_path.string());
    const gear::PlatformConfig platform = cfg.env.prepared().platform;
    std::mt19937_64 rng(cfg.seed);
    GearDemoResult r;
    try {
        const gear::StabilizeResult s = gear::stabilize(platform, terrain, x, y, 0.0, max_ticks, rng);
        r.converged = true;
        r.ticks = s.ticks;
        r.tilt_deg = rad2deg(s.pose.tilt());
        for (std::size_t i = 0; i < gear::kLegCount; ++i) r.lifts[i] = s.legs[i].lift;
    } catch (const gear::NonConvergenceError& e) {
        r.ticks = e.ticks();
        r.tilt_deg = rad2deg(e.last_pose().tilt());
        r.error = e.what();
    }
    return r;
}

}  // namespace morpho::harness
