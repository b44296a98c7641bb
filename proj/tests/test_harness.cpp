#include "morpholander/harness/commands.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <sstream>

#include <unistd.h>

using namespace morpho;
using namespace morpho::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("morpholander-test-" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig tiny(const fs::path& out) {
    RunConfig cfg = parse_run_config(R"(
policy:
  hidden: [8]
ppo:
  minibatch: 64
train:
  total_steps: 1024
  rollout_steps: 512
  checkpoint_interval: 1
eval:
  trials: 2
)");
    cfg.output_dir = out.string();
    cfg.finalize();
    return cfg;
}

int count_lines(const std::string& text) {
    return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

std::string line_of(const std::string& text, int n) {
    std::istringstream in(text);
    std::string line;
    for (int i = 0; i < n; ++i) std::getline(in, line);
    return line;
}

}  // namespace

TEST_CASE("config: defaults survive a serialize/parse round trip") {
    const RunConfig a = parse_run_config("");
    const std::string text = serialize_run_config(a);
    const RunConfig b = parse_run_config(text);
    CHECK(serialize_run_config(b) == text);
    CHECK(b.env.drone.mass == a.env.drone.mass);
    CHECK(b.ppo.discount == a.ppo.discount);
    CHECK(b.policy == a.policy);
}

TEST_CASE("config: overrides are applied and shared fields derived") {
    RunConfig c = parse_run_config("seed: 42\nppo:\n  discount: 0.95\ncontrol:\n  max_speed: 0.8\n");
    CHECK(c.seed == 42);
    CHECK(c.env.discount == doctest::Approx(0.95));
    CHECK(c.policy.action_scale == doctest::Approx(0.8));
}

TEST_CASE("config: unknown keys and bad values name the line") {
    try {
        parse_run_config("seed: 1\ntrain:\n  bogus: 3\n");
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("train.bogus") != std::string::npos);
        CHECK(what.find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_run_config("ppo:\n  clip: 2.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("eval:\n  trials: many\n"), ConfigError);
}

TEST_CASE("derived seeds are deterministic and tag-sensitive") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}

TEST_CASE("train: fresh run starts in position hold and archives its config") {
    const fs::path dir = scratch("train-fresh");
    const RunConfig cfg = tiny(dir);
    const TrainOutcome r = cmd_train(cfg);
    CHECK(fs::exists(dir / "config.yaml"));
    CHECK(fs::exists(r.final_checkpoint));
    CHECK(r.checkpoints.size() >= 2);
    CHECK(r.state.samples >= cfg.train.total_steps);
    const std::string csv = read_text_file(dir / "train.csv");
    CHECK(count_lines(csv) == 1 + r.state.updates);
    CHECK(line_of(csv, 2).find("position_hold") != std::string::npos);
    const RunConfig archived = load_run_config((dir / "config.yaml").string());
    CHECK(serialize_run_config(archived) == serialize_run_config(cfg));
}

TEST_CASE("train: same config and seed give an identical training CSV") {
    const fs::path a = scratch("train-a");
    const fs::path b = scratch("train-b");
    cmd_train(tiny(a));
    cmd_train(tiny(b));
    CHECK(read_text_file(a / "train.csv") == read_text_file(b / "train.csv"));
    CHECK(read_text_file(a / "final.ckpt") == read_text_file(b / "final.ckpt"));
}

TEST_CASE("train: resume keeps the checkpoint stage and appends") {
    const fs::path dir = scratch("train-resume");
    RunConfig cfg = tiny(dir);
    TrainOptions first;
    first.stage = rl::CurriculumStage::PositionSet;
    const TrainOutcome a = cmd_train(cfg, first);
    REQUIRE(a.state.stage == rl::CurriculumStage::PositionSet);
    const int rows = count_lines(read_text_file(dir / "train.csv"));

    cfg.train.total_steps = 2048;
    TrainOptions again;
    again.resume = a.final_checkpoint;
    const TrainOutcome b = cmd_train(cfg, again);
    CHECK(b.state.stage == rl::CurriculumStage::PositionSet);
    CHECK(b.state.samples >= 2048);
    CHECK(count_lines(read_text_file(dir / "train.csv")) > rows);

    RunConfig wide = cfg;
    wide.policy.hidden = {16};
    wide.finalize();
    CHECK_THROWS_AS(cmd_train(wide, again), ConfigError);
}

TEST_CASE("eval: deterministic outputs that replay exactly") {
    const fs::path dir = scratch("eval");
    const RunConfig cfg = tiny(dir);
    const fs::path ckpt = dir / "init.ckpt";
    rl::save_checkpoint(fresh_trainer(cfg), ckpt.string());

    const EvalOutcome a = cmd_eval(cfg, ckpt, env::Scenario::UnevenStatic, 2);
    const std::string metrics = read_text_file(a.metrics);
    const std::string traj = read_text_file(a.trajectory);
    const EvalOutcome b = cmd_eval(cfg, ckpt, env::Scenario::UnevenStatic, 2);
    CHECK(read_text_file(b.metrics) == metrics);
    CHECK(read_text_file(b.trajectory) == traj);
    CHECK(fs::exists(a.directory / "config.yaml"));
    CHECK(a.summary.trials == 2);

    const auto j = nlohmann::json::parse(metrics);
    CHECK(j.contains("mean_shift_cm"));

    const ReplayOutcome r = cmd_replay(cfg, a.trajectory, a.metrics);
    REQUIRE(r.comparison.has_value());
    CHECK(r.comparison->match);
    CHECK(r.comparison->max_abs_error <= 1e-9);
}

TEST_CASE("eval: a single trial logs only trial 0") {
    const fs::path dir = scratch("eval-one");
    const RunConfig cfg = tiny(dir);
    const fs::path ckpt = dir / "init.ckpt";
    rl::save_checkpoint(fresh_trainer(cfg), ckpt.string());
    const EvalOutcome a = cmd_eval(cfg, ckpt, env::Scenario::EvenStatic, 1);
    std::istringstream in(read_text_file(a.trajectory));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) REQUIRE(line.rfind("0,", 0) == 0);
    CHECK(a.summary.trials == 1);
}

TEST_CASE("eval: architecture mismatch is rejected") {
    const fs::path dir = scratch("eval-mismatch");
    RunConfig cfg = tiny(dir);
    const fs::path ckpt = dir / "init.ckpt";
    rl::save_checkpoint(fresh_trainer(cfg), ckpt.string());
    cfg.policy.hidden = {4, 4};
    cfg.finalize();
    CHECK_THROWS_AS(cmd_eval(cfg, ckpt, env::Scenario::EvenStatic, 1), ConfigError);
}

TEST_CASE("replay: truncated file names the offending line") {
    const fs::path dir = scratch("replay-trunc");
    const RunConfig cfg = tiny(dir);
    const fs::path ckpt = dir / "init.ckpt";
    rl::save_checkpoint(fresh_trainer(cfg), ckpt.string());
    const EvalOutcome a = cmd_eval(cfg, ckpt, env::Scenario::EvenStatic, 1);
    const std::string traj = read_text_file(a.trajectory);
    const int lines = count_lines(traj);

    // Cut the last row in half.
    const std::string cut = traj.substr(0, traj.size() - 12);
    try {
        replay_trajectory(cut, cfg);
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line " + std::to_string(lines)) != std::string::npos);
    }

    // Drop whole rows so a drone loses its terminal row.
    std::string shorter = traj.substr(0, traj.rfind('\n', traj.size() - 2) + 1);
    shorter = shorter.substr(0, shorter.rfind('\n', shorter.size() - 2) + 1);
    CHECK_THROWS_AS(replay_trajectory(shorter, cfg), ConfigError);
    CHECK_THROWS_AS(replay_trajectory("", cfg), ConfigError);
    CHECK_THROWS_AS(replay_trajectory("trial,drone\n", cfg), ConfigError);
}

TEST_CASE("replay: hand-built rows give the Pythagorean shift") {
    const RunConfig cfg = parse_run_config("");
    std::ostringstream csv;
    csv << trajectory_csv_header() << '\n';
    // Drone 0 touches down 3 cm and 4 cm off its pad centre; drone 1 crashes.
    csv << "0,0,10,0.1,0.2,0.3,0,0,0,0,0,0,0,0,0,0,pad\n";
    csv << "0,0,10,0.13,0.24,0.315,0,0,0,0,0,0,0,0,0,1.5,touchdown\n";
    csv << "0,1,10,0.1,-0.2,0.3,0,0,0,0,0,0,0,0,0,0,pad\n";
    csv << "0,1,10,-1,0.5,0,0,0,0,0,0,0,0,0,0,-2,crash\n";
    const EvalSummary s = replay_trajectory(csv.str(), cfg);
    CHECK(s.trials == 1);
    CHECK(s.touchdowns == 1);
    CHECK(s.pad_hits == 1);
    CHECK(s.crashes == 1);
    CHECK(s.results[0].drones[0].shift_cm == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s.mean_shift_cm == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s.success_rate == doctest::Approx(0.5));
    CHECK(s.mean_return == doctest::Approx(-0.25));
}

TEST_CASE("gear demo reports convergence and non-convergence") {
    const fs::path dir = scratch("gear-demo");
    const RunConfig cfg = tiny(dir);
    Terrain flat = Terrain::flat(1.0, 0.01);
    flat.save((dir / "flat.txt").string());
    const GearDemoResult ok = cmd_gear_demo(cfg, dir / "flat.txt", 0.0, 0.0, 200);
    CHECK(ok.converged);
    CHECK(ok.tilt_deg < 1e-6);

    gear::PlatformConfig pc = cfg.env.prepared().platform;
    Terrain step = Terrain::flat(1.0, 0.01);
    const Vec3 foot = gear::vertical_line_target(pc.legs[0], 0);
    step.add_block(foot.x(), foot.y(), 0.06, 0.15);
    step.save((dir / "step.txt").string());
    const GearDemoResult bad = cmd_gear_demo(cfg, dir / "step.txt", 0.0, 0.0, 200);
    CHECK_FALSE(bad.converged);
    CHECK(bad.error.find("limb range exhausted") != std::string::npos);
}
