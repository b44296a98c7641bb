#include "morpholander/harness/commands.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace morpho;

namespace {

harness::RunConfig config_from(const std::string& yaml_text, std::optional<std::uint64_t> seed,
                               std::optional<std::string> output_dir) {
    harness::RunConfig cfg = harness::parse_run_config(yaml_text);
    if (seed) cfg.seed = *seed;
    if (output_dir) cfg.output_dir = *output_dir;
    cfg.finalize();
    return cfg;
}

py::dict summary_dict(const harness::EvalSummary& s) {
    py::dict d;
    d["scenario"] = env::scenario_name(s.scenario);
    d["trials"] = s.trials;
    d["valid_trials"] = s.valid_trials;
    d["touchdowns"] = s.touchdowns;
    d["pad_hits"] = s.pad_hits;
    d["crashes"] = s.crashes;
    d["timeouts"] = s.timeouts;
    d["success_rate"] = s.success_rate;
    d["mean_shift_cm"] = s.mean_shift_cm;
    d["std_shift_cm"] = s.std_shift_cm;
    d["mean_return"] = s.mean_return;
    return d;
}

Terrain terrain_from(const Eigen::MatrixXd& heights, double cell_size, std::optional<double> origin_x,
                     std::optional<double> origin_y) {
    const double half_w = 0.5 * cell_size * static_cast<double>(heights.cols() - 1);
    const double half_h = 0.5 * cell_size * static_cast<double>(heights.rows() - 1);
    return Terrain(origin_x.value_or(-half_w), origin_y.value_or(-half_h), cell_size, heights);
}

// Stateful episode handle over env::World.
class Episode {
public:
    Episode(const std::string& scenario, std::uint64_t seed, const std::string& yaml_text, const std::string& task)
        : cfg_(config_from(yaml_text, std::nullopt, std::nullopt)),
          world_(env::reset(env::parse_scenario(scenario), cfg_.env, seed, rl::parse_stage(task))) {}

    void run_until_landing() { env::run_until_landing(world_); }

    py::tuple step(const Eigen::Matrix<double, env::kDrones, 3, Eigen::RowMajor>& actions) {
        const env::StepRecord r = env::env_step(world_, {Vec3(actions.row(0).transpose()), Vec3(actions.row(1).transpose())});
        Eigen::Matrix<double, env::kDrones, rl::kObsDim, Eigen::RowMajor> obs;
        for (int i = 0; i < env::kDrones; ++i) obs.row(i) = r.obs[static_cast<std::size_t>(i)].transpose();
        return py::make_tuple(obs, r.rewards, r.done, r.terminal);
    }

    Eigen::Matrix<double, env::kDrones, rl::kObsDim, Eigen::RowMajor> observations() const {
        Eigen::Matrix<double, env::kDrones, rl::kObsDim, Eigen::RowMajor> obs;
        for (int i = 0; i < env::kDrones; ++i) obs.row(i) = env::observation(world_, i).transpose();
        return obs;
    }

    std::string phase() const { return env::phase_name(world_.phase); }
    double time() const { return world_.time; }
    double platform_tilt_deg() const { return rad2deg(world_.platform.pose.tilt()); }
    Vec3 pad_center(int pad) const { return env::pad_pose(world_, pad).center; }
    Vec3 drone_position(int drone) const { return world_.drones.at(static_cast<std::size_t>(drone)).body.position; }
    int assigned_pad(int drone) const { return world_.drones.at(static_cast<std::size_t>(drone)).pad; }
    std::string outcome(int drone) const {
        return env::outcome_name(world_.drones.at(static_cast<std::size_t>(drone)).outcome);
    }
    double shift_cm(int drone) const { return world_.drones.at(static_cast<std::size_t>(drone)).shift_cm; }

private:
    harness::RunConfig cfg_;
    env::World world_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Legged landing platform simulator and PPO landing trainer";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);
    py::register_exception<gear::NonConvergenceError>(m, "NonConvergenceError", PyExc_RuntimeError);
    py::register_exception<env::EpisodeInvalid>(m, "EpisodeInvalid", PyExc_RuntimeError);

    py::class_<dynamics::DroneParams>(m, "DroneParams")
        .def(py::init<>())
        .def_readwrite("mass", &dynamics::DroneParams::mass)
        .def_readwrite("inertia", &dynamics::DroneParams::inertia)
        .def_readwrite("arm_length", &dynamics::DroneParams::arm_length)
        .def_readwrite("max_motor_thrust", &dynamics::DroneParams::max_motor_thrust)
        .def_readwrite("yaw_torque_coeff", &dynamics::DroneParams::yaw_torque_coeff)
        .def_readwrite("linear_drag", &dynamics::DroneParams::linear_drag)
        .def_readwrite("gravity", &dynamics::DroneParams::gravity)
        .def("hover_thrust", &dynamics::DroneParams::hover_thrust);

    py::class_<dynamics::RigidBodyState>(m, "RigidBodyState")
        .def(py::init<>())
        .def_readwrite("position", &dynamics::RigidBodyState::position)
        .def_readwrite("velocity", &dynamics::RigidBodyState::velocity)
        .def_readonly("acceleration", &dynamics::RigidBodyState::acceleration)
        .def_readwrite("body_rates", &dynamics::RigidBodyState::body_rates)
        .def_property(
            "attitude_wxyz",
            [](const dynamics::RigidBodyState& s) {
                return Eigen::Vector4d(s.attitude.w(), s.attitude.x(), s.attitude.y(), s.attitude.z());
            },
            [](dynamics::RigidBodyState& s, const Eigen::Vector4d& q) {
                s.attitude = Attitude(q[0], q[1], q[2], q[3]).normalized();
            });

    m.def(
        "step_dynamics",
        [](const dynamics::RigidBodyState& s, const std::array<double, 4>& thrust, const dynamics::DroneParams& p,
           double dt) {
            dynamics::MotorCommand c;
            c.thrust = thrust;
            return dynamics::step_dynamics(s, c, p, dt);
        },
        py::arg("state"), py::arg("thrust"), py::arg("params"), py::arg("dt"));
    m.def(
        "motor_mix",
        [](double total, const Vec3& torques, const dynamics::DroneParams& p) {
            const dynamics::MotorCommand c = dynamics::motor_mix(total, torques, p);
            return py::make_tuple(c.thrust, c.saturated);
        },
        py::arg("total_thrust"), py::arg("torques"), py::arg("params"));

    m.def("gear_update", &gear::gear_update, py::arg("lift_percent"), py::arg("filtered_load"));
    m.def(
        "vertical_line_target",
        [](int leg, int lift) { return gear::vertical_line_target(gear::default_legs().at(static_cast<std::size_t>(leg)), lift); },
        py::arg("leg"), py::arg("lift_percent"));
    m.def(
        "foot_after_ik",
        [](int leg, int lift) {
            const gear::LegGeometry g = gear::default_legs().at(static_cast<std::size_t>(leg));
            return gear::forward_kinematics(g, gear::ik_vertical(g, lift));
        },
        py::arg("leg"), py::arg("lift_percent"));
    m.def(
        "stabilize",
        [](const Eigen::MatrixXd& heights, double cell_size, std::optional<double> origin_x,
           std::optional<double> origin_y, double x, double y, int max_ticks, std::uint64_t seed) {
            gear::PlatformConfig cfg;
            cfg.finalize();
            const Terrain t = terrain_from(heights, cell_size, origin_x, origin_y);
            std::mt19937_64 rng(seed);
            const gear::StabilizeResult r = gear::stabilize(cfg, t, x, y, 0.0, max_ticks, rng);
            py::dict d;
            d["ticks"] = r.ticks;
            d["tilt_deg"] = rad2deg(r.pose.tilt());
            d["lifts"] = std::array<int, 4>{r.legs[0].lift, r.legs[1].lift, r.legs[2].lift, r.legs[3].lift};
            d["forces"] = r.forces;
            return d;
        },
        py::arg("heights"), py::arg("cell_size") = 0.01, py::arg("origin_x") = py::none(),
        py::arg("origin_y") = py::none(), py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("max_ticks") = 200,
        py::arg("seed") = 0);

    m.def(
        "reward",
        [](const rl::Observation& delta, const Vec3& action) {
            rl::Action a;
            a.velocity = action;
            return rl::reward(delta, a, rl::RewardWeights{});
        },
        py::arg("delta"), py::arg("action"));
    m.def(
        "discounted_return",
        [](const std::vector<double>& rewards, double discount) { return rl::discounted_return(rewards, discount); },
        py::arg("rewards"), py::arg("discount"));
    m.def("landing_shift", &env::landing_shift, py::arg("touchdown"), py::arg("pad_center"));

    py::class_<Episode>(m, "Episode")
        .def(py::init<const std::string&, std::uint64_t, const std::string&, const std::string&>(),
             py::arg("scenario") = "even-static", py::arg("seed") = 0, py::arg("config") = "",
             py::arg("task") = "position_set")
        .def("run_until_landing", &Episode::run_until_landing)
        .def("step", &Episode::step, py::arg("actions"))
        .def("observations", &Episode::observations)
        .def_property_readonly("phase", &Episode::phase)
        .def_property_readonly("time", &Episode::time)
        .def_property_readonly("platform_tilt_deg", &Episode::platform_tilt_deg)
        .def("pad_center", &Episode::pad_center, py::arg("pad"))
        .def("drone_position", &Episode::drone_position, py::arg("drone"))
        .def("assigned_pad", &Episode::assigned_pad, py::arg("drone"))
        .def("outcome", &Episode::outcome, py::arg("drone"))
        .def("shift_cm", &Episode::shift_cm, py::arg("drone"));

    m.def(
        "resolve_config",
        [](const std::string& yaml_text) { return harness::serialize_run_config(config_from(yaml_text, {}, {})); },
        py::arg("config") = "");
    m.def(
        "train",
        [](const std::string& yaml_text, std::optional<std::uint64_t> seed, std::optional<std::string> output_dir) {
            const harness::TrainOutcome r = [&] {
                py::gil_scoped_release release;
                return harness::cmd_train(config_from(yaml_text, seed, output_dir));
            }();
            py::dict d;
            d["samples"] = r.state.samples;
            d["updates"] = r.state.updates;
            d["stage"] = rl::stage_name(r.state.stage);
            d["checkpoint"] = r.final_checkpoint;
            return d;
        },
        py::arg("config") = "", py::arg("seed") = py::none(), py::arg("output_dir") = py::none());
    m.def(
        "evaluate",
        [](const std::string& yaml_text, const std::filesystem::path& checkpoint, const std::string& scenario,
           int trials, std::optional<std::uint64_t> seed, std::optional<std::string> output_dir) {
            const harness::EvalOutcome r = [&] {
                py::gil_scoped_release release;
                return harness::cmd_eval(config_from(yaml_text, seed, output_dir), checkpoint,
                                         env::parse_scenario(scenario), trials);
            }();
            py::dict d = summary_dict(r.summary);
            d["metrics"] = r.metrics;
            d["trajectory"] = r.trajectory;
            return d;
        },
        py::arg("config"), py::arg("checkpoint"), py::arg("scenario") = "even-static", py::arg("trials") = 16,
        py::arg("seed") = py::none(), py::arg("output_dir") = py::none());
    m.def(
        "replay",
        [](const std::string& yaml_text, const std::filesystem::path& trajectory,
           std::optional<std::filesystem::path> metrics) {
            const harness::ReplayOutcome r = harness::cmd_replay(config_from(yaml_text, {}, {}), trajectory, metrics);
            py::dict d = summary_dict(r.summary);
            if (r.comparison) {
                d["match"] = r.comparison->match;
                d["max_abs_error"] = r.comparison->max_abs_error;
                d["mismatches"] = r.comparison->mismatches;
            }
            return d;
        },
        py::arg("config"), py::arg("trajectory"), py::arg("metrics") = py::none());
}
