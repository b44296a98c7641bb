#include "morpholander/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace morpho::harness {

namespace {

std::string join_path(const std::vector<std::string>& path, const std::string& key) {
    std::string out;
    for (const auto& p : path) out += p + ".";
    return out + key;
}

std::string where(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    if (m.line < 0) return "";
    return " (line " + std::to_string(m.line + 1) + ")";
}

class Reader {
public:
    explicit Reader(YAML::Node root) { stack_.push_back({std::move(root), {}}); }

    void section(const std::string& name, const std::function<void()>& body) {
        YAML::Node child = current().node[name];
        current().seen.insert(name);
        if (!child) return;
        if (!child.IsMap()) throw ConfigError("config: '" + join_path(path_, name) + "' must be a section" + where(child));
        path_.push_back(name);
        stack_.push_back({child, {}});
        body();
        check_unknown();
        stack_.pop_back();
        path_.pop_back();
    }

    template <typename T>
    void field(const std::string& name, T& value) {
        current().seen.insert(name);
        const YAML::Node n = current().node[name];
        if (!n) return;
        try {
            read(n, value);
        } catch (const YAML::Exception&) {
            throw ConfigError("config: bad value for '" + join_path(path_, name) + "'" + where(n));
        } catch (const ConfigError& e) {
            throw ConfigError("config: '" + join_path(path_, name) + "': " + e.what() + where(n));
        }
    }

    void finish() { check_unknown(); }

private:
    struct Frame {
        YAML::Node node;
        std::set<std::string> seen;
    };
    Frame& current() { return stack_.back(); }

    void check_unknown() {
        for (const auto& kv : current().node) {
            const std::string key = kv.first.as<std::string>();
            if (!current().seen.count(key)) {
                throw ConfigError("config: unknown key '" + join_path(path_, key) + "'" + where(kv.first));
            }
        }
    }

    static void read(const YAML::Node& n, double& v) { v = n.as<double>(); }
    static void read(const YAML::Node& n, int& v) { v = n.as<int>(); }
    static void read(const YAML::Node& n, long long& v) { v = n.as<long long>(); }
    static void read(const YAML::Node& n, std::uint64_t& v) { v = n.as<std::uint64_t>(); }
    static void read(const YAML::Node& n, bool& v) { v = n.as<bool>(); }
    static void read(const YAML::Node& n, std::string& v) { v = n.as<std::string>(); }
    static void read(const YAML::Node& n, std::vector<int>& v) { v = n.as<std::vector<int>>(); }
    static void read(const YAML::Node& n, Vec3& v) {
        const auto xs = n.as<std::vector<double>>();
        if (xs.size() != 3) throw ConfigError("expected 3 numbers");
        v = Vec3(xs[0], xs[1], xs[2]);
    }
    static void read(const YAML::Node& n, rl::Observation& v) {
        const auto xs = n.as<std::vector<double>>();
        if (xs.size() != static_cast<std::size_t>(rl::kObsDim)) throw ConfigError("expected 9 numbers");
        for (int i = 0; i < rl::kObsDim; ++i) v[i] = xs[static_cast<std::size_t>(i)];
    }
    static void read(const YAML::Node& n, std::array<Vec3, 2>& v) {
        if (!n.IsSequence() || n.size() != 2) throw ConfigError("expected two 3-vectors");
        read(n[0], v[0]);
        read(n[1], v[1]);
    }

    std::vector<Frame> stack_;
    std::vector<std::string> path_;
};

class Writer {
public:
    Writer() {
        out_.SetDoublePrecision(17);
        out_ << YAML::BeginMap;
    }

    void section(const std::string& name, const std::function<void()>& body) {
        out_ << YAML::Key << name << YAML::Value << YAML::BeginMap;
        body();
        out_ << YAML::EndMap;
    }

    template <typename T>
    void field(const std::string& name, const T& value) {
        out_ << YAML::Key << name << YAML::Value;
        write(value);
    }

    std::string finish() {
        out_ << YAML::EndMap;
        return std::string(out_.c_str()) + "\n";
    }

private:
    template <typename T>
    void write(const T& v) { out_ << v; }
    void write(const std::uint64_t& v) { out_ << static_cast<unsigned long long>(v); }
    void write(const std::vector<int>& v) {
        out_ << YAML::Flow << YAML::BeginSeq;
        for (int x : v) out_ << x;
        out_ << YAML::EndSeq;
    }
    void write(const Vec3& v) {
        out_ << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << v.z() << YAML::EndSeq;
    }
    void write(const rl::Observation& v) {
        out_ << YAML::Flow << YAML::BeginSeq;
        for (int i = 0; i < rl::kObsDim; ++i) out_ << v[i];
        out_ << YAML::EndSeq;
    }
    void write(const std::array<Vec3, 2>& v) {
        out_ << YAML::Flow << YAML::BeginSeq;
        for (const Vec3& p : v) out_ << YAML::Flow << YAML::BeginSeq << p.x() << p.y() << p.z() << YAML::EndSeq;
        out_ << YAML::EndSeq;
    }

    YAML::Emitter out_;
};

template <typename V>
void pid(V& v, const std::string& name, control::PidGains& g) {
    v.section(name, [&] {
        v.field("kp", g.kp);
        v.field("ki", g.ki);
        v.field("kd", g.kd);
        v.field("output_limit", g.output_limit);
        v.field("integrator_limit", g.integrator_limit);
    });
}

// Single listing of every key, shared by the reader and the writer. Angles
// are in radians so values round-trip exactly.
template <typename V>
void visit(V& v, RunConfig& c) {
    v.field("seed", c.seed);
    v.field("output_dir", c.output_dir);
    v.section("drone", [&] {
        auto& d = c.env.drone;
        v.field("mass", d.mass);
        v.field("inertia", d.inertia);
        v.field("arm_length", d.arm_length);
        v.field("max_motor_thrust", d.max_motor_thrust);
        v.field("yaw_torque_coeff", d.yaw_torque_coeff);
        v.field("linear_drag", d.linear_drag);
        v.field("gravity", d.gravity);
    });
    v.section("control", [&] {
        auto& g = c.env.gains;
        pid(v, "velocity_xy", g.velocity_xy);
        pid(v, "velocity_z", g.velocity_z);
        pid(v, "attitude_rp", g.attitude_rp);
        pid(v, "attitude_yaw", g.attitude_yaw);
        pid(v, "rate_rp", g.rate_rp);
        pid(v, "rate_yaw", g.rate_yaw);
        v.field("max_tilt", g.max_tilt);
        v.field("max_speed", g.max_speed);
    });
    v.section("gear", [&] {
        auto& p = c.env.platform;
        v.field("body_mass", p.body_mass);
        v.field("com_offset", p.com_offset);
        v.field("hip_half_span", c.hip_half_span);
        v.field("coxa", c.leg.coxa);
        v.field("femur", c.leg.femur);
        v.field("tibia", c.leg.tibia);
        v.field("stance_reach", c.leg.stance_reach);
        v.field("stance_depth", c.leg.stance_depth);
        v.field("max_lift", c.leg.max_lift);
        v.field("leg_stiffness", p.leg_stiffness);
        v.field("settle_ticks", p.settle_ticks);
        v.field("stable_ticks", p.stable_ticks);
        v.field("max_tilt", p.max_tilt);
        v.field("pad_centers", p.pad_centers);
        v.field("pad_radius", p.pad_radius);
        v.field("deck_radius", p.deck_radius);
        v.field("max_ticks", c.env.gear_max_ticks);
        v.field("adaptive_while_landing", c.env.gear_adaptive);
        v.section("load", [&] {
            auto& l = p.load;
            v.field("baseline", l.baseline);
            v.field("noise_sigma", l.noise_sigma);
            v.field("airborne_max", l.airborne_max);
            v.field("overload_ratio", l.overload_ratio);
            v.field("overload_min", l.overload_min);
            v.field("overload_max", l.overload_max);
            v.field("motion_min", l.motion_min);
            v.field("motion_max", l.motion_max);
        });
    });
    v.section("terrain", [&] {
        auto& t = c.env.terrain;
        v.field("half_extent", t.half_extent);
        v.field("cell_size", t.cell_size);
        v.field("block_half_size", t.block_half_size);
        v.field("max_step", t.max_step);
    });
    v.section("scenario", [&] {
        auto& e = c.env;
        v.field("physics_dt", e.physics_dt);
        v.field("substeps", e.substeps);
        v.field("spacing", e.spacing);
        v.field("start_distance", e.start_distance);
        v.field("start_altitude", e.start_altitude);
        v.field("start_jitter", e.start_jitter);
        v.field("takeoff_speed", e.takeoff_speed);
        v.field("takeoff_duration", e.takeoff_duration);
        v.field("rest_offset", e.rest_offset);
        v.field("horizon_set", e.horizon_set);
        v.field("horizon_hold", e.horizon_hold);
        v.field("hold_offset", e.hold_offset);
        v.field("crash_penalty", e.crash_penalty);
        v.field("bounds_half_extent", e.bounds_half_extent);
        v.field("ceiling", e.ceiling);
        v.field("min_separation", e.min_separation);
        v.field("observation_scale", e.obs_scale.scale);
        v.section("touchdown", [&] {
            v.field("max_gap", e.touchdown.max_gap);
            v.field("max_descent", e.touchdown.max_descent);
            v.field("max_horizontal", e.touchdown.max_horizontal);
        });
        v.section("relocation", [&] {
            v.field("dx", e.relocation.dx);
            v.field("dy", e.relocation.dy);
            v.field("max_speed", e.relocation.max_speed);
            v.field("acceleration", e.relocation.acceleration);
        });
    });
    v.section("reward", [&] {
        auto& r = c.env.reward;
        v.field("alpha", r.alpha);
        v.field("beta", r.beta);
        v.field("control", r.control);
        v.field("proximity_bonus", r.proximity_bonus);
        v.field("proximity_threshold", r.proximity_threshold);
    });
    v.section("policy", [&] {
        v.field("hidden", c.policy.hidden);
        v.field("initial_log_std", c.policy.initial_log_std);
    });
    v.section("ppo", [&] {
        auto& p = c.ppo;
        v.field("clip", p.clip);
        v.field("discount", p.discount);
        v.field("gae_lambda", p.gae_lambda);
        v.field("epochs", p.epochs);
        v.field("minibatch", p.minibatch);
        v.field("learning_rate", p.learning_rate);
        v.field("value_coeff", p.value_coeff);
        v.field("entropy_coeff", p.entropy_coeff);
        v.field("max_grad_norm", p.max_grad_norm);
        v.field("target_kl", p.target_kl);
        v.field("adam_beta1", p.adam_beta1);
        v.field("adam_beta2", p.adam_beta2);
        v.field("adam_epsilon", p.adam_epsilon);
    });
    v.section("train", [&] {
        auto& t = c.train;
        v.field("total_steps", t.total_steps);
        v.field("rollout_steps", t.rollout_steps);
        v.field("workers", t.workers);
        v.field("promotion_threshold", t.promotion_threshold);
        v.field("promotion_window", t.promotion_window);
        v.field("uneven_fraction", t.uneven_fraction);
        v.field("start_jitter", t.start_jitter);
        v.field("checkpoint_interval", t.checkpoint_interval);
        v.field("anneal_learning_rate", t.anneal_learning_rate);
    });
    v.section("eval", [&] { v.field("trials", c.eval.trials); });
}

}  // namespace

void TrainConfig::validate() const {
    if (total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
    if (rollout_steps < 1) throw ConfigError("train.rollout_steps must be >= 1");
    if (workers < 1) throw ConfigError("train.workers must be >= 1");
    if (promotion_window < 20) throw ConfigError("train.promotion_window must be >= 20 episodes");
    if (!(uneven_fraction >= 0.0 && uneven_fraction <= 1.0)) throw ConfigError("train.uneven_fraction must lie in [0, 1]");
    if (!(start_jitter >= 0.0)) throw ConfigError("train.start_jitter must be >= 0");
    if (checkpoint_interval < 1) throw ConfigError("train.checkpoint_interval must be >= 1");
}

void EvalConfig::validate() const {
    if (trials < 1) throw ConfigError("eval.trials must be >= 1");
}

void RunConfig::finalize() {
    env.platform.legs = gear::default_legs(hip_half_span);
    for (auto& l : env.platform.legs) {
        l.coxa = leg.coxa;
        l.femur = leg.femur;
        l.tibia = leg.tibia;
        l.stance_reach = leg.stance_reach;
        l.stance_depth = leg.stance_depth;
        l.max_lift = leg.max_lift;
    }
    if (!(hip_half_span > 0.0)) throw ConfigError("gear.hip_half_span must be > 0");
    env.discount = ppo.discount;
    policy.action_scale = env.gains.max_speed;
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    env.validate();
    (void)env.prepared();
    policy.validate();
    ppo.validate();
    train.validate();
    eval.validate();
}

RunConfig parse_run_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig c;
    if (root.IsNull()) {
        c.finalize();
        return c;
    }
    if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
    Reader r(root);
    visit(r, c);
    r.finish();
    c.finalize();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
    RunConfig c = cfg;
    Writer w;
    visit(w, c);
    return w.finish();
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config " + path);
    out << serialize_run_config(cfg);
}

}  // namespace morpho::harness
