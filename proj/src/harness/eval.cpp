#include "morpholander/harness/run.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace morpho::harness {

namespace {

constexpr int kCsvColumns = 18;

void write_row(std::ostream& out, int trial, int drone, double t, const Vec3& p, const Vec3& v, const Vec3& a,
               const Vec3& u, double reward, const char* phase) {
    char buf[768];
    std::snprintf(buf, sizeof buf,
                  "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n",
                  trial, drone, t, p.x(), p.y(), p.z(), v.x(), v.y(), v.z(), a.x(), a.y(), a.z(), u.x(), u.y(),
                  u.z(), reward, phase);
    out << buf;
}

void write_drone_row(std::ostream& out, int trial, int drone, const env::World& w, double reward,
                     const char* phase) {
    const auto& d = w.drones[static_cast<std::size_t>(drone)];
    write_row(out, trial, drone, w.time, d.body.position, d.body.velocity, d.body.acceleration, d.command, reward,
              phase);
}

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double json_double(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

env::Outcome parse_outcome(const std::string& s) {
    if (s == "touchdown") return env::Outcome::Touchdown;
    if (s == "crash") return env::Outcome::Crash;
    if (s == "timeout") return env::Outcome::Timeout;
    return env::Outcome::Flying;
}

}  // namespace

EvalSummary summarize(env::Scenario scenario, std::vector<TrialResult> results) {
    EvalSummary s;
    s.scenario = scenario;
    s.trials = static_cast<int>(results.size());
    std::vector<double> shifts;
    double return_sum = 0.0;
    for (const auto& t : results) {
        if (!t.valid) continue;
        ++s.valid_trials;
        for (const auto& d : t.drones) {
            ++s.attempts;
            return_sum += d.discounted_return;
            switch (d.outcome) {
                case env::Outcome::Touchdown:
                    ++s.touchdowns;
                    shifts.push_back(d.shift_cm);
                    if (d.on_pad) ++s.pad_hits;
                    break;
                case env::Outcome::Crash: ++s.crashes; break;
                case env::Outcome::Timeout: ++s.timeouts; break;
                case env::Outcome::Flying: break;
            }
        }
    }
    s.success_rate = s.attempts ? static_cast<double>(s.pad_hits) / s.attempts : 0.0;
    if (shifts.empty()) {
        s.mean_shift_cm = std::numeric_limits<double>::quiet_NaN();
        s.std_shift_cm = std::numeric_limits<double>::quiet_NaN();
    } else {
        double sum = 0.0;
        for (double x : shifts) sum += x;
        s.mean_shift_cm = sum / static_cast<double>(shifts.size());
        s.std_shift_cm = sample_std(shifts, s.mean_shift_cm);
    }
    s.mean_return = s.attempts ? return_sum / s.attempts : 0.0;
    s.results = std::move(results);
    return s;
}

std::string trajectory_csv_header() {
    return "trial,drone,t,x,y,z,vx,vy,vz,ax,ay,az,ux,uy,uz,reward,phase";
}

EvalSummary evaluate(const RunConfig& cfg, const rl::PolicyParams& params, env::Scenario scenario, int trials,
                     std::ostream* out) {
    if (params.arch.obs_dim != cfg.policy.obs_dim || params.arch.act_dim != cfg.policy.act_dim ||
        params.arch.hidden != cfg.policy.hidden) {
        throw ConfigError("checkpoint architecture does not match the config policy section");
    }
    if (trials < 1) throw ConfigError("eval: trials must be >= 1");
    const env::EnvConfig ec = cfg.env.prepared();
    if (out) *out << trajectory_csv_header() << '\n';
    std::vector<TrialResult> results;
    for (int t = 0; t < trials; ++t) {
        TrialResult tr;
        tr.trial = t;
        tr.seed = derive_seed(cfg.seed, {0xE7A1, static_cast<std::uint64_t>(scenario), static_cast<std::uint64_t>(t)});
        env::World w;
        try {
            w = env::reset(scenario, ec, tr.seed, rl::CurriculumStage::PositionSet);
            env::run_until_landing(w, [&](const env::StepRecord& rec) {
                if (!out) return;
                for (int i = 0; i < env::kDrones; ++i) write_drone_row(*out, t, i, w, 0.0, env::phase_name(rec.phase));
            });
            while (w.phase != env::Phase::Finished) {
                std::array<Vec3, env::kDrones> actions{Vec3::Zero(), Vec3::Zero()};
                for (int i = 0; i < env::kDrones; ++i) {
                    if (w.drones[static_cast<std::size_t>(i)].outcome != env::Outcome::Flying) continue;
                    actions[static_cast<std::size_t>(i)] =
                        rl::policy_forward(params, ec.obs_scale.apply(env::observation(w, i))).mean;
                }
                const env::StepRecord rec = env::env_step(w, actions);
                if (!out) continue;
                for (int i = 0; i < env::kDrones; ++i) {
                    const auto k = static_cast<std::size_t>(i);
                    if (!rec.active[k]) continue;
                    const auto& d = w.drones[k];
                    if (rec.done[k]) {
                        const Vec3 pad = d.outcome == env::Outcome::Touchdown ? d.touchdown_pad
                                                                               : env::pad_pose(w, d.pad).center;
                        write_row(*out, t, i, w.time, pad, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), 0.0, "pad");
                    }
                    write_drone_row(*out, t, i, w, rec.rewards[k], rec.done[k] ? env::outcome_name(d.outcome) : "landing");
                }
            }
        } catch (const env::EpisodeInvalid& e) {
            tr.valid = false;
            tr.invalid_reason = e.what();
            if (out) {
                write_row(*out, t, -1, 0.0, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), 0.0, "invalid");
            }
            results.push_back(tr);
            continue;
        }
        tr.platform_tilt_deg = rad2deg(w.platform.pose.tilt());
        tr.gear_ticks = w.stabilize_ticks;
        tr.min_separation = w.min_separation_seen;
        tr.near_misses = w.near_misses;
        for (int i = 0; i < env::kDrones; ++i) {
            const auto& d = w.drones[static_cast<std::size_t>(i)];
            DroneResult& r = tr.drones[static_cast<std::size_t>(i)];
            r.outcome = d.outcome;
            r.crash_reason = d.crash_reason;
            r.touchdown = d.outcome == env::Outcome::Touchdown ? d.touchdown : d.body.position;
            r.pad_center = d.outcome == env::Outcome::Touchdown ? d.touchdown_pad : env::pad_pose(w, d.pad).center;
            r.shift_cm = d.outcome == env::Outcome::Touchdown ? d.shift_cm : 0.0;
            r.on_pad = d.on_pad;
            r.discounted_return = rl::discounted_return(d.rewards, cfg.ppo.discount);
            // Scoring invariant: on-pad exactly when the shift is within the pad radius.
            if (d.outcome == env::Outcome::Touchdown && r.on_pad != (r.shift_cm <= 100.0 * ec.platform.pad_radius)) {
                throw std::logic_error("landed-on-pad flag disagrees with the landing shift");
            }
        }
        results.push_back(tr);
    }
    if (out) out->flush();
    return summarize(scenario, std::move(results));
}

std::string metrics_json(const EvalSummary& s, const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["scenario"] = env::scenario_name(s.scenario);
    j["seed"] = cfg.seed;
    j["trials"] = s.trials;
    j["valid_trials"] = s.valid_trials;
    j["attempts"] = s.attempts;
    j["touchdowns"] = s.touchdowns;
    j["pad_hits"] = s.pad_hits;
    j["crashes"] = s.crashes;
    j["timeouts"] = s.timeouts;
    j["success_rate"] = s.success_rate;
    j["mean_shift_cm"] = number_or_null(s.mean_shift_cm);
    j["std_shift_cm"] = number_or_null(s.std_shift_cm);
    j["mean_discounted_return"] = s.mean_return;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& t : s.results) {
        nlohmann::ordered_json tj;
        tj["trial"] = t.trial;
        tj["seed"] = t.seed;
        tj["valid"] = t.valid;
        if (!t.valid) {
            tj["invalid_reason"] = t.invalid_reason;
            per.push_back(tj);
            continue;
        }
        tj["platform_tilt_deg"] = t.platform_tilt_deg;
        tj["gear_ticks"] = t.gear_ticks;
        tj["min_separation_m"] = t.min_separation;
        tj["near_misses"] = t.near_misses;
        nlohmann::ordered_json drones = nlohmann::ordered_json::array();
        for (const auto& d : t.drones) {
            nlohmann::ordered_json dj;
            dj["outcome"] = env::outcome_name(d.outcome);
            if (d.outcome == env::Outcome::Crash) dj["crash_reason"] = d.crash_reason;
            dj["shift_cm"] = d.shift_cm;
            dj["on_pad"] = d.on_pad;
            dj["discounted_return"] = d.discounted_return;
            drones.push_back(dj);
        }
        tj["drones"] = drones;
        per.push_back(tj);
    }
    j["per_trial"] = per;
    return j.dump(2) + "\n";
}

EvalSummary replay_trajectory(const std::string& csv, const RunConfig& cfg) {
    struct DroneLog {
        std::vector<double> rewards;
        bool has_pad = false;
        Vec3 pad = Vec3::Zero();
        bool finished = false;
        env::Outcome outcome = env::Outcome::Flying;
        Vec3 end = Vec3::Zero();
        int last_line = 0;
    };
    struct TrialLog {
        bool invalid = false;
        std::map<int, DroneLog> drones;
        int last_line = 0;
    };
    std::map<int, TrialLog> trials;
    std::istringstream in(csv);
    std::string line;
    int number = 0;
    auto fail = [&](const std::string& what) -> void {
        throw ConfigError("trajectory line " + std::to_string(number) + ": " + what);
    };
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != trajectory_csv_header()) fail("expected header '" + trajectory_csv_header() + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cols.push_back(cell);
        if (!line.empty() && line.back() == ',') cols.emplace_back();
        if (static_cast<int>(cols.size()) != kCsvColumns - 1) {
            fail("expected 17 columns, found " + std::to_string(cols.size()));
        }
        int ints[2];
        for (int k = 0; k < 2; ++k) {
            std::size_t used = 0;
            try {
                ints[k] = std::stoi(cols[static_cast<std::size_t>(k)], &used);
            } catch (const std::exception&) {
                used = std::string::npos;
            }
            if (used != cols[static_cast<std::size_t>(k)].size()) fail("bad integer '" + cols[static_cast<std::size_t>(k)] + "'");
        }
        double v[14];
        for (int k = 0; k < 14; ++k) {
            const std::string& c = cols[static_cast<std::size_t>(k + 2)];
            char* end = nullptr;
            v[k] = std::strtod(c.c_str(), &end);
            if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v[k])) fail("bad number '" + c + "'");
        }
        const std::string& phase = cols[16];
        const int trial = ints[0];
        const int drone = ints[1];
        if (trial < 0) fail("negative trial index");
        TrialLog& tl = trials[trial];
        tl.last_line = number;
        if (phase == "invalid") {
            if (drone != -1) fail("invalid-trial row must use drone -1");
            tl.invalid = true;
            continue;
        }
        if (drone < 0 || drone >= env::kDrones) fail("drone index out of range");
        DroneLog& dl = tl.drones[drone];
        dl.last_line = number;
        const Vec3 pos(v[1], v[2], v[3]);
        if (phase == "takeoff" || phase == "relocate") continue;
        if (dl.finished) fail("row after the drone's terminal row");
        if (phase == "pad") {
            dl.has_pad = true;
            dl.pad = pos;
            continue;
        }
        if (phase == "landing") {
            dl.rewards.push_back(v[13]);
            continue;
        }
        const env::Outcome o = parse_outcome(phase);
        if (o == env::Outcome::Flying) fail("unknown phase '" + phase + "'");
        if (!dl.has_pad) fail("terminal row without a preceding pad row");
        dl.rewards.push_back(v[13]);
        dl.finished = true;
        dl.outcome = o;
        dl.end = pos;
    }
    if (!header_seen) throw ConfigError("trajectory line 1: empty file");

    const env::EnvConfig ec = cfg.env.prepared();
    std::vector<TrialResult> results;
    for (const auto& [index, tl] : trials) {
        TrialResult tr;
        tr.trial = index;
        if (tl.invalid) {
            tr.valid = false;
            results.push_back(tr);
            continue;
        }
        for (int i = 0; i < env::kDrones; ++i) {
            auto it = tl.drones.find(i);
            if (it == tl.drones.end() || !it->second.finished) {
                number = it == tl.drones.end() ? tl.last_line : it->second.last_line;
                fail("trial " + std::to_string(index) + " drone " + std::to_string(i) + " has no terminal row");
            }
            const DroneLog& dl = it->second;
            DroneResult& r = tr.drones[static_cast<std::size_t>(i)];
            r.outcome = dl.outcome;
            r.touchdown = dl.end;
            r.pad_center = dl.pad;
            if (dl.outcome == env::Outcome::Touchdown) {
                r.shift_cm = env::landing_shift(dl.end, dl.pad);
                r.on_pad = r.shift_cm <= 100.0 * ec.platform.pad_radius;
            }
            r.discounted_return = rl::discounted_return(dl.rewards, cfg.ppo.discount);
        }
        results.push_back(tr);
    }
    return summarize(env::Scenario::EvenStatic, std::move(results));
}

ReplayComparison compare_metrics(const EvalSummary& s, const std::string& text, double tol) {
    ReplayComparison c;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("metrics: ") + e.what());
    }
    auto check = [&](const std::string& what, double expected, double actual) {
        if (std::isnan(expected) && std::isnan(actual)) return;
        const double err = std::abs(expected - actual);
        if (!(err <= tol)) {
            c.match = false;
            c.mismatches.push_back(what + ": summary " + std::to_string(expected) + ", replay " + std::to_string(actual));
        }
        if (std::isfinite(err)) c.max_abs_error = std::max(c.max_abs_error, err);
    };
    auto check_int = [&](const std::string& what, long long expected, long long actual) {
        if (expected != actual) {
            c.match = false;
            c.mismatches.push_back(what + ": summary " + std::to_string(expected) + ", replay " + std::to_string(actual));
        }
    };
    try {
        check_int("trials", j.at("trials").get<long long>(), s.trials);
        check_int("valid_trials", j.at("valid_trials").get<long long>(), s.valid_trials);
        check_int("touchdowns", j.at("touchdowns").get<long long>(), s.touchdowns);
        check_int("pad_hits", j.at("pad_hits").get<long long>(), s.pad_hits);
        check_int("crashes", j.at("crashes").get<long long>(), s.crashes);
        check_int("timeouts", j.at("timeouts").get<long long>(), s.timeouts);
        check("success_rate", j.at("success_rate").get<double>(), s.success_rate);
        check("mean_shift_cm", json_double(j.at("mean_shift_cm")), s.mean_shift_cm);
        check("std_shift_cm", json_double(j.at("std_shift_cm")), s.std_shift_cm);
        check("mean_discounted_return", j.at("mean_discounted_return").get<double>(), s.mean_return);
        const auto& per = j.at("per_trial");
        check_int("per_trial entries", static_cast<long long>(per.size()), static_cast<long long>(s.results.size()));
        for (std::size_t t = 0; t < std::min(per.size(), s.results.size()); ++t) {
            const auto& tj = per[t];
            const auto& tr = s.results[t];
            if (!tj.at("valid").get<bool>() || !tr.valid) {
                check_int("trial " + std::to_string(t) + " valid", tj.at("valid").get<bool>(), tr.valid);
                continue;
            }
            for (std::size_t i = 0; i < env::kDrones; ++i) {
                const auto& dj = tj.at("drones").at(i);
                const auto& d = tr.drones[i];
                const std::string tag = "trial " + std::to_string(t) + " drone " + std::to_string(i);
                if (dj.at("outcome").get<std::string>() != env::outcome_name(d.outcome)) {
                    c.match = false;
                    c.mismatches.push_back(tag + " outcome differs");
                }
                check(tag + " shift_cm", dj.at("shift_cm").get<double>(), d.shift_cm);
                check_int(tag + " on_pad", dj.at("on_pad").get<bool>(), d.on_pad);
                check(tag + " discounted_return", dj.at("discounted_return").get<double>(), d.discounted_return);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("metrics: missing or malformed field: ") + e.what());
    }
    return c;
}

}  // namespace morpho::harness
