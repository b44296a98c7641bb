#include "morpholander/rl/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace morpho::rl {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_vector(std::ostream& out, const char* key, const Eigen::VectorXd& v) {
    out << key << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << fmt(v[i]);
    out << '\n';
}

struct Line {
    int number = 0;
    std::vector<std::string> tokens;
};

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("checkpoint line " + std::to_string(line) + ": " + what);
}

double to_double(const Line& l, std::size_t i) {
    if (i >= l.tokens.size()) fail(l.number, "missing value");
    const std::string& t = l.tokens[i];
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) fail(l.number, "bad number '" + t + "'");
    return v;
}

long long to_int(const Line& l, std::size_t i) {
    if (i >= l.tokens.size()) fail(l.number, "missing value");
    const std::string& t = l.tokens[i];
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(t, &used);
    } catch (const std::exception&) {
        fail(l.number, "bad integer '" + t + "'");
    }
    if (used != t.size()) fail(l.number, "bad integer '" + t + "'");
    return v;
}

Eigen::VectorXd to_vector(const Line& l) {
    const long long n = to_int(l, 1);
    if (n < 0 || l.tokens.size() != static_cast<std::size_t>(n) + 2) fail(l.number, "vector length mismatch");
    Eigen::VectorXd v(n);
    for (long long i = 0; i < n; ++i) v[i] = to_double(l, static_cast<std::size_t>(i) + 2);
    return v;
}

}  // namespace

std::string serialize_checkpoint(const TrainerState& s) {
    std::ostringstream out;
    out << "morpholander-checkpoint " << kCheckpointVersion << '\n';
    out << "obs_dim " << s.params.arch.obs_dim << '\n';
    out << "act_dim " << s.params.arch.act_dim << '\n';
    out << "hidden";
    for (int h : s.params.arch.hidden) out << ' ' << h;
    out << '\n';
    out << "action_scale " << fmt(s.params.arch.action_scale) << '\n';
    out << "initial_log_std " << fmt(s.params.arch.initial_log_std) << '\n';
    out << "stage " << stage_name(s.stage) << '\n';
    out << "samples " << s.samples << '\n';
    out << "updates " << s.updates << '\n';
    out << "episodes " << s.episodes << '\n';
    write_vector(out, "params", s.params.theta);
    out << "adam_step " << s.adam.step << '\n';
    write_vector(out, "adam_m", s.adam.m);
    write_vector(out, "adam_v", s.adam.v);
    out << "window " << s.window.capacity() << ' ' << s.window.values().size();
    for (double r : s.window.values()) out << ' ' << fmt(r);
    out << '\n';
    out << "rng " << s.rng << '\n';
    return out.str();
}

TrainerState parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::map<std::string, Line> lines;
    int number = 0;
    Line header;
    while (std::getline(in, raw)) {
        ++number;
        std::istringstream ls(raw);
        Line l;
        l.number = number;
        std::string tok;
        while (ls >> tok) l.tokens.push_back(tok);
        if (l.tokens.empty()) continue;
        if (number == 1) {
            header = l;
            continue;
        }
        const std::string key = l.tokens.front();
        if (lines.count(key)) fail(number, "duplicate key '" + key + "'");
        lines[key] = std::move(l);
    }
    if (header.tokens.size() != 2 || header.tokens[0] != "morpholander-checkpoint") {
        fail(1, "missing 'morpholander-checkpoint <version>' header");
    }
    if (to_int(header, 1) != kCheckpointVersion) fail(1, "unsupported checkpoint version " + header.tokens[1]);
    auto get = [&](const std::string& key) -> const Line& {
        auto it = lines.find(key);
        if (it == lines.end()) fail(number, "missing key '" + key + "'");
        return it->second;
    };

    Architecture arch;
    arch.obs_dim = static_cast<int>(to_int(get("obs_dim"), 1));
    arch.act_dim = static_cast<int>(to_int(get("act_dim"), 1));
    const Line& hidden = get("hidden");
    arch.hidden.clear();
    for (std::size_t i = 1; i < hidden.tokens.size(); ++i) arch.hidden.push_back(static_cast<int>(to_int(hidden, i)));
    arch.action_scale = to_double(get("action_scale"), 1);
    arch.initial_log_std = to_double(get("initial_log_std"), 1);
    try {
        arch.validate();
    } catch (const ConfigError& e) {
        fail(get("hidden").number, e.what());
    }

    TrainerState s;
    s.params = PolicyParams(arch);
    const Line& pl = get("params");
    const Eigen::VectorXd theta = to_vector(pl);
    if (theta.size() != s.params.theta.size()) fail(pl.number, "parameter count does not match the architecture");
    if (!theta.allFinite()) fail(pl.number, "non-finite parameter");
    s.params.theta = theta;
    const Line& sl = get("stage");
    if (sl.tokens.size() != 2) fail(sl.number, "expected one stage name");
    try {
        s.stage = parse_stage(sl.tokens[1]);
    } catch (const ConfigError& e) {
        fail(sl.number, e.what());
    }
    s.samples = to_int(get("samples"), 1);
    s.updates = to_int(get("updates"), 1);
    s.episodes = to_int(get("episodes"), 1);
    s.adam.step = to_int(get("adam_step"), 1);
    s.adam.m = to_vector(get("adam_m"));
    s.adam.v = to_vector(get("adam_v"));
    if (s.adam.step > 0 && (s.adam.m.size() != theta.size() || s.adam.v.size() != theta.size())) {
        fail(get("adam_m").number, "optimizer state size does not match the parameters");
    }
    const Line& wl = get("window");
    const long long cap = to_int(wl, 1);
    const long long count = to_int(wl, 2);
    if (cap < 1 || count < 0 || count > cap || wl.tokens.size() != static_cast<std::size_t>(count) + 3) {
        fail(wl.number, "bad return window");
    }
    s.window = ReturnWindow(static_cast<std::size_t>(cap));
    for (long long i = 0; i < count; ++i) s.window.push(to_double(wl, static_cast<std::size_t>(i) + 3));
    const Line& rl = get("rng");
    std::string state;
    for (std::size_t i = 1; i < rl.tokens.size(); ++i) state += (i > 1 ? " " : "") + rl.tokens[i];
    std::istringstream rs(state);
    rs >> s.rng;
    if (rs.fail()) fail(rl.number, "bad rng state");
    return s;
}

void save_checkpoint(const TrainerState& state, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ConfigError("cannot write checkpoint " + tmp);
        out << serialize_checkpoint(state);
        if (!out) throw ConfigError("failed writing checkpoint " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw ConfigError("cannot move checkpoint into " + path);
}

TrainerState load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

}  // namespace morpho::rl
