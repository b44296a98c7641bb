#include "morpholander/rl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace morpho::rl {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

// Layer l occupies W (out x in, column-major) then b (out).
std::vector<std::size_t> layer_offsets(const std::vector<int>& sizes, std::size_t base) {
    std::vector<std::size_t> off;
    std::size_t p = base;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        off.push_back(p);
        p += static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l] + 1);
    }
    return off;
}

// Hidden layers use tanh, the last layer is linear. `acts` receives the input
// and every hidden activation.
Eigen::MatrixXd net_forward(const Eigen::VectorXd& theta, std::size_t base,
                            const std::vector<int>& sizes, const Eigen::MatrixXd& x,
                            std::vector<Eigen::MatrixXd>* acts) {
    const auto off = layer_offsets(sizes, base);
    const std::size_t layers = off.size();
    Eigen::MatrixXd h = x;
    if (acts) acts->assign(1, x);
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        Eigen::Map<const Eigen::MatrixXd> w(theta.data() + off[l], out, in);
        Eigen::Map<const Eigen::VectorXd> b(theta.data() + off[l] + static_cast<std::size_t>(out * in), out);
        Eigen::MatrixXd z = w * h;
        z.colwise() += b;
        if (l + 1 == layers) return z;
        h = z.array().tanh().matrix();
        if (acts) acts->push_back(h);
    }
    return h;
}

void net_backward(const Eigen::VectorXd& theta, std::size_t base, const std::vector<int>& sizes,
                  const std::vector<Eigen::MatrixXd>& acts, Eigen::MatrixXd d, Eigen::VectorXd& grad) {
    const auto off = layer_offsets(sizes, base);
    for (std::size_t l = off.size(); l-- > 0;) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        Eigen::Map<const Eigen::MatrixXd> w(theta.data() + off[l], out, in);
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + off[l], out, in);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + off[l] + static_cast<std::size_t>(out * in), out);
        const Eigen::MatrixXd& input = acts[l];
        gw.noalias() += d * input.transpose();
        gb += d.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = w.transpose() * d;
            d = back.array() * (1.0 - input.array().square());
        }
    }
}

}  // namespace

void Architecture::validate() const {
    if (obs_dim <= 0 || act_dim <= 0) throw ConfigError("policy: dimensions must be > 0");
    if (hidden.empty()) throw ConfigError("policy: need at least one hidden layer");
    for (int h : hidden) {
        if (h <= 0) throw ConfigError("policy: hidden sizes must be > 0");
    }
    if (!(action_scale > 0.0)) throw ConfigError("policy: action_scale must be > 0");
    if (!(initial_log_std >= kLogStdMin && initial_log_std <= kLogStdMax)) {
        throw ConfigError("policy: initial_log_std must lie in [-5, 1]");
    }
}

std::vector<int> Architecture::mean_sizes() const {
    std::vector<int> s{obs_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(act_dim);
    return s;
}

std::vector<int> Architecture::value_sizes() const {
    std::vector<int> s{obs_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(1);
    return s;
}

std::size_t net_parameter_count(const std::vector<int>& sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        n += static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l] + 1);
    }
    return n;
}

PolicyParams::PolicyParams(Architecture a) : arch(std::move(a)) {
    arch.validate();
    const std::size_t total = net_parameter_count(arch.mean_sizes()) +
                              static_cast<std::size_t>(arch.act_dim) +
                              net_parameter_count(arch.value_sizes());
    theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
    theta.segment(static_cast<Eigen::Index>(log_std_offset()), arch.act_dim).setConstant(arch.initial_log_std);
}

std::size_t PolicyParams::log_std_offset() const { return net_parameter_count(arch.mean_sizes()); }

std::size_t PolicyParams::value_offset() const {
    return log_std_offset() + static_cast<std::size_t>(arch.act_dim);
}

Eigen::VectorXd PolicyParams::log_std() const {
    return theta.segment(static_cast<Eigen::Index>(log_std_offset()), arch.act_dim)
        .cwiseMax(kLogStdMin)
        .cwiseMin(kLogStdMax);
}

void PolicyParams::project() {
    if (!theta.allFinite()) throw NonFiniteError("policy parameters became non-finite");
    auto ls = theta.segment(static_cast<Eigen::Index>(log_std_offset()), arch.act_dim);
    ls = ls.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

PolicyParams init_policy(const Architecture& arch, std::mt19937_64& rng) {
    PolicyParams p(arch);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](const std::vector<int>& sizes, std::size_t base, double last_gain) {
        const auto off = layer_offsets(sizes, base);
        for (std::size_t l = 0; l < off.size(); ++l) {
            const int in = sizes[l];
            const int out = sizes[l + 1];
            const double gain = (l + 1 == off.size()) ? last_gain : 1.0;
            const double sd = gain / std::sqrt(static_cast<double>(in));
            for (int k = 0; k < out * in; ++k) p.theta[static_cast<Eigen::Index>(off[l]) + k] = sd * normal(rng);
        }
    };
    fill(arch.mean_sizes(), p.mean_offset(), 0.01);
    fill(arch.value_sizes(), p.value_offset(), 1.0);
    return p;
}

BatchForward forward_batch(const PolicyParams& params, const Eigen::MatrixXd& obs) {
    if (obs.rows() != params.arch.obs_dim) throw ConfigError("policy: observation size mismatch");
    BatchForward f;
    const Eigen::MatrixXd z = net_forward(params.theta, params.mean_offset(), params.arch.mean_sizes(), obs, &f.mean_acts);
    f.mean_tanh = z.array().tanh().matrix();
    f.mean = params.arch.action_scale * f.mean_tanh;
    f.log_std = params.log_std();
    f.value = net_forward(params.theta, params.value_offset(), params.arch.value_sizes(), obs, &f.value_acts);
    return f;
}

void backward_batch(const PolicyParams& params, const BatchForward& fwd, const Eigen::MatrixXd& d_mean,
                    const Eigen::VectorXd& d_log_std, const Eigen::RowVectorXd& d_value,
                    Eigen::VectorXd& grad) {
    if (grad.size() != params.theta.size()) grad = Eigen::VectorXd::Zero(params.theta.size());
    const Eigen::MatrixXd d_z =
        (d_mean.array() * params.arch.action_scale * (1.0 - fwd.mean_tanh.array().square())).matrix();
    net_backward(params.theta, params.mean_offset(), params.arch.mean_sizes(), fwd.mean_acts, d_z, grad);
    const auto raw = params.theta.segment(static_cast<Eigen::Index>(params.log_std_offset()), params.arch.act_dim);
    for (int i = 0; i < params.arch.act_dim; ++i) {
        // Zero gradient where the clamp is active.
        if (raw[i] >= kLogStdMin && raw[i] <= kLogStdMax) {
            grad[static_cast<Eigen::Index>(params.log_std_offset()) + i] += d_log_std[i];
        }
    }
    net_backward(params.theta, params.value_offset(), params.arch.value_sizes(), fwd.value_acts,
                 Eigen::MatrixXd(d_value), grad);
}

PolicyOutput policy_forward(const PolicyParams& params, const Observation& obs) {
    require_finite(obs, "policy observation");
    if (params.arch.act_dim != 3 || params.arch.obs_dim != kObsDim) {
        throw ConfigError("policy: single-sample forward expects a 9 -> 3 policy");
    }
    const Eigen::MatrixXd x = obs;
    const Eigen::MatrixXd z = net_forward(params.theta, params.mean_offset(), params.arch.mean_sizes(), x, nullptr);
    const Eigen::MatrixXd v = net_forward(params.theta, params.value_offset(), params.arch.value_sizes(), x, nullptr);
    PolicyOutput out;
    out.mean = params.arch.action_scale * z.col(0).array().tanh().matrix();
    out.std = params.log_std().array().exp().matrix();
    out.value = v(0, 0);
    return out;
}

double gaussian_log_prob(const Vec3& x, const Vec3& mean, const Vec3& log_std) {
    double lp = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double z = (x[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - kLogSqrt2Pi;
    }
    return lp;
}

SampledAction action_from_noise(const Vec3& mean, const Vec3& std, double max_speed, const Vec3& eps) {
    SampledAction s;
    s.raw = mean + std.cwiseProduct(eps);
    s.action = clamp_action(s.raw, max_speed);
    s.log_prob = gaussian_log_prob(s.raw, mean, std.array().log().matrix());
    return s;
}

SampledAction sample_action(const Vec3& mean, const Vec3& std, double max_speed, std::mt19937_64& rng) {
    for (int i = 0; i < 3; ++i) {
        if (!(std[i] > 0.0)) throw ConfigError("sample_action: std must be > 0");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 eps;
    for (int i = 0; i < 3; ++i) eps[i] = normal(rng);
    return action_from_noise(mean, std, max_speed, eps);
}

}  // namespace morpho::rl
