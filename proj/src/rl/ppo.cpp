#include "morpholander/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace morpho::rl {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}

void RolloutBuffer::clear() {
    observations.clear();
    actions.clear();
    log_probs.clear();
    rewards.clear();
    values.clear();
    dones.clear();
    terminals.clear();
    bootstrap_values.clear();
    advantages.clear();
    returns.clear();
}

void RolloutBuffer::add(const Observation& obs, const Vec3& action, double log_prob, double reward,
                        double value, bool done, bool terminal, double bootstrap_value) {
    observations.push_back(obs);
    actions.push_back(action);
    log_probs.push_back(log_prob);
    rewards.push_back(reward);
    values.push_back(value);
    dones.push_back(done ? 1 : 0);
    terminals.push_back(terminal ? 1 : 0);
    bootstrap_values.push_back(bootstrap_value);
}

void RolloutBuffer::append(const RolloutBuffer& o) {
    auto cat = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    cat(observations, o.observations);
    cat(actions, o.actions);
    cat(log_probs, o.log_probs);
    cat(rewards, o.rewards);
    cat(values, o.values);
    cat(dones, o.dones);
    cat(terminals, o.terminals);
    cat(bootstrap_values, o.bootstrap_values);
    cat(advantages, o.advantages);
    cat(returns, o.returns);
}

void compute_gae(RolloutBuffer& b, double discount, double lambda) {
    const std::size_t n = b.size();
    if (b.values.size() != n || b.dones.size() != n || b.terminals.size() != n || b.bootstrap_values.size() != n) {
        throw ConfigError("compute_gae: buffer columns have different lengths");
    }
    if (n > 0 && !b.dones.back()) throw ConfigError("compute_gae: last step must close its segment");
    b.advantages.assign(n, 0.0);
    b.returns.assign(n, 0.0);
    double next_adv = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        double next_value;
        if (b.dones[k]) {
            next_value = b.terminals[k] ? 0.0 : b.bootstrap_values[k];
            next_adv = 0.0;
        } else {
            next_value = b.values[k + 1];
        }
        const double delta = b.rewards[k] + discount * next_value - b.values[k];
        const double adv = delta + discount * lambda * next_adv;
        b.advantages[k] = adv;
        b.returns[k] = adv + b.values[k];
        next_adv = adv;
    }
}

void normalize_advantages(RolloutBuffer& b) {
    const std::size_t n = b.advantages.size();
    if (n == 0) return;
    const double mean = std::accumulate(b.advantages.begin(), b.advantages.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : b.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (double& a : b.advantages) a = (a - mean) * inv;
    // One correction pass removes the rounding residue of the first.
    const double residue = std::accumulate(b.advantages.begin(), b.advantages.end(), 0.0) / static_cast<double>(n);
    for (double& a : b.advantages) a -= residue;
}

void PpoConfig::validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo.clip must lie in (0, 1)");
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("ppo.discount must lie in (0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda must lie in [0, 1]");
    if (epochs < 1) throw ConfigError("ppo.epochs must be >= 1");
    if (minibatch < 1) throw ConfigError("ppo.minibatch must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate must be > 0");
    if (!(target_kl >= 0.0)) throw ConfigError("ppo.target_kl must be >= 0");
    if (!(value_coeff >= 0.0 && entropy_coeff >= 0.0 && max_grad_norm >= 0.0)) {
        throw ConfigError("ppo coefficients must be >= 0");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_epsilon > 0.0)) {
        throw ConfigError("ppo adam parameters out of range");
    }
}

PpoBatch make_batch(const RolloutBuffer& b, const std::vector<std::size_t>& idx) {
    if (b.advantages.size() != b.size() || b.returns.size() != b.size()) {
        throw ConfigError("make_batch: advantages not computed");
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    PpoBatch out;
    out.obs.resize(kObsDim, n);
    out.actions.resize(kActDim, n);
    out.old_log_probs.resize(n);
    out.advantages.resize(n);
    out.returns.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const std::size_t i = idx[static_cast<std::size_t>(j)];
        out.obs.col(j) = b.observations[i];
        out.actions.col(j) = b.actions[i];
        out.old_log_probs[j] = b.log_probs[i];
        out.advantages[j] = b.advantages[i];
        out.returns[j] = b.returns[i];
    }
    return out;
}

PpoBatch make_batch(const RolloutBuffer& b) {
    std::vector<std::size_t> idx(b.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return make_batch(b, idx);
}

LossBreakdown ppo_loss(const PolicyParams& params, const PpoBatch& batch, const PpoConfig& cfg,
                       Eigen::VectorXd* grad) {
    const Eigen::Index n = batch.size();
    if (n == 0) throw ConfigError("ppo_loss: empty batch");
    const int act = params.arch.act_dim;
    const BatchForward fwd = forward_batch(params, batch.obs);
    const Eigen::ArrayXd inv_std = (-fwd.log_std.array()).exp();
    const double inv_n = 1.0 / static_cast<double>(n);

    // z = (a - mean) / std per dimension and sample.
    const Eigen::ArrayXXd z = (batch.actions - fwd.mean).array().colwise() * inv_std;
    const Eigen::ArrayXd log_prob =
        (-0.5 * z.square()).colwise().sum().transpose() - fwd.log_std.sum() - act * kLogSqrt2Pi;
    const Eigen::ArrayXd log_ratio = log_prob - batch.old_log_probs.array();
    const Eigen::ArrayXd ratio = log_ratio.exp();
    const Eigen::ArrayXd adv = batch.advantages.array();
    const Eigen::ArrayXd surr1 = ratio * adv;
    const Eigen::ArrayXd surr2 = ratio.min(1.0 + cfg.clip).max(1.0 - cfg.clip) * adv;

    LossBreakdown out;
    out.policy = -surr1.min(surr2).mean();
    const Eigen::ArrayXd verr = fwd.value.transpose().array() - batch.returns.array();
    out.value = verr.square().mean();
    out.entropy = fwd.log_std.sum() + act * (0.5 + kLogSqrt2Pi);
    out.total = out.policy + cfg.value_coeff * out.value - cfg.entropy_coeff * out.entropy;
    out.mean_ratio = ratio.mean();
    out.max_ratio_deviation = (ratio - 1.0).abs().maxCoeff();
    out.clip_fraction = ((ratio - 1.0).abs() > cfg.clip).cast<double>().mean();
    out.approx_kl = ((ratio - 1.0) - log_ratio).mean();

    if (grad) {
        // dL/dlogp: only samples on the unclipped branch contribute.
        const Eigen::ArrayXd d_logp = (surr1 <= surr2).select(-inv_n * adv * ratio, 0.0);
        Eigen::MatrixXd d_mean = (z.colwise() * inv_std).rowwise() * d_logp.transpose();
        Eigen::VectorXd d_log_std = ((z.square() - 1.0).rowwise() * d_logp.transpose()).rowwise().sum();
        d_log_std.array() -= cfg.entropy_coeff;
        const Eigen::RowVectorXd d_value = (2.0 * cfg.value_coeff * inv_n * verr).matrix().transpose();
        grad->setZero(params.theta.size());
        backward_batch(params, fwd, d_mean, d_log_std, d_value, *grad);
    }
    return out;
}

void AdamState::reset(std::size_t n) {
    m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    step = 0;
}

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& s, const PpoConfig& cfg) {
    if (s.m.size() != theta.size()) s.reset(static_cast<std::size_t>(theta.size()));
    ++s.step;
    s.m = cfg.adam_beta1 * s.m + (1.0 - cfg.adam_beta1) * grad;
    s.v = cfg.adam_beta2 * s.v + (1.0 - cfg.adam_beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(s.step));
    theta.array() -= cfg.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + cfg.adam_epsilon);
}

PpoStats ppo_update(const RolloutBuffer& buffer, PolicyParams& params, AdamState& adam, const PpoConfig& cfg,
                    std::mt19937_64& rng) {
    cfg.validate();
    PpoStats stats;
    const std::size_t n = buffer.size();
    if (n == 0) return stats;
    const PolicyParams saved_params = params;
    const AdamState saved_adam = adam;
    auto abort = [&](const std::string& why) {
        params = saved_params;
        adam = saved_adam;
        stats.aborted = true;
        stats.diagnostic = why;
        return stats;
    };

    stats.initial_ratio_deviation = ppo_loss(params, make_batch(buffer), cfg, nullptr).max_ratio_deviation;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto mb = static_cast<std::size_t>(cfg.minibatch);
    Eigen::VectorXd grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_kl = 0.0;
        int epoch_batches = 0;
        for (std::size_t start = 0; start < n; start += mb) {
            const std::size_t end = std::min(n, start + mb);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));
            const PpoBatch batch = make_batch(buffer, idx);
            const LossBreakdown loss = ppo_loss(params, batch, cfg, &grad);
            if (!std::isfinite(loss.total) || !grad.allFinite()) {
                std::ostringstream os;
                os << "non-finite PPO loss at epoch " << epoch << ", minibatch " << start / mb
                   << " (policy " << loss.policy << ", value " << loss.value << ")";
                return abort(os.str());
            }
            if (cfg.max_grad_norm > 0.0) {
                const double norm = grad.norm();
                if (norm > cfg.max_grad_norm) grad *= cfg.max_grad_norm / norm;
            }
            adam_step(params.theta, grad, adam, cfg);
            try {
                params.project();
            } catch (const NonFiniteError& e) {
                return abort(e.what());
            }
            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.mean_ratio += loss.mean_ratio;
            stats.clip_fraction += loss.clip_fraction;
            stats.approx_kl += loss.approx_kl;
            ++stats.minibatches;
            epoch_kl += loss.approx_kl;
            ++epoch_batches;
        }
        ++stats.epochs;
        if (cfg.target_kl > 0.0 && epoch_kl / epoch_batches > cfg.target_kl) break;
    }
    const double k = 1.0 / static_cast<double>(stats.minibatches);
    stats.policy_loss *= k;
    stats.value_loss *= k;
    stats.entropy *= k;
    stats.mean_ratio *= k;
    stats.clip_fraction *= k;
    stats.approx_kl *= k;
    return stats;
}

void ReturnWindow::push(double r) {
    values_.push_back(r);
    while (values_.size() > capacity_) values_.pop_front();
}

double ReturnWindow::mean() const {
    if (values_.empty()) return 0.0;
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

}  // namespace morpho::rl
