#pragma once

// Rollout storage, generalized advantage estimation, the clipped-surrogate
// loss with its analytic gradient, and the Adam-driven update loop.

#include "morpholander/rl/policy.hpp"

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace morpho::rl {

struct RolloutBuffer {
    std::vector<Observation> observations;  // as fed to the networks (scaled)
    std::vector<Vec3> actions;              // pre-clamp samples
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<std::uint8_t> dones;        // recursion is cut after this step
    std::vector<std::uint8_t> terminals;    // true terminal, no bootstrap
    std::vector<double> bootstrap_values;   // V(s') where done and not terminal
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return rewards.size(); }
    void clear();
    void add(const Observation& obs, const Vec3& action, double log_prob, double reward, double value,
             bool done, bool terminal, double bootstrap_value);
    void append(const RolloutBuffer& other);
};

// Fills advantages and returns (advantage + value). The last step must be
// marked done; a non-terminal done bootstraps from its bootstrap value.
void compute_gae(RolloutBuffer& buffer, double discount, double lambda);

// Zero mean, unit (population) variance.
void normalize_advantages(RolloutBuffer& buffer);

struct PpoConfig {
    double clip = 0.2;
    double discount = 0.99;
    double gae_lambda = 0.95;
    int epochs = 4;
    int minibatch = 256;
    double learning_rate = 3e-4;
    double value_coeff = 0.5;
    double entropy_coeff = 0.0;
    double max_grad_norm = 0.5;  // 0 disables clipping
    double target_kl = 0.02;     // remaining epochs are skipped once an epoch's mean KL exceeds this; 0 disables
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

struct PpoBatch {
    Eigen::MatrixXd obs;          // obs_dim x B
    Eigen::MatrixXd actions;      // act_dim x B
    Eigen::VectorXd old_log_probs;
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;

    Eigen::Index size() const { return old_log_probs.size(); }
};

PpoBatch make_batch(const RolloutBuffer& buffer, const std::vector<std::size_t>& indices);
PpoBatch make_batch(const RolloutBuffer& buffer);

struct LossBreakdown {
    double total = 0.0;    // policy + value_coeff * value - entropy_coeff * entropy
    double policy = 0.0;   // negated clipped surrogate
    double value = 0.0;    // mean squared value error
    double entropy = 0.0;  // per-sample Gaussian entropy
    double mean_ratio = 0.0;
    double max_ratio_deviation = 0.0;  // max |ratio - 1|
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
};

// Loss to minimize. When `grad` is non-null it receives dLoss/dtheta.
LossBreakdown ppo_loss(const PolicyParams& params, const PpoBatch& batch, const PpoConfig& cfg,
                       Eigen::VectorXd* grad);

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long long step = 0;

    void reset(std::size_t n);
};

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state, const PpoConfig& cfg);

struct PpoStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    double initial_ratio_deviation = 0.0;  // max |ratio - 1| before the first step
    int minibatches = 0;
    int epochs = 0;                        // epochs run before any early stop
    bool aborted = false;
    std::string diagnostic;
};

// Runs the configured epochs of shuffled minibatch steps. On a non-finite loss
// or gradient the parameters and optimizer state are restored and the stats
// carry aborted = true with a diagnostic.
PpoStats ppo_update(const RolloutBuffer& buffer, PolicyParams& params, AdamState& adam,
                    const PpoConfig& cfg, std::mt19937_64& rng);

// Fixed-size window of recent episode returns that drives promotion.
class ReturnWindow {
public:
    explicit ReturnWindow(std::size_t capacity = 20) : capacity_(capacity) {}
    void push(double episode_return);
    bool full() const { return values_.size() >= capacity_; }
    double mean() const;
    std::size_t capacity() const { return capacity_; }
    const std::deque<double>& values() const { return values_; }
    void clear() { values_.clear(); }

private:
    std::size_t capacity_;
    std::deque<double> values_;
};

}  // namespace morpho::rl
