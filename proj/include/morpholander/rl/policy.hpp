#pragma once

// Diagonal-Gaussian MLP policy with a separate value network. All parameters
// live in one flat vector so the optimizer and gradient checks see a single
// contiguous block.

#include "morpholander/rl/signals.hpp"

#include <Eigen/Core>

#include <random>
#include <vector>

namespace morpho::rl {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;

struct Architecture {
    int obs_dim = kObsDim;
    int act_dim = kActDim;
    std::vector<int> hidden{64, 64};
    double action_scale = 1.0;     // mean = action_scale * tanh(net output)
    double initial_log_std = -2.5;  // noise must stay below the touchdown descent limit

    void validate() const;
    bool operator==(const Architecture&) const = default;

    std::vector<int> mean_sizes() const;
    std::vector<int> value_sizes() const;
};

// Parameter count of a fully connected net with the given layer sizes.
std::size_t net_parameter_count(const std::vector<int>& sizes);

struct PolicyParams {
    Architecture arch;
    Eigen::VectorXd theta;  // [mean net | log-std | value net]

    PolicyParams() = default;
    // Zero-initialized parameters except log-std, which takes arch.initial_log_std.
    explicit PolicyParams(Architecture a);

    std::size_t mean_offset() const { return 0; }
    std::size_t log_std_offset() const;
    std::size_t value_offset() const;
    std::size_t size() const { return static_cast<std::size_t>(theta.size()); }

    Eigen::VectorXd log_std() const;
    // Clamps log-std into range; throws NonFiniteError on non-finite parameters.
    void project();
};

// Scaled-normal initialization; the mean head starts near zero.
PolicyParams init_policy(const Architecture& arch, std::mt19937_64& rng);

struct PolicyOutput {
    Vec3 mean = Vec3::Zero();
    Vec3 std = Vec3::Ones();
    double value = 0.0;
};

PolicyOutput policy_forward(const PolicyParams& params, const Observation& obs);

// Batched forward pass over columns of `obs` with the intermediate activations
// kept for the backward pass.
struct BatchForward {
    Eigen::MatrixXd mean;       // act_dim x B
    Eigen::VectorXd log_std;    // act_dim, clamped
    Eigen::RowVectorXd value;   // 1 x B
    Eigen::MatrixXd mean_tanh;  // tanh of the mean head pre-activation
    std::vector<Eigen::MatrixXd> mean_acts;   // input and hidden activations
    std::vector<Eigen::MatrixXd> value_acts;
};

BatchForward forward_batch(const PolicyParams& params, const Eigen::MatrixXd& obs);

// Accumulates dL/dtheta into `grad` from gradients with respect to the mean,
// the (clamped) log-std and the value outputs.
void backward_batch(const PolicyParams& params, const BatchForward& fwd,
                    const Eigen::MatrixXd& d_mean, const Eigen::VectorXd& d_log_std,
                    const Eigen::RowVectorXd& d_value, Eigen::VectorXd& grad);

double gaussian_log_prob(const Vec3& x, const Vec3& mean, const Vec3& log_std);

struct SampledAction {
    Vec3 raw = Vec3::Zero();  // pre-clamp draw, used for the log-probability
    Action action;            // clamped to the action bounds
    double log_prob = 0.0;
};

SampledAction sample_action(const Vec3& mean, const Vec3& std, double max_speed,
                            std::mt19937_64& rng);
// Same with the standard-normal draw supplied by the caller.
SampledAction action_from_noise(const Vec3& mean, const Vec3& std, double max_speed,
                                const Vec3& eps);

}  // namespace morpho::rl
