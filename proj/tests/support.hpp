#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include "morpholander/gear.hpp"
#include "morpholander/rl/ppo.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <array>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using morpho::Vec3;

// Lift-update table written out by hand from the two-band rule with clamps.
inline constexpr std::array<int, 5> kLifts{0, 3, 40, 95, 100};
inline constexpr std::array<double, 11> kLoads{-20, -9, -5, -4, 0, 4.9, 5, 10, 15, 15.1, 30};
inline constexpr std::array<std::array<int, 11>, 5> kExpectedLift{{
    {0, 0, 0, 0, 0, 0, 10, 10, 10, 0, 0},
    {3, 0, 0, 0, 3, 3, 13, 13, 13, 3, 3},
    {40, 35, 35, 35, 40, 40, 50, 50, 50, 40, 40},
    {95, 90, 90, 90, 95, 95, 100, 100, 100, 95, 95},
    {100, 95, 95, 95, 100, 100, 100, 100, 100, 100, 100},
}};

// Derivative-free simplex minimizer.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                                   const Eigen::VectorXd& step, int iterations, double ftol = 1e-22) {
    const Eigen::Index n = x0.size();
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
    for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)][i] += step[i];
    std::vector<double> val(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) val[i] = f(pts[i]);
    std::vector<std::size_t> idx(pts.size());
    for (int it = 0; it < iterations; ++it) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
        const std::size_t best = idx.front();
        const std::size_t worst = idx.back();
        const std::size_t second = idx[idx.size() - 2];
        if (std::abs(val[worst] - val[best]) < ftol) break;
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) centroid += pts[idx[k]];
        centroid /= static_cast<double>(n);
        const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
        const double fr = f(xr);
        if (fr < val[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = f(xe);
            if (fe < fr) {
                pts[worst] = xe;
                val[worst] = fe;
            } else {
                pts[worst] = xr;
                val[worst] = fr;
            }
        } else if (fr < val[second]) {
            pts[worst] = xr;
            val[worst] = fr;
        } else {
            const Eigen::VectorXd xc = centroid + 0.5 * (pts[worst] - centroid);
            const double fc = f(xc);
            if (fc < val[worst]) {
                pts[worst] = xc;
                val[worst] = fc;
            } else {
                for (std::size_t k = 1; k < idx.size(); ++k) {
                    pts[idx[k]] = pts[best] + 0.5 * (pts[idx[k]] - pts[best]);
                    val[idx[k]] = f(pts[idx[k]]);
                }
            }
        }
    }
    const auto it = std::min_element(val.begin(), val.end());
    return pts[static_cast<std::size_t>(it - val.begin())];
}

// Potential energy of the platform on compliant feet: weight times COM height
// plus the spring energy of every penetrating foot. Its minimum is the static
// equilibrium, found without any force or moment balance.
inline double platform_energy(const Eigen::VectorXd& q, const std::array<Vec3, 4>& feet_body,
                              const morpho::Terrain& terrain, const morpho::gear::PlatformConfig& cfg) {
    morpho::gear::PlatformPose pose;
    pose.position = Vec3(0.0, 0.0, q[0]);
    pose.roll = q[1];
    pose.pitch = q[2];
    const Eigen::Matrix3d rot = pose.rotation();
    double e = cfg.weight() * (pose.position + rot * cfg.com_offset).z();
    for (const Vec3& fb : feet_body) {
        const Vec3 foot = pose.position + rot * fb;
        const double pen = std::max(0.0, terrain.height(foot.x(), foot.y()) - foot.z());
        e += 0.5 * cfg.leg_stiffness * pen * pen;
    }
    return e;
}

inline morpho::rl::Observation random_obs(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    morpho::rl::Observation o;
    for (int i = 0; i < morpho::rl::kObsDim; ++i) o[i] = n(rng);
    return o;
}

// Random policy with log-std in [-1, 0] for gradient checks.
inline morpho::rl::PolicyParams random_params(const morpho::rl::Architecture& arch, std::mt19937_64& rng, double scale) {
    morpho::rl::PolicyParams p(arch);
    std::normal_distribution<double> n(0.0, scale);
    for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta[i] = n(rng);
    std::uniform_real_distribution<double> ls(-1.0, 0.0);
    for (int i = 0; i < arch.act_dim; ++i) p.theta[static_cast<Eigen::Index>(p.log_std_offset()) + i] = ls(rng);
    return p;
}

// Batch whose old log-probabilities sit a random log-ratio away from the
// current policy, so some samples land on the clipped branch.
inline morpho::rl::PpoBatch random_batch(const morpho::rl::PolicyParams& p, int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> shift(-0.35, 0.35);
    morpho::rl::PpoBatch b;
    b.obs.resize(morpho::rl::kObsDim, n);
    b.actions.resize(morpho::rl::kActDim, n);
    b.old_log_probs.resize(n);
    b.advantages.resize(n);
    b.returns.resize(n);
    for (int j = 0; j < n; ++j) {
        const morpho::rl::Observation o = random_obs(rng);
        const morpho::rl::PolicyOutput out = morpho::rl::policy_forward(p, o);
        Vec3 a;
        for (int i = 0; i < 3; ++i) a[i] = out.mean[i] + out.std[i] * g(rng);
        b.obs.col(j) = o;
        b.actions.col(j) = a;
        b.old_log_probs[j] = morpho::rl::gaussian_log_prob(a, out.mean, out.std.array().log().matrix()) + shift(rng);
        b.advantages[j] = g(rng);
        b.returns[j] = g(rng);
    }
    return b;
}


inline double relative_error(double analytic, double numeric) {
    // Components smaller than 1e-4 are compared on an absolute scale.
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

}  // namespace oracle
