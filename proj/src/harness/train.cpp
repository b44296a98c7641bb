#include "morpholander/harness/run.hpp"

#include <cstdio>
#include <numeric>
#include <thread>

namespace morpho::harness {

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
    for (std::uint64_t t : tags) {
        words.push_back(static_cast<std::uint32_t>(t));
        words.push_back(static_cast<std::uint32_t>(t >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

std::string train_csv_header() {
    return "step,update,mean_return,episodes,policy_loss,value_loss,entropy,clip_fraction,approx_kl,stage";
}

std::string train_csv_line(const TrainRow& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%s", r.step, r.update,
                  r.mean_return, r.episodes, r.policy_loss, r.value_loss, r.entropy, r.clip_fraction, r.approx_kl,
                  rl::stage_name(r.stage));
    return buf;
}

rl::TrainerState fresh_trainer(const RunConfig& cfg) {
    rl::TrainerState s;
    std::mt19937_64 init_rng(derive_seed(cfg.seed, {0x1417}));
    s.params = rl::init_policy(cfg.policy, init_rng);
    s.adam.reset(s.params.size());
    s.rng.seed(derive_seed(cfg.seed, {0x5417}));
    s.window = rl::ReturnWindow(static_cast<std::size_t>(cfg.train.promotion_window));
    return s;
}

namespace {

rl::Observation scaled(const RunConfig& cfg, const rl::Observation& raw) { return cfg.env.obs_scale.apply(raw); }

}  // namespace

RolloutResult collect_rollout(const RunConfig& cfg, const rl::PolicyParams& params, rl::CurriculumStage stage,
                              int steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    env::EnvConfig ec = cfg.env;
    ec.start_jitter = cfg.train.start_jitter;
    ec = ec.prepared();
    std::bernoulli_distribution uneven(cfg.train.uneven_fraction);
    const double max_speed = cfg.env.gains.max_speed;

    RolloutResult out;
    int collected = 0;
    while (collected < steps) {
        const std::uint64_t episode_seed = rng();
        const bool rough = stage == rl::CurriculumStage::PositionSet && uneven(rng);
        env::World w;
        try {
            w = env::reset(rough ? env::Scenario::UnevenStatic : env::Scenario::EvenStatic, ec, episode_seed, stage);
        } catch (const env::EpisodeInvalid&) {
            continue;
        }
        env::run_until_landing(w);

        std::array<rl::RolloutBuffer, env::kDrones> per;
        std::array<double, env::kDrones> ret{};
        std::array<rl::Observation, env::kDrones> obs;
        for (int i = 0; i < env::kDrones; ++i) obs[static_cast<std::size_t>(i)] = scaled(cfg, env::observation(w, i));

        while (w.phase != env::Phase::Finished && collected < steps) {
            std::array<Vec3, env::kDrones> actions{Vec3::Zero(), Vec3::Zero()};
            std::array<rl::SampledAction, env::kDrones> samples;
            std::array<double, env::kDrones> values{};
            for (std::size_t i = 0; i < env::kDrones; ++i) {
                if (w.drones[i].outcome != env::Outcome::Flying) continue;
                const rl::PolicyOutput po = rl::policy_forward(params, obs[i]);
                samples[i] = rl::sample_action(po.mean, po.std, max_speed, rng);
                actions[i] = samples[i].raw;
                values[i] = po.value;
            }
            const env::StepRecord rec = env::env_step(w, actions);
            for (std::size_t i = 0; i < env::kDrones; ++i) {
                if (!rec.active[i]) continue;
                const rl::Observation next = scaled(cfg, rec.obs[i]);
                double bootstrap = 0.0;
                if (rec.done[i] && !rec.terminal[i]) bootstrap = rl::policy_forward(params, next).value;
                per[i].add(obs[i], samples[i].raw, samples[i].log_prob, rec.rewards[i], values[i], rec.done[i],
                           rec.terminal[i], bootstrap);
                ret[i] += rec.rewards[i];
                ++collected;
                if (rec.done[i]) out.episode_returns.push_back(ret[i]);
                obs[i] = next;
            }
        }
        for (std::size_t i = 0; i < env::kDrones; ++i) {
            if (per[i].size() == 0 || per[i].dones.back()) continue;
            // Rollout budget reached mid-episode: cut and bootstrap.
            per[i].dones.back() = 1;
            per[i].bootstrap_values.back() = rl::policy_forward(params, obs[i]).value;
        }
        for (const auto& b : per) out.buffer.append(b);
    }
    return out;
}

void train(const RunConfig& cfg, rl::TrainerState& state, const UpdateHook& on_update) {
    const auto& tc = cfg.train;
    while (state.samples < tc.total_steps) {
        const int steps = static_cast<int>(std::min<long long>(tc.rollout_steps, tc.total_steps - state.samples));
        const int workers = std::min(tc.workers, steps);
        std::vector<RolloutResult> parts(static_cast<std::size_t>(workers));
        auto work = [&](int k) {
            const int quota = steps / workers + (k < steps % workers ? 1 : 0);
            parts[static_cast<std::size_t>(k)] =
                collect_rollout(cfg, state.params, state.stage, quota,
                                derive_seed(cfg.seed, {0x7011, static_cast<std::uint64_t>(state.updates),
                                                       static_cast<std::uint64_t>(k)}));
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int k = 0; k < workers; ++k) pool.emplace_back(work, k);
            for (auto& t : pool) t.join();
        }
        rl::RolloutBuffer buffer;
        std::vector<double> returns;
        for (const auto& p : parts) {
            buffer.append(p.buffer);
            returns.insert(returns.end(), p.episode_returns.begin(), p.episode_returns.end());
        }
        rl::compute_gae(buffer, cfg.ppo.discount, cfg.ppo.gae_lambda);
        rl::normalize_advantages(buffer);
        rl::PpoConfig ppo = cfg.ppo;
        if (tc.anneal_learning_rate) {
            ppo.learning_rate *= 1.0 - static_cast<double>(state.samples) / static_cast<double>(tc.total_steps);
        }
        const rl::PpoStats stats = rl::ppo_update(buffer, state.params, state.adam, ppo, state.rng);
        if (stats.aborted) throw NonFiniteError("training aborted: " + stats.diagnostic);

        state.samples += static_cast<long long>(buffer.size());
        ++state.updates;
        state.episodes += static_cast<long long>(returns.size());
        for (double r : returns) state.window.push(r);

        TrainRow row;
        row.step = state.samples;
        row.update = state.updates;
        row.episodes = static_cast<int>(returns.size());
        row.mean_return = returns.empty() ? state.window.mean()
                                          : std::accumulate(returns.begin(), returns.end(), 0.0) /
                                                static_cast<double>(returns.size());
        row.policy_loss = stats.policy_loss;
        row.value_loss = stats.value_loss;
        row.entropy = stats.entropy;
        row.clip_fraction = stats.clip_fraction;
        row.approx_kl = stats.approx_kl;
        if (state.window.full()) {
            const rl::CurriculumStage next = rl::curriculum_step(state.stage, state.window.mean(), tc.promotion_threshold);
            if (next != state.stage) {
                state.stage = next;
                state.window.clear();
                row.promoted = true;
            }
        }
        row.stage = state.stage;
        if (on_update) on_update(row, state);
    }
}

double mean_policy_return(const RunConfig& cfg, const rl::PolicyParams& params, rl::CurriculumStage stage,
                          int episodes, std::uint64_t seed) {
    env::EnvConfig ec = cfg.env;
    ec.start_jitter = cfg.train.start_jitter;
    ec = ec.prepared();
    double total = 0.0;
    int count = 0;
    for (int e = 0; e < episodes; ++e) {
        env::World w = env::reset(env::Scenario::EvenStatic, ec, derive_seed(seed, {static_cast<std::uint64_t>(e)}), stage);
        env::run_until_landing(w);
        while (w.phase != env::Phase::Finished) {
            std::array<Vec3, env::kDrones> actions{Vec3::Zero(), Vec3::Zero()};
            for (int i = 0; i < env::kDrones; ++i) {
                if (w.drones[static_cast<std::size_t>(i)].outcome != env::Outcome::Flying) continue;
                actions[static_cast<std::size_t>(i)] =
                    rl::policy_forward(params, scaled(cfg, env::observation(w, i))).mean;
            }
            env::env_step(w, actions);
        }
        for (const auto& d : w.drones) {
            total += std::accumulate(d.rewards.begin(), d.rewards.end(), 0.0);
            ++count;
        }
    }
    return count ? total / count : 0.0;
}

}  // namespace morpho::harness
