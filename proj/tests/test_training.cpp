#include "morpholander/harness/run.hpp"

#include <doctest.h>

#include <cstdio>

using namespace morpho;
using namespace morpho::harness;

TEST_CASE("position-hold return improves within 200k steps in at least 4 of 5 seeds") {
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RunConfig cfg = parse_run_config("");
        cfg.seed = seed;
        cfg.train.total_steps = 200000;
        cfg.train.promotion_threshold = 1e12;  // stay on the hold task
        cfg.finalize();
        rl::TrainerState state = fresh_trainer(cfg);
        const std::uint64_t eval_seed = derive_seed(seed, {0xE7A1});
        const double before = mean_policy_return(cfg, state.params, rl::CurriculumStage::PositionHold, 20, eval_seed);
        train(cfg, state);
        REQUIRE(state.stage == rl::CurriculumStage::PositionHold);
        const double after = mean_policy_return(cfg, state.params, rl::CurriculumStage::PositionHold, 20, eval_seed);
        std::printf("seed %llu: untrained %.3f, trained %.3f\n", static_cast<unsigned long long>(seed), before, after);
        if (after > before) ++improved;
    }
    CHECK(improved >= 4);
}
