#include "morpholander/env.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace morpho;
using namespace morpho::env;

namespace {

EnvConfig config() {
    EnvConfig c;
    c.validate();
    return c;
}

// Hand-written approach: hold 0.3 m above the pad until aligned, then sink slowly.
Vec3 scripted_landing(const rl::Observation& obs) {
    const Eigen::Vector2d xy = obs.head<2>();
    Vec3 v;
    const double n = xy.norm();
    const Eigen::Vector2d h = n > 0.4 ? Eigen::Vector2d(xy * (0.4 / n)) : xy;
    v.x() = h.x();
    v.y() = h.y();
    v.z() = n < 0.03 ? -0.06 : std::clamp(obs[2] + 0.3, -0.3, 0.3);
    return v;
}

PadPose level_pad(double z) {
    PadPose p;
    p.center = Vec3(0.0, 0.0, z);
    return p;
}

}  // namespace

TEST_CASE("scenario names round trip") {
    for (Scenario s : {Scenario::EvenStatic, Scenario::UnevenStatic, Scenario::RelocateThenLand}) {
        CHECK(parse_scenario(scenario_name(s)) == s);
    }
    CHECK_THROWS_AS(parse_scenario("moving"), ConfigError);
}

TEST_CASE("touchdown detection examples") {
    const EnvConfig c = config();
    const PadPose pad = level_pad(0.2);
    dynamics::RigidBodyState d;
    d.position = Vec3(0.0, 0.0, 1.2);
    CHECK_FALSE(detect_touchdown(d, pad, c.rest_offset, c.touchdown));
    d.position = Vec3(0.02, -0.03, 0.2 + c.rest_offset);
    CHECK(detect_touchdown(d, pad, c.rest_offset, c.touchdown));
    d.velocity = Vec3(0.0, 0.0, -0.5);
    CHECK_FALSE(detect_touchdown(d, pad, c.rest_offset, c.touchdown));
    d.velocity = Vec3(0.2, 0.0, 0.0);
    CHECK_FALSE(detect_touchdown(d, pad, c.rest_offset, c.touchdown));
}

TEST_CASE("landing shift examples") {
    const Vec3 pad(0.3, -0.1, 0.2);
    CHECK(landing_shift(pad, pad) == 0.0);
    CHECK(landing_shift(pad + Vec3(0.03, 0.04, 0.01), pad) == doctest::Approx(5.0));
    CHECK(landing_shift(pad + Vec3(0.0, 0.1, 0.0), pad) == doctest::Approx(10.0));
}

TEST_CASE("trapezoid profile over 1 m at 0.1 m/s") {
    const double total = trapezoid_duration(1.0, 0.1, 0.1);
    CHECK(total >= 10.0);
    double integrated = 0.0;
    double last = 0.0;
    const double dt = 1e-4;
    for (double t = 0.0; t < total + 1.0; t += dt) {
        const PathSample s = trapezoid_profile(1.0, 0.1, 0.1, t);
        REQUIRE(s.speed <= 0.1 + 1e-12);
        REQUIRE(s.distance >= last - 1e-12);
        last = s.distance;
        integrated += s.speed * dt;
    }
    CHECK(integrated == doctest::Approx(1.0).epsilon(1e-3));
    const PathSample end = trapezoid_profile(1.0, 0.1, 0.1, total);
    CHECK(end.halted);
    CHECK(end.speed == 0.0);
    CHECK(end.distance == 1.0);
    CHECK(trapezoid_profile(0.0, 0.1, 0.1, 0.0).halted);
}

TEST_CASE("even ground leaves the platform level") {
    const World w = reset(Scenario::EvenStatic, config(), 3);
    CHECK(w.platform.pose.tilt() < 1e-9);
    for (double h : w.block_heights) CHECK(h == 0.0);
    CHECK(pad_pose(w, 0).center.z() == doctest::Approx(pad_pose(w, 1).center.z()));
}

TEST_CASE("uneven ground is levelled below 2 degrees") {
    int valid = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        try {
            const World w = reset(Scenario::UnevenStatic, config(), seed);
            CHECK(rad2deg(w.platform.pose.tilt()) < 2.0);
            ++valid;
        } catch (const EpisodeInvalid&) {
        }
    }
    CHECK(valid >= 19);
}

TEST_CASE("reset is deterministic per seed") {
    const World a = reset(Scenario::UnevenStatic, config(), 11);
    const World b = reset(Scenario::UnevenStatic, config(), 11);
    const World other = reset(Scenario::UnevenStatic, config(), 12);
    CHECK(a.block_heights == b.block_heights);
    CHECK(a.block_heights != other.block_heights);
    CHECK(a.platform.pose.position == b.platform.pose.position);
    CHECK(a.platform.pose.roll == b.platform.pose.roll);
    for (int i = 0; i < kDrones; ++i) CHECK(a.drones[i].body.position == b.drones[i].body.position);
}

TEST_CASE("pads are assigned crosswise and one-to-one") {
    const World w = reset(Scenario::EvenStatic, config(), 1);
    std::set<int> pads;
    for (const DroneSlot& d : w.drones) {
        pads.insert(d.pad);
        const double pad_y = pad_pose(w, d.pad).center.y();
        CHECK(pad_y * d.start.y() < 0.0);
    }
    CHECK(pads == std::set<int>{0, 1});
    CHECK(std::abs(w.drones[0].start.y() - w.drones[1].start.y()) == doctest::Approx(0.75));
    CHECK(std::abs(w.drones[0].start.x()) == doctest::Approx(1.5));
}

TEST_CASE("zero actions hold the hover point within 5 cm over 1 s") {
    World w = reset(Scenario::EvenStatic, config(), 4);
    run_until_landing(w);
    REQUIRE(w.phase == Phase::Landing);
    std::array<Vec3, kDrones> start;
    for (int i = 0; i < kDrones; ++i) start[i] = w.drones[i].body.position;
    const int steps = static_cast<int>(std::lround(1.0 / w.cfg.agent_period()));
    for (int k = 0; k < steps; ++k) {
        env_step(w, {Vec3::Zero(), Vec3::Zero()});
        for (int i = 0; i < kDrones; ++i) REQUIRE((w.drones[i].body.position - start[i]).norm() < 0.05);
    }
}

TEST_CASE("landing observation is the pad state minus the drone state") {
    World w = reset(Scenario::UnevenStatic, config(), 6);
    run_until_landing(w);
    for (int i = 0; i < kDrones; ++i) {
        const DroneSlot& d = w.drones[i];
        const rl::Observation o = observation(w, i);
        CHECK((o.head<3>() - (pad_pose(w, d.pad).center - d.body.position)).norm() < 1e-12);
        CHECK((o.segment<3>(3) + d.body.velocity).norm() < 1e-12);
    }
}

TEST_CASE("a slow aligned descent touches down on the pad") {
    for (Scenario s : {Scenario::EvenStatic, Scenario::UnevenStatic}) {
        World w = reset(s, config(), 8);
        run_until_landing(w);
        std::array<bool, kDrones> ended{};
        while (w.phase != Phase::Finished) {
            const StepRecord rec =
                env_step(w, {scripted_landing(observation(w, 0)), scripted_landing(observation(w, 1))});
            for (int i = 0; i < kDrones; ++i) {
                if (rec.done[i]) {
                    CHECK(rec.terminal[i]);
                    ended[i] = true;
                }
            }
        }
        for (int i = 0; i < kDrones; ++i) {
            const DroneSlot& d = w.drones[i];
            CHECK(ended[i]);
            CHECK(d.outcome == Outcome::Touchdown);
            CHECK(d.on_pad);
            CHECK(d.shift_cm < 3.0);
            CHECK(d.shift_cm == doctest::Approx(landing_shift(d.touchdown, d.touchdown_pad)));
        }
    }
}

TEST_CASE("descending away from the platform ends on the floor") {
    World w = reset(Scenario::EvenStatic, config(), 2);
    run_until_landing(w);
    StepRecord last;
    while (w.phase != Phase::Finished) last = env_step(w, {Vec3(0, 0, -1), Vec3(0, 0, -1)});
    for (int i = 0; i < kDrones; ++i) {
        CHECK(w.drones[i].outcome == Outcome::Crash);
        CHECK(w.drones[i].crash_reason == "floor contact");
        CHECK_FALSE(w.drones[i].on_pad);
        CHECK(last.terminal[i]);
        CHECK(last.rewards[i] < -w.cfg.crash_penalty);
    }
}

TEST_CASE("landing timeout is terminal, hold timeout bootstraps") {
    for (rl::CurriculumStage task : {rl::CurriculumStage::PositionSet, rl::CurriculumStage::PositionHold}) {
        World w = reset(Scenario::EvenStatic, config(), 9, task);
        run_until_landing(w);
        StepRecord last;
        int steps = 0;
        while (w.phase != Phase::Finished) {
            last = env_step(w, {Vec3::Zero(), Vec3::Zero()});
            ++steps;
        }
        CHECK(steps == w.cfg.horizon_steps(task));
        for (int i = 0; i < kDrones; ++i) {
            CHECK(w.drones[i].outcome == Outcome::Timeout);
            CHECK(last.done[i]);
            CHECK(last.terminal[i] == (task == rl::CurriculumStage::PositionSet));
        }
    }
}

TEST_CASE("logged rewards discount to the episode return") {
    World w = reset(Scenario::UnevenStatic, config(), 13);
    run_until_landing(w);
    std::array<double, kDrones> acc{};
    std::array<double, kDrones> factor{1.0, 1.0};
    int k = 0;
    while (w.phase != Phase::Finished) {
        // Drone 0 lands, drone 1 wanders and eventually times out or crashes.
        const Vec3 wander(0.3 * std::sin(0.1 * k), 0.3 * std::cos(0.07 * k), -0.05);
        const StepRecord rec = env_step(w, {scripted_landing(observation(w, 0)), wander});
        for (int i = 0; i < kDrones; ++i) {
            if (!rec.active[i]) continue;
            acc[i] += factor[i] * rec.rewards[i];
            factor[i] *= w.cfg.discount;
        }
        ++k;
    }
    for (int i = 0; i < kDrones; ++i) {
        CHECK(std::abs(acc[i] - rl::discounted_return(w.drones[i].rewards, w.cfg.discount)) < 1e-9);
    }
}

TEST_CASE("zero-length relocation is the uneven static world") {
    EnvConfig c = config();
    c.relocation.dx = 0.0;
    c.relocation.dy = 0.0;
    World a = reset(Scenario::RelocateThenLand, c, 21);
    World b = reset(Scenario::UnevenStatic, c, 21);
    CHECK(a.motion.halted);
    CHECK(a.block_heights == b.block_heights);
    CHECK(a.terrain.heights() == b.terrain.heights());
    run_until_landing(a);
    run_until_landing(b);
    CHECK(a.time == b.time);
    CHECK(a.platform.pose.position == b.platform.pose.position);
    for (int i = 0; i < kDrones; ++i) CHECK(a.drones[i].body.position == b.drones[i].body.position);
}

TEST_CASE("1 m relocation at 0.1 m/s takes at least 10 s and halts") {
    EnvConfig c = config();
    c.relocation.dx = 1.0;
    World w = reset(Scenario::RelocateThenLand, c, 5);
    double moving_time = 0.0;
    bool saw_velocity = false;
    run_until_landing(w, [&](const StepRecord& rec) {
        if (rec.phase == Phase::Relocate) {
            moving_time += w.cfg.agent_period();
            if (w.platform_velocity.norm() > 0.0) {
                saw_velocity = true;
                CHECK((rec.obs[0].segment<3>(3) + w.drones[0].body.velocity - w.platform_velocity).norm() < 1e-12);
            }
        }
        for (const DroneSlot& d : w.drones) REQUIRE(d.outcome == Outcome::Flying);
    });
    CHECK(saw_velocity);
    CHECK(moving_time >= 10.0);
    CHECK(w.platform_velocity.isZero());
    CHECK(w.platform.pose.position.x() == doctest::Approx(1.0));
    CHECK(rad2deg(w.platform.pose.tilt()) < 2.0);
}

TEST_CASE("non-finite actions are rejected") {
    World w = reset(Scenario::EvenStatic, config(), 1);
    run_until_landing(w);
    CHECK_THROWS_AS(env_step(w, {Vec3(std::nan(""), 0, 0), Vec3::Zero()}), NonFiniteError);
}
