#include "morpholander/control.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace morpho;
using namespace morpho::control;

namespace {

struct Loop {
    dynamics::DroneParams params;
    CascadeGains gains;
    CascadeState ctrl;
    dynamics::RigidBodyState body;

    Loop() { body.position = Vec3(0.0, 0.0, 1.0); }

    void step(const Vec3& cmd) {
        const dynamics::MotorCommand m = cascade_step(body, VelocityCommand{cmd}, gains, params, ctrl, 0.002);
        for (double t : m.thrust) {
            REQUIRE(t >= 0.0);
            REQUIRE(t <= params.max_motor_thrust);
        }
        body = dynamics::step_dynamics(body, m, params, 0.002);
    }
};

}  // namespace

TEST_CASE("pid: zero error from zero state is the identity") {
    const PidGains g{2.0, 1.0, 0.5, 10.0, 1.0};
    const PidResult r = pid_step(g, PidState{}, 0.0, 0.002);
    CHECK(r.output == 0.0);
    CHECK(r.state.integrator == 0.0);
    CHECK(r.state.previous_error == 0.0);
}

TEST_CASE("pid: proportional only") {
    const PidGains g{2.5, 0.0, 0.0, 10.0, 1.0};
    CHECK(pid_step(g, PidState{}, 0.4, 0.002).output == doctest::Approx(1.0));
    CHECK(pid_step(g, PidState{}, -0.4, 0.002).output == doctest::Approx(-1.0));
}

TEST_CASE("pid: PI accumulation over five steps matches the hand sum") {
    const PidGains g{1.0, 2.0, 0.0, 100.0, 1.0};
    const double e = 0.3;
    const double dt = 0.1;
    PidState s;
    double out = 0.0;
    for (int n = 1; n <= 5; ++n) {
        const PidResult r = pid_step(g, s, e, dt);
        s = r.state;
        out = r.output;
        CHECK(s.integrator == doctest::Approx(std::min(n * e * dt, 1.0)));
    }
    // integrator 0.15 -> kp e + ki * 0.15 = 0.3 + 0.3
    CHECK(out == doctest::Approx(0.6));

    const PidGains tight{1.0, 2.0, 0.0, 100.0, 0.1};
    PidState t;
    for (int n = 0; n < 5; ++n) t = pid_step(tight, t, e, dt).state;
    CHECK(t.integrator == doctest::Approx(0.1));
}

TEST_CASE("pid: derivative acts on the error difference") {
    const PidGains g{0.0, 0.0, 0.5, 100.0, 1.0};
    PidState s;
    s.previous_error = 0.2;
    CHECK(pid_step(g, s, 0.3, 0.01).output == doctest::Approx(0.5 * 0.1 / 0.01));
}

TEST_CASE("pid: output is clamped") {
    const PidGains g{100.0, 0.0, 0.0, 2.0, 1.0};
    CHECK(pid_step(g, PidState{}, 1.0, 0.002).output == doctest::Approx(2.0));
    CHECK(pid_step(g, PidState{}, -1.0, 0.002).output == doctest::Approx(-2.0));
}

TEST_CASE("pid: non-finite error is rejected") {
    const PidGains g{1.0, 0.0, 0.0, 1.0, 1.0};
    CHECK_THROWS_AS(pid_step(g, PidState{}, std::numeric_limits<double>::quiet_NaN(), 0.002), NonFiniteError);
    CHECK_THROWS_AS(pid_step(g, PidState{}, 0.1, 0.0), ConfigError);
}

TEST_CASE("pid: integrator never exceeds its limit under random error streams") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> err(-50.0, 50.0);
    std::uniform_real_distribution<double> lim(0.01, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const PidGains g{1.0, 5.0, 0.1, 10.0, lim(rng)};
        PidState s;
        for (int i = 0; i < 500; ++i) {
            s = pid_step(g, s, err(rng), 0.002 + 0.05 * (i % 3)).state;
            REQUIRE(std::abs(s.integrator) <= g.integrator_limit);
        }
    }
}

TEST_CASE("command clamp is per axis") {
    const VelocityCommand c = clamp_command(VelocityCommand{Vec3(2.0, -0.3, -5.0)}, 1.0);
    CHECK(c.velocity == Vec3(1.0, -0.3, -1.0));
}

TEST_CASE("cascade: hover with zero command holds hover thrust") {
    Loop loop;
    const dynamics::MotorCommand m =
        cascade_step(loop.body, VelocityCommand{}, loop.gains, loop.params, loop.ctrl, 0.002);
    CHECK(m.total() == doctest::Approx(loop.params.hover_thrust()).epsilon(1e-9));
    const Vec3 tau = dynamics::motor_torques(m, loop.params);
    CHECK(tau.norm() < 1e-12);
}

TEST_CASE("cascade: climb command raises collective on the first step") {
    Loop loop;
    const dynamics::MotorCommand m =
        cascade_step(loop.body, VelocityCommand{Vec3(0, 0, 0.5)}, loop.gains, loop.params, loop.ctrl, 0.002);
    CHECK(m.total() > loop.params.hover_thrust());
}

TEST_CASE("cascade: forward step settles inside 5 % within 3 s and stays") {
    Loop loop;
    for (int i = 0; i < 1500; ++i) loop.step(Vec3(0.5, 0, 0));
    for (int i = 0; i < 1500; ++i) {
        REQUIRE(loop.body.velocity.x() >= 0.475);
        REQUIRE(loop.body.velocity.x() <= 0.525);
        loop.step(Vec3(0.5, 0, 0));
    }
}

TEST_CASE("cascade: tilt never exceeds the configured limit") {
    Loop loop;
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
        loop.step(Vec3(1.0, -1.0, 0.0));
        const Vec3 z = loop.body.attitude.toRotationMatrix().col(2);
        worst = std::max(worst, std::acos(std::clamp(z.z(), -1.0, 1.0)));
    }
    CHECK(worst <= loop.gains.max_tilt + deg2rad(1.0));
}

TEST_CASE("cascade: identical runs are bit-identical") {
    Loop a;
    Loop b;
    for (int i = 0; i < 1000; ++i) {
        a.step(Vec3(0.3, 0.1, -0.2));
        b.step(Vec3(0.3, 0.1, -0.2));
    }
    CHECK(a.body.position == b.body.position);
    CHECK(a.body.attitude.coeffs() == b.body.attitude.coeffs());
}
