import math

import numpy as np
import pytest

import morpholander as ml


def test_gear_update_bands():
    assert ml.gear_update(40, 10.0) == 50
    assert ml.gear_update(95, 10.0) == 100
    assert ml.gear_update(3, -5.0) == 0
    assert ml.gear_update(40, 0.0) == 40
    with pytest.raises(ml.ConfigError):
        ml.gear_update(101, 0.0)


def test_ik_round_trip_full_stroke():
    for leg in range(4):
        low = ml.foot_after_ik(leg, 0)
        high = ml.foot_after_ik(leg, 100)
        np.testing.assert_allclose(high - low, [0.0, 0.0, 0.10], atol=1e-6)
        np.testing.assert_allclose(ml.foot_after_ik(leg, 50), ml.vertical_line_target(leg, 50), atol=1e-6)


def test_free_fall():
    params = ml.DroneParams()
    params.linear_drag = 0.0
    state = ml.RigidBodyState()
    for _ in range(500):
        state = ml.step_dynamics(state, [0.0] * 4, params, 0.002)
    assert abs(state.position[2] + 0.5 * params.gravity) < 1e-3
    assert abs(np.linalg.norm(state.attitude_wxyz) - 1.0) < 1e-12


def test_motor_mix_equal_split():
    params = ml.DroneParams()
    thrust, saturated = ml.motor_mix(params.hover_thrust(), np.zeros(3), params)
    np.testing.assert_allclose(thrust, [params.hover_thrust() / 4] * 4)
    assert not saturated


def test_reward_and_return():
    delta = np.zeros(9)
    delta[0], delta[3] = 0.3, 0.2
    assert ml.reward(np.zeros(9), np.zeros(3)) == pytest.approx(2.0)
    assert ml.discounted_return([1.0, 1.0, 1.0], 0.5) == pytest.approx(1.75)
    assert ml.landing_shift(np.array([0.03, 0.04, 0.0]), np.zeros(3)) == pytest.approx(5.0)


def test_stabilize_flat_and_exhausted():
    flat = np.zeros((201, 201))
    r = ml.stabilize(flat)
    assert r["lifts"] == [0, 0, 0, 0]
    assert r["tilt_deg"] < 1e-9
    step = flat.copy()
    foot = ml.vertical_line_target(0, 0)
    c, rr = int(round(foot[0] / 0.01)) + 100, int(round(foot[1] / 0.01)) + 100
    step[rr - 6 : rr + 7, c - 6 : c + 7] = 0.15
    with pytest.raises(ml.NonConvergenceError, match="limb range exhausted"):
        ml.stabilize(step)


def test_episode_hold_and_crossed_pads():
    ep = ml.Episode("uneven-static", seed=3)
    assert ep.platform_tilt_deg < 2.0
    ep.run_until_landing()
    assert ep.phase == "landing"
    start = [ep.drone_position(i).copy() for i in range(2)]
    for _ in range(10):
        obs, rewards, done, terminal = ep.step(np.zeros((2, 3)))
    assert obs.shape == (2, 9)
    for i in range(2):
        assert np.linalg.norm(ep.drone_position(i) - start[i]) < 0.05
        assert ep.pad_center(ep.assigned_pad(i))[1] * start[i][1] < 0.0
    assert not any(done)


def test_config_rejects_unknown_keys():
    assert "seed: 7" in ml.resolve_config("seed: 7\n")
    with pytest.raises(ml.ConfigError, match="unknown key"):
        ml.resolve_config("train:\n  bogus: 1\n")


def test_train_eval_replay(tmp_path):
    config = "policy:\n  hidden: [8]\nppo:\n  minibatch: 64\ntrain:\n  total_steps: 512\n  rollout_steps: 512\n"
    out = str(tmp_path / "run")
    trained = ml.train(config, seed=2, output_dir=out)
    assert trained["samples"] >= 512
    assert trained["stage"] == "position_hold"
    summary = ml.evaluate(config, trained["checkpoint"], "even-static", trials=1, output_dir=out)
    assert summary["trials"] == 1
    again = ml.replay(config, summary["trajectory"], summary["metrics"])
    assert again["match"]
    assert again["max_abs_error"] <= 1e-9
    if summary["touchdowns"] == 0:
        assert math.isnan(summary["mean_shift_cm"])
