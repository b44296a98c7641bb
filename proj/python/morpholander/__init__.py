"""Legged landing platform simulator and PPO landing trainer."""

from ._core import (
    ConfigError,
    DroneParams,
    EpisodeInvalid,
    Episode,
    NonConvergenceError,
    NonFiniteError,
    RigidBodyState,
    discounted_return,
    evaluate,
    foot_after_ik,
    gear_update,
    landing_shift,
    motor_mix,
    replay,
    resolve_config,
    reward,
    stabilize,
    step_dynamics,
    train,
    vertical_line_target,
)

__all__ = [
    "ConfigError",
    "DroneParams",
    "EpisodeInvalid",
    "Episode",
    "NonConvergenceError",
    "NonFiniteError",
    "RigidBodyState",
    "discounted_return",
    "evaluate",
    "foot_after_ik",
    "gear_update",
    "landing_shift",
    "motor_mix",
    "replay",
    "resolve_config",
    "reward",
    "stabilize",
    "step_dynamics",
    "train",
    "vertical_line_target",
]
