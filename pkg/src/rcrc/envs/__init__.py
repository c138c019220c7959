"""Built-in deterministic pixel environments."""

from .base import KINDS, RENDER_SIZE, Env, EnvConfig, InvalidActionError, InvalidStateError, StepResult
from .dodge_ball import DodgeBall, DodgeConstants
from .track_runner import TrackConstants, TrackRunner

__all__ = [
    "KINDS", "RENDER_SIZE", "Env", "EnvConfig", "InvalidActionError", "InvalidStateError",
    "StepResult", "DodgeBall", "DodgeConstants", "TrackRunner", "TrackConstants",
    "make_env", "action_mode_for",
]


def make_env(config: EnvConfig) -> Env:
    if config.kind == "track_runner":
        return TrackRunner(config)
    return DodgeBall(config)


def action_mode_for(kind: str) -> str:
    return "continuous3" if kind == "track_runner" else "discrete2"
