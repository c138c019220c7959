from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..prng import Stream, derive_seed

RENDER_SIZE = 64
KINDS = ("track_runner", "dodge_ball")


class InvalidStateError(RuntimeError):
    pass


class InvalidActionError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    """Which environment to build.  ``max_steps=None`` uses the kind's default."""

    kind: str
    max_steps: int | None = None
    seed: int = 0
    render_size: int = RENDER_SIZE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown environment kind {self.kind!r}; expected one of {KINDS}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.render_size != RENDER_SIZE:
            raise ValueError(f"render_size is fixed at {RENDER_SIZE}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "max_steps": self.max_steps, "seed": self.seed}


@dataclass
class StepResult:
    frame: np.ndarray
    reward: float
    done: bool
    info: dict[str, Any] = field(default_factory=dict)


class Env:
    """Common episode bookkeeping; subclasses implement `_generate`, `_advance`, `render`."""

    kind: str = ""
    default_max_steps: int = 1000
    min_score: float = 0.0

    def __init__(self, config: EnvConfig):
        self.config = config
        self.max_steps = config.max_steps or self.default_max_steps
        self.steps = 0
        self.total_reward = 0.0
        self.done = True
        self._initialized = False

    def reset(self, episode_seed: int) -> np.ndarray:
        self.episode_seed = int(episode_seed)
        rng = Stream(derive_seed(f"env/{self.kind}", self.config.seed, self.episode_seed))
        self.steps = 0
        self.total_reward = 0.0
        self.done = False
        self._generate(rng)
        self._initialized = True
        return self.render()

    def step(self, action) -> StepResult:
        if not self._initialized:
            raise InvalidStateError("call reset() before step()")
        if self.done:
            raise InvalidStateError("episode is over; call reset() before stepping again")
        reward, terminal, info = self._advance(action)
        self.steps += 1
        self.total_reward += reward
        self.done = terminal or self.steps >= self.max_steps
        return StepResult(self.render(), float(reward), self.done, info)

    def render(self) -> np.ndarray:
        raise NotImplementedError

    def random_action(self, rng: Stream):
        raise NotImplementedError

    def _generate(self, rng: Stream) -> None:
        raise NotImplementedError

    def _advance(self, action) -> tuple[float, bool, dict]:
        raise NotImplementedError
