"""Linear controller: the only trained part of the model."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class InvalidInputError(ValueError):
    pass


class ActionMode(str, enum.Enum):
    CONTINUOUS3 = "continuous3"
    DISCRETE2 = "discrete2"

    @property
    def n_actions(self) -> int:
        return 3 if self is ActionMode.CONTINUOUS3 else 1


class Move(enum.IntEnum):
    LEFT = 0
    RIGHT = 1


def n_params(mode: ActionMode | str, d_conv: int = 512, d_esn: int = 512) -> int:
    return ActionMode(mode).n_actions * (d_conv + d_esn + 1)


@dataclass
class ControllerWeights:
    """``w_out`` has shape ``(n_actions, d_conv + d_esn + 1)``; flattened row-major for the optimizer."""

    w_out: np.ndarray
    action_mode: ActionMode

    def __post_init__(self):
        self.action_mode = ActionMode(self.action_mode)
        self.w_out = np.asarray(self.w_out, dtype=np.float64)
        if self.w_out.ndim != 2 or self.w_out.shape[0] != self.action_mode.n_actions:
            raise InvalidInputError(
                f"{self.action_mode.value} needs {self.action_mode.n_actions} rows, "
                f"got shape {self.w_out.shape}"
            )

    @classmethod
    def from_flat(cls, params: np.ndarray, mode: ActionMode | str, input_dim: int) -> "ControllerWeights":
        mode = ActionMode(mode)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (mode.n_actions * input_dim,):
            raise InvalidInputError(
                f"expected {mode.n_actions * input_dim} parameters, got {params.shape}"
            )
        return cls(params.reshape(mode.n_actions, input_dim).copy(), mode)

    @classmethod
    def zeros(cls, mode: ActionMode | str, input_dim: int) -> "ControllerWeights":
        mode = ActionMode(mode)
        return cls(np.zeros((mode.n_actions, input_dim)), mode)

    @property
    def input_dim(self) -> int:
        return self.w_out.shape[1]

    @property
    def size(self) -> int:
        return self.w_out.size

    def flat(self) -> np.ndarray:
        return self.w_out.reshape(-1).copy()

    def raw(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.input_dim,):
            raise InvalidInputError(f"controller input must have shape ({self.input_dim},), got {s.shape}")
        return self.w_out @ s

    def act(self, s: np.ndarray):
        if self.action_mode is ActionMode.CONTINUOUS3:
            return act_continuous(self, s)
        return act_discrete(self, s)


def assemble_input(x_conv: np.ndarray, x_esn: np.ndarray,
                   d_conv: int | None = None, d_esn: int | None = None) -> np.ndarray:
    """``[x_conv; x_esn; 1]``."""
    x_conv = np.asarray(x_conv, dtype=np.float64)
    x_esn = np.asarray(x_esn, dtype=np.float64)
    if x_conv.ndim != 1 or x_esn.ndim != 1:
        raise InvalidInputError("features must be vectors")
    if d_conv is not None and x_conv.shape[0] != d_conv:
        raise InvalidInputError(f"x_conv has length {x_conv.shape[0]}, expected {d_conv}")
    if d_esn is not None and x_esn.shape[0] != d_esn:
        raise InvalidInputError(f"x_esn has length {x_esn.shape[0]}, expected {d_esn}")
    return np.concatenate([x_conv, x_esn, [1.0]])


def squash_continuous(a: np.ndarray) -> tuple[float, float, float]:
    """(steer, brake, accel) = (tanh a1, (tanh a2 + 1)/2, clip(tanh a3, 0, 1))."""
    t = np.tanh(np.asarray(a, dtype=np.float64))
    return float(t[0]), float((t[1] + 1.0) / 2.0), float(np.clip(t[2], 0.0, 1.0))


def squash_discrete(a: np.ndarray) -> Move:
    # a tie at exactly zero goes left
    return Move.RIGHT if float(np.asarray(a).reshape(-1)[0]) > 0.0 else Move.LEFT


def act_continuous(w: ControllerWeights, s: np.ndarray) -> tuple[float, float, float]:
    if w.action_mode is not ActionMode.CONTINUOUS3:
        raise InvalidInputError("act_continuous needs continuous3 weights")
    return squash_continuous(w.raw(s))


def act_discrete(w: ControllerWeights, s: np.ndarray) -> Move:
    if w.action_mode is not ActionMode.DISCRETE2:
        raise InvalidInputError("act_discrete needs discrete2 weights")
    return squash_discrete(w.raw(s))
