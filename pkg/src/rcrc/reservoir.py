"""Leaky echo state network with a ridge-regression readout.

The recurrent matrix is Gaussian, masked to an exact sparsity and rescaled to
a target spectral radius.  In RCRC mode (``bias_input=False``) the reservoir
is driven by CNN features directly; generic mode appends a constant 1 to every
input before the input projection.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .prng import PRNG_ID, Stream


class InvalidInputError(ValueError):
    pass


class RescaleError(ArithmeticError):
    """The masked recurrent matrix has (numerically) zero spectral radius."""


class ConvergenceError(ArithmeticError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ReservoirSpec:
    input_dim: int = 512
    state_dim: int = 512
    leak_rate: float = 0.8
    sparsity: float = 0.8
    spectral_radius: float = 0.95
    weight_stddev: float = 0.1
    bias_input: bool = False

    def __post_init__(self):
        if self.input_dim < 1 or self.state_dim < 1:
            raise ValueError("input_dim and state_dim must be positive")
        if not 0.0 <= self.leak_rate <= 1.0:
            raise ValueError(f"leak_rate must lie in [0, 1], got {self.leak_rate}")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError(f"sparsity must lie in [0, 1], got {self.sparsity}")
        if not self.spectral_radius > 0:
            raise ValueError("spectral_radius must be positive")
        if not self.weight_stddev > 0:
            raise ValueError("weight_stddev must be positive")

    @property
    def effective_input_dim(self) -> int:
        return self.input_dim + int(self.bias_input)

    @property
    def masked_count(self) -> int:
        return int(round(self.sparsity * self.state_dim**2))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "state_dim": self.state_dim,
            "leak_rate": self.leak_rate,
            "sparsity": self.sparsity,
            "spectral_radius": self.spectral_radius,
            "weight_stddev": self.weight_stddev,
            "bias_input": self.bias_input,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReservoirSpec":
        return cls(**d)


def spectral_radius(
    m: np.ndarray,
    seed: int = 0,
    max_iter: int = 10_000,
    tol: float = 1e-10,
    dense_fallback_max_dim: int = 1024,
) -> float:
    """Largest absolute eigenvalue of a square matrix.

    Runs subspace iteration on a 2-dimensional block with Rayleigh-Ritz
    extraction, which converges whether the dominant eigenvalue is real or a
    complex-conjugate pair.  Stops when the Ritz residual falls below
    ``tol * |ritz value|``.  If the block collapses (e.g. nilpotent matrices),
    the residual stalls, or ``max_iter`` is reached, falls back to a dense
    eigenvalue solve for matrices up to ``dense_fallback_max_dim``; beyond that
    a ``ConvergenceError`` is raised.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    n = m.shape[0]
    scale = np.linalg.norm(m)
    if scale == 0.0:
        return 0.0
    if n <= 2:
        return float(np.max(np.abs(np.linalg.eigvals(m))))

    check_every = 10
    stall_window = 100  # checks, i.e. 1000 iterations
    q, _ = np.linalg.qr(Stream(seed).normal((n, 2)))
    history = []
    for it in range(1, max_iter + 1):
        z = m @ q
        if it % check_every:
            norms = np.linalg.norm(z, axis=0)
            if np.any(norms <= 1e-300):
                break
            q = z / norms
            continue
        q, r = np.linalg.qr(q)
        z = m @ q
        ritz, vecs = np.linalg.eig(q.T @ z)
        top = int(np.argmax(np.abs(ritz)))
        lam = abs(ritz[top])
        v = q @ vecs[:, top]
        residual = np.linalg.norm(z @ vecs[:, top] - ritz[top] * v) / np.linalg.norm(v)
        if lam > 1e-12 * scale and residual <= tol * lam:
            return float(lam)
        rel = residual / lam if lam > 0 else np.inf
        history.append(rel)
        if len(history) > stall_window and not rel < 0.5 * history[-1 - stall_window]:
            break
        q, r = np.linalg.qr(z)
        if min(abs(r[0, 0]), abs(r[1, 1])) <= 1e-14 * scale:
            break
    if n <= dense_fallback_max_dim:
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


class Reservoir:
    """Fixed random matrices plus a mutable leaky state.

    ``w_in`` and ``w`` are read-only and may be shared; the state is owned by
    one caller at a time (use :meth:`fresh` to get an independent copy).
    """

    def __init__(self, spec: ReservoirSpec, seed: int, w_in: np.ndarray, w: np.ndarray):
        self.spec = spec
        self.seed = seed
        self.w_in = w_in
        self.w = w
        self.state = np.zeros(spec.state_dim)

    @property
    def prng_id(self) -> str:
        return PRNG_ID

    def step(self, u: np.ndarray) -> np.ndarray:
        """Advance one step with input ``u`` and return the new state."""
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.spec.input_dim,):
            raise InvalidInputError(
                f"input must have shape ({self.spec.input_dim},), got {u.shape}"
            )
        if self.spec.bias_input:
            u = np.append(u, 1.0)
        alpha = self.spec.leak_rate
        candidate = np.tanh(self.w_in @ u + self.w @ self.state)
        self.state *= 1.0 - alpha
        self.state += alpha * candidate
        return self.state

    def reset(self) -> None:
        self.state[:] = 0.0

    def run(self, inputs: np.ndarray) -> np.ndarray:
        """Drive with a sequence ``(T, input_dim)``; returns the ``(T, state_dim)`` states."""
        inputs = np.asarray(inputs, dtype=np.float64)
        return np.array([self.step(u).copy() for u in inputs])

    def fresh(self) -> "Reservoir":
        """Copy sharing the fixed matrices, with its own zeroed state."""
        clone = copy.copy(self)
        clone.state = np.zeros(self.spec.state_dim)
        return clone


def build_reservoir(spec: ReservoirSpec | None = None, seed: int = 0) -> Reservoir:
    """Draw W_in, then W, then the sparsity mask, from one stream; rescale W to the target radius."""
    spec = spec or ReservoirSpec()
    stream = Stream(seed)
    d = spec.state_dim
    w_in = stream.normal((d, spec.effective_input_dim), scale=spec.weight_stddev)
    w = stream.normal((d, d), scale=spec.weight_stddev)
    masked = stream.subset(d * d, spec.masked_count)
    w.reshape(-1)[masked] = 0.0
    radius = spectral_radius(w, seed=seed)
    if not radius > 1e-12 * max(np.linalg.norm(w), 1e-300):
        raise RescaleError(
            f"masked recurrent matrix has spectral radius {radius:g}; cannot rescale to "
            f"{spec.spectral_radius} (lower the sparsity or change the seed)"
        )
    w *= spec.spectral_radius / radius
    w_in.setflags(write=False)
    w.setflags(write=False)
    return Reservoir(spec, seed, w_in, w)


@dataclass
class RidgeReadout:
    """Linear readout ``y = W [state; input; 1]``."""

    weights: np.ndarray
    regularization: float
    state_dim: int
    input_dim: int

    def __post_init__(self):
        if self.regularization < 0:
            raise ValueError("regularization must be non-negative")
        if self.weights.shape[1] != self.state_dim + self.input_dim + 1:
            raise ValueError("weight matrix width does not match state_dim + input_dim + 1")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("readout weights must be finite")

    def predict(self, state: np.ndarray, u: np.ndarray) -> np.ndarray:
        state = np.atleast_1d(np.asarray(state, dtype=np.float64))
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        if state.shape != (self.state_dim,) or u.shape != (self.input_dim,):
            raise InvalidInputError(
                f"expected state ({self.state_dim},) and input ({self.input_dim},), "
                f"got {state.shape} and {u.shape}"
            )
        return self.weights @ np.concatenate([state, u, [1.0]])

    def predict_many(self, states: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return _design(states, inputs) @ self.weights.T


def _design(states: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    if states.ndim != 2 or states.shape[0] != inputs.shape[0]:
        raise InvalidInputError("states and inputs must be 2-D with the same number of rows")
    return np.hstack([states, inputs, np.ones((states.shape[0], 1))])


def fit_ridge(states: np.ndarray, inputs: np.ndarray, targets: np.ndarray, reg: float) -> RidgeReadout:
    """Solve ``(Z^T Z + reg I) W^T = Z^T Y`` with ``Z = [states, inputs, 1]``."""
    if reg < 0:
        raise ValueError(f"regularization must be non-negative, got {reg}")
    z = _design(states, inputs)
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if z.shape[0] == 0 or y.shape[0] != z.shape[0]:
        raise InvalidInputError("need N > 0 samples with matching targets")
    gram = z.T @ z
    if reg == 0 and np.linalg.matrix_rank(z) < z.shape[1]:
        raise SingularMatrixError(
            "design matrix is rank deficient with regularization 0; use a positive regularization"
        )
    gram[np.diag_indices_from(gram)] += reg
    try:
        w = np.linalg.solve(gram, z.T @ y).T
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{exc}; use a positive regularization") from exc
    states = np.asarray(states)
    return RidgeReadout(w, reg, states.shape[1], z.shape[1] - states.shape[1] - 1)


def predict(readout: RidgeReadout, state: np.ndarray, u: np.ndarray) -> np.ndarray:
    return readout.predict(state, u)


def nmse(prediction: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error divided by the target variance."""
    prediction = np.asarray(prediction, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    return float(np.mean((prediction - target) ** 2) / np.var(target))
