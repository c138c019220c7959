"""Reference tasks used to certify the reservoir and the optimizer."""

from __future__ import annotations

import numpy as np

from .prng import Stream


def narma10(n: int, seed: int = 0, washout: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """NARMA-10 input/target pair of length ``n``.

    ``u(t) ~ U[0, 0.5]`` and
    ``y(t+1) = 0.3 y(t) + 0.05 y(t) sum_{i<10} y(t-i) + 1.5 u(t-9) u(t) + 0.1``.
    ``target[t]`` is ``y(t+1)``, so it depends on inputs up to ``u[t]``.  The
    first ``washout`` steps of the recursion are generated and discarded.
    """
    total = n + washout
    u = Stream(seed).uniform(total) * 0.5
    y = np.zeros(total + 1)
    for t in range(9, total):
        y[t + 1] = (
            0.3 * y[t]
            + 0.05 * y[t] * np.sum(y[t - 9 : t + 1])
            + 1.5 * u[t - 9] * u[t]
            + 0.1
        )
    return u[washout:], y[washout + 1 :]


def sphere(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(x @ x)


def rosenbrock(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))
