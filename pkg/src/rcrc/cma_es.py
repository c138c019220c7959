"""(mu/mu_w, lambda)-CMA-ES with an ask/tell interface.

Strategy constants and update rules follow Hansen's tutorial defaults
(positive recombination weights only, rank-one plus rank-mu covariance
update, cumulative step-size adaptation).  The core minimizes; ``tell`` with
``maximize=True`` negates scores at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .prng import Stream


class InvalidInputError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def default_popsize(dim: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(dim)))


@dataclass
class Candidate:
    id: int
    params: np.ndarray
    fitness: float | None = None


@dataclass
class CmaEsState:
    dim: int
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    path_sigma: np.ndarray
    path_c: np.ndarray
    popsize: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float
    generation: int = 0
    eigen_interval: int = 1
    eigen_generation: int = 0
    basis: np.ndarray = field(default=None, repr=False)
    scales: np.ndarray = field(default=None, repr=False)

    @property
    def mu(self) -> int:
        return len(self.weights)

    def update_eigensystem(self) -> None:
        self.cov = (self.cov + self.cov.T) / 2.0
        try:
            eigvals, basis = np.linalg.eigh(self.cov)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigendecomposition of C failed: {exc}") from exc
        if not np.all(np.isfinite(eigvals)) or eigvals.min() <= 0:
            raise NumericError(f"covariance lost positive definiteness (min eigenvalue {eigvals.min():g})")
        self.basis = basis
        self.scales = np.sqrt(eigvals)
        self.eigen_generation = self.generation

    def inv_sqrt_cov(self, v: np.ndarray) -> np.ndarray:
        return self.basis @ ((self.basis.T @ v) / self.scales)


def init(dim: int, mean0=0.0, sigma0: float = 0.1, popsize: int | None = None,
         eigen_interval: int = 1) -> CmaEsState:
    """Fresh state with C = I and zero evolution paths."""
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    if not sigma0 > 0:
        raise InvalidInputError(f"sigma0 must be positive, got {sigma0}")
    lam = default_popsize(dim) if popsize is None else int(popsize)
    if lam < 2:
        raise InvalidInputError("popsize must be at least 2")
    mean = np.broadcast_to(np.asarray(mean0, dtype=np.float64), (dim,)).copy()

    mu = lam // 2
    raw = math.log(lam / 2.0 + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / float(np.sum(weights**2))
    n = float(dim)
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

    state = CmaEsState(
        dim=dim, mean=mean, sigma=float(sigma0), cov=np.eye(dim),
        path_sigma=np.zeros(dim), path_c=np.zeros(dim), popsize=lam,
        weights=weights, mu_eff=mu_eff, c_sigma=c_sigma, d_sigma=d_sigma,
        c_c=c_c, c_1=c_1, c_mu=c_mu, chi_n=chi_n, eigen_interval=max(1, int(eigen_interval)),
    )
    state.basis = np.eye(dim)
    state.scales = np.ones(dim)
    return state


def ask(state: CmaEsState, rng: Stream) -> list[Candidate]:
    """Sample ``popsize`` candidates ``mean + sigma * B D z`` (z drawn row by row)."""
    if not (np.all(np.isfinite(state.basis)) and np.all(np.isfinite(state.scales))):
        raise NumericError("covariance eigensystem is not finite")
    z = rng.normal((state.popsize, state.dim))
    x = state.mean + state.sigma * ((z * state.scales) @ state.basis.T)
    return [Candidate(i, x[i]) for i in range(state.popsize)]


def tell(state: CmaEsState, candidates: list[Candidate], maximize: bool = False) -> CmaEsState:
    """Update mean, paths, step size and covariance in place; returns ``state``.

    Candidates are ranked by fitness (ties broken by ascending id).
    """
    if len(candidates) < state.mu:
        raise InvalidInputError(f"need at least {state.mu} candidates, got {len(candidates)}")
    fitness = []
    for c in candidates:
        if c.fitness is None or not math.isfinite(c.fitness):
            raise InvalidInputError(f"candidate {c.id} has non-finite fitness {c.fitness!r}")
        fitness.append(-c.fitness if maximize else c.fitness)
    order = sorted(range(len(candidates)), key=lambda i: (fitness[i], candidates[i].id))
    x = np.array([np.asarray(candidates[i].params, dtype=np.float64) for i in order[: state.mu]])
    if x.shape[1] != state.dim or not np.all(np.isfinite(x)):
        raise InvalidInputError("candidate parameters must be finite vectors of length dim")

    n, w = state.dim, state.weights
    old_mean = state.mean
    y = (x - old_mean) / state.sigma
    y_w = w @ y
    state.mean = old_mean + state.sigma * y_w

    cs = state.c_sigma
    state.path_sigma = (1.0 - cs) * state.path_sigma + math.sqrt(cs * (2.0 - cs) * state.mu_eff) * state.inv_sqrt_cov(y_w)
    ps_norm = float(np.linalg.norm(state.path_sigma))
    g = state.generation + 1
    h_sigma = ps_norm / math.sqrt(1.0 - (1.0 - cs) ** (2 * g)) < (1.4 + 2.0 / (n + 1.0)) * state.chi_n

    cc = state.c_c
    state.path_c = (1.0 - cc) * state.path_c
    if h_sigma:
        state.path_c += math.sqrt(cc * (2.0 - cc) * state.mu_eff) * y_w
    delta = (1.0 - float(h_sigma)) * cc * (2.0 - cc)

    c1, cmu = state.c_1, state.c_mu
    rank_mu = (y.T * w) @ y
    state.cov = (
        (1.0 + c1 * delta - c1 - cmu * float(w.sum())) * state.cov
        + c1 * np.outer(state.path_c, state.path_c)
        + cmu * rank_mu
    )
    state.cov = (state.cov + state.cov.T) / 2.0
    state.sigma *= math.exp((cs / state.d_sigma) * (ps_norm / state.chi_n - 1.0))
    if not (math.isfinite(state.sigma) and state.sigma > 0):
        raise NumericError(f"step size became {state.sigma}")

    state.generation = g
    if g - state.eigen_generation >= state.eigen_interval:
        state.update_eigensystem()
    return state


def minimize(f, x0, sigma0: float, seed: int = 0, max_evals: int = 10_000,
             target: float | None = None, popsize: int | None = None):
    """Run ask/tell on ``f`` until ``max_evals`` or ``f <= target``.  Returns (best_x, best_f, evals)."""
    x0 = np.asarray(x0, dtype=np.float64)
    state = init(x0.size, x0, sigma0, popsize)
    rng = Stream(seed)
    best_x, best_f, evals = x0, math.inf, 0
    while evals + state.popsize <= max_evals:
        cands = ask(state, rng)
        for c in cands:
            c.fitness = float(f(c.params))
            if c.fitness < best_f:
                best_x, best_f = c.params.copy(), c.fitness
        evals += len(cands)
        if target is not None and best_f <= target:
            break
        tell(state, cands)
    return best_x, best_f, evals
