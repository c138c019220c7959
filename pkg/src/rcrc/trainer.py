"""CMA-ES training loop and generalization evaluation.

One coordinator owns the optimizer state.  Each generation it asks for
``n_workers`` candidates, scores every candidate by the mean return over
``episodes_per_candidate`` episodes, and tells the scores back (maximizing).
Episode seeds are hashes of (namespace, generation, worker, episode), so a
candidate's score does not depend on which process evaluated it or when.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import cma_es
from .controller import ActionMode, ControllerWeights, assemble_input, n_params
from .envs import EnvConfig, action_mode_for, make_env
from .fixed_conv import ConvSpec, FeatureExtractor, build_extractor, preprocess
from .prng import Stream, derive_seed
from .reservoir import Reservoir, ReservoirSpec, build_reservoir

log = logging.getLogger(__name__)

TRAIN_NAMESPACE = "train"
EVAL_NAMESPACE = "eval"


@dataclass(frozen=True)
class TrainConfig:
    env: EnvConfig
    n_workers: int | None = None
    episodes_per_candidate: int = 8
    generations: int = 500
    extractor_seed: int = 0
    reservoir_seed: int = 1
    conv: ConvSpec = field(default_factory=ConvSpec)
    reservoir: ReservoirSpec | None = None
    sigma0: float = 0.1
    mean0: float = 0.0
    cma_seed: int = 0
    eigen_interval: int = 1
    eval_trials: int = 100
    eval_seed_base: int = 0
    processes: int = 1
    target_score: float | None = None
    failure_score: float | None = None

    def __post_init__(self):
        if self.n_workers is None:
            object.__setattr__(self, "n_workers", 16 if self.env.kind == "track_runner" else 32)
        if self.reservoir is None:
            object.__setattr__(self, "reservoir", ReservoirSpec(input_dim=self.conv.dense_out))
        if self.n_workers < 2:
            raise ValueError("n_workers must be >= 2 (CMA-ES needs at least two candidates)")
        if self.episodes_per_candidate < 1:
            raise ValueError("episodes_per_candidate must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.eval_trials < 1:
            raise ValueError("eval_trials must be >= 1")
        if self.reservoir.input_dim != self.conv.dense_out:
            raise ValueError("reservoir input_dim must equal the extractor's dense_out")
        if self.reservoir.bias_input:
            raise ValueError("the RCRC reservoir takes CNN features without a bias input")

    @property
    def action_mode(self) -> ActionMode:
        return ActionMode(action_mode_for(self.env.kind))

    @property
    def controller_input_dim(self) -> int:
        return self.conv.dense_out + self.reservoir.state_dim + 1

    @property
    def n_params(self) -> int:
        return n_params(self.action_mode, self.conv.dense_out, self.reservoir.state_dim)


@dataclass
class GenerationReport:
    generation: int
    scores: list[float]
    best_mean: float
    best_candidate_params: np.ndarray = field(repr=False)
    wall_time: float = 0.0


class Agent:
    """Extractor + reservoir + controller acting on raw frames."""

    def __init__(self, extractor: FeatureExtractor, reservoir: Reservoir, weights: ControllerWeights):
        self.extractor = extractor
        self.reservoir = reservoir
        self.weights = weights

    def reset(self) -> None:
        self.reservoir.reset()

    def act(self, raw_frame: np.ndarray):
        """Act on ``S(t) = [x_conv(t); x_esn(t); 1]``, then advance the reservoir with ``x_conv(t)``."""
        x_conv = self.extractor.extract(preprocess(raw_frame))
        s = assemble_input(x_conv, self.reservoir.state)
        action = self.weights.act(s)
        self.reservoir.step(x_conv)
        return action


_MODEL_CACHE: dict = {}


def build_model(cfg: TrainConfig) -> tuple[FeatureExtractor, Reservoir]:
    """Extractor and a zero-state reservoir for ``cfg``; matrices are cached per process."""
    key = (cfg.conv, cfg.extractor_seed, cfg.reservoir, cfg.reservoir_seed)
    cached = _MODEL_CACHE.get(key)
    if cached is None:
        _MODEL_CACHE.clear()
        cached = _MODEL_CACHE[key] = (
            build_extractor(cfg.conv, cfg.extractor_seed),
            build_reservoir(cfg.reservoir, cfg.reservoir_seed),
        )
    extractor, reservoir = cached
    return extractor, reservoir.fresh()


def make_agent(cfg: TrainConfig, weights: ControllerWeights) -> Agent:
    extractor, reservoir = build_model(cfg)
    return Agent(extractor, reservoir, weights)


def play_episode(agent: Agent, env, episode_seed: int, on_step=None) -> float:
    frame = env.reset(episode_seed)
    agent.reset()
    while not env.done:
        action = agent.act(frame)
        result = env.step(action)
        if on_step is not None:
            on_step(env.steps, action, result, agent)
        frame = result.frame
    return env.total_reward


def train_episode_seed(generation: int, worker_id: int, episode: int) -> int:
    return derive_seed(TRAIN_NAMESPACE, generation, worker_id, episode, tag_bit=False)


def eval_episode_seed(seed_base: int, trial: int) -> int:
    return derive_seed(EVAL_NAMESPACE, seed_base, trial, tag_bit=True)


def score_candidate(params: np.ndarray, cfg: TrainConfig, worker_id: int, generation: int) -> float:
    """Mean return of ``params`` over the worker's ``m`` episodes for this generation."""
    weights = ControllerWeights.from_flat(params, cfg.action_mode, cfg.controller_input_dim)
    env = make_env(cfg.env)
    agent = make_agent(cfg, weights)
    total = 0.0
    for j in range(cfg.episodes_per_candidate):
        seed = train_episode_seed(generation, worker_id, j)
        try:
            total += play_episode(agent, env, seed)
        except Exception:
            failure = env.min_score if cfg.failure_score is None else cfg.failure_score
            log.exception("episode failed (generation %d, worker %d, episode %d); scoring %g",
                          generation, worker_id, j, failure)
            total += failure
    return total / cfg.episodes_per_candidate


def _score_job(job):
    params, cfg, worker_id, generation = job
    return score_candidate(params, cfg, worker_id, generation)


def _limit_blas_threads():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return
    threadpool_limits(1)


class Scorer:
    """Evaluates a generation's candidates serially or on a process pool."""

    def __init__(self, processes: int = 1):
        self.processes = processes if processes > 0 else (os.cpu_count() or 1)
        self._pool = None

    def __enter__(self):
        if self.processes > 1:
            self._pool = ProcessPoolExecutor(self.processes, initializer=_limit_blas_threads)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def map(self, jobs: list) -> list[float]:
        if self._pool is None:
            return [_score_job(j) for j in jobs]
        return list(self._pool.map(_score_job, jobs))


def history_csv(history: list[GenerationReport]) -> str:
    """Deterministic history table: generation, per-candidate scores, running best."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "scores", "best_mean"])
    for r in history:
        w.writerow([r.generation, " ".join(repr(float(s)) for s in r.scores), repr(float(r.best_mean))])
    return buf.getvalue()


def timings_csv(history: list[GenerationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "wall_time"])
    for r in history:
        w.writerow([r.generation, f"{r.wall_time:.6f}"])
    return buf.getvalue()


@dataclass
class TrainResult:
    weights: ControllerWeights
    history: list[GenerationReport]
    best_mean: float
    state: cma_es.CmaEsState
    rng: Stream


def train(cfg: TrainConfig, out_dir: str | os.PathLike | None = None, resume: bool = False,
          progress=None) -> TrainResult:
    """Run the CMA-ES loop for ``cfg.generations`` generations.

    Tracks the best candidate by mean score over all generations.  With
    ``out_dir`` set, a checkpoint and the history CSV are rewritten after every
    generation; ``resume=True`` continues from the checkpoint found there.
    """
    from . import checkpoint as ckpt

    out = Path(out_dir) if out_dir is not None else None
    state = cma_es.init(cfg.n_params, cfg.mean0, cfg.sigma0, cfg.n_workers, cfg.eigen_interval)
    rng = Stream(cfg.cma_seed)
    history: list[GenerationReport] = []
    best_params = state.mean.copy()
    best_mean = -math.inf

    if resume and out is not None and (out / ckpt.CHECKPOINT_NAME).exists():
        saved = ckpt.load(out / ckpt.CHECKPOINT_NAME, expected_config=cfg)
        if saved.optimizer is None:
            raise ckpt.CheckpointError("checkpoint has no optimizer state to resume from")
        state, rng_state = saved.optimizer
        rng.state = rng_state
        best_params = saved.weights.flat()
        best_mean = saved.best_mean
        history = ckpt.read_history(out / ckpt.HISTORY_NAME, best_params)[: state.generation]
        log.info("resuming at generation %d", state.generation)

    with Scorer(cfg.processes) as scorer:
        while state.generation < cfg.generations:
            t0 = time.perf_counter()
            g = state.generation
            candidates = cma_es.ask(state, rng)
            jobs = [(c.params, cfg, c.id, g) for c in candidates]
            scores = scorer.map(jobs)
            for c, s in zip(candidates, scores):
                c.fitness = float(s)
            i_best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
            if scores[i_best] > best_mean:
                best_mean = float(scores[i_best])
                best_params = candidates[i_best].params.copy()
            cma_es.tell(state, candidates, maximize=True)
            report = GenerationReport(g, [float(s) for s in scores], best_mean, best_params.copy(),
                                      time.perf_counter() - t0)
            history.append(report)
            log.info("generation %d: best %.3f mean %.3f running best %.3f sigma %.4g",
                     g, max(scores), float(np.mean(scores)), best_mean, state.sigma)
            if out is not None:
                weights = ControllerWeights.from_flat(best_params, cfg.action_mode, cfg.controller_input_dim)
                ckpt.save_run(out, cfg, weights, best_mean, state, rng, history)
            if progress is not None:
                progress(report)
            if cfg.target_score is not None and best_mean >= cfg.target_score:
                break

    weights = ControllerWeights.from_flat(best_params, cfg.action_mode, cfg.controller_input_dim)
    return TrainResult(weights, history, best_mean, state, rng)


def evaluate_generalization(weights: ControllerWeights, cfg: TrainConfig, trials: int | None = None,
                            seed_base: int | None = None) -> tuple[float, float]:
    """Mean and population std of returns over fresh evaluation episodes."""
    scores = evaluation_scores(weights, cfg, trials, seed_base)
    return float(np.mean(scores)), float(np.std(scores))


def evaluation_scores(weights: ControllerWeights, cfg: TrainConfig, trials: int | None = None,
                      seed_base: int | None = None) -> list[float]:
    trials = cfg.eval_trials if trials is None else trials
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed_base = cfg.eval_seed_base if seed_base is None else seed_base
    agent = make_agent(cfg, weights)
    env = make_env(cfg.env)
    return [play_episode(agent, env, eval_episode_seed(seed_base, t)) for t in range(trials)]


def random_policy_scores(cfg: TrainConfig, trials: int | None = None, seed_base: int | None = None,
                         policy_seed: int = 0) -> list[float]:
    """Returns of a uniformly random policy on the evaluation episodes (a paired baseline)."""
    trials = cfg.eval_trials if trials is None else trials
    seed_base = cfg.eval_seed_base if seed_base is None else seed_base
    env = make_env(cfg.env)
    out = []
    for t in range(trials):
        rng = Stream(derive_seed("random-policy", policy_seed, t))
        env.reset(eval_episode_seed(seed_base, t))
        while not env.done:
            env.step(env.random_action(rng))
        out.append(env.total_reward)
    return out


def with_overrides(cfg: TrainConfig, **changes) -> TrainConfig:
    return replace(cfg, **changes)
