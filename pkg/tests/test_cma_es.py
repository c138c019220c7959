import math

import numpy as np
import pytest

from rcrc import cma_es
from rcrc.benchmarks import rosenbrock, sphere
from rcrc.prng import Stream


def test_default_popsize():
    assert cma_es.default_popsize(3) == 7
    assert cma_es.init(3).popsize == 7
    assert cma_es.default_popsize(10) == 10


def test_init_state():
    s = cma_es.init(4, mean0=[1, 2, 3, 4], sigma0=0.3)
    assert np.array_equal(s.cov, np.eye(4))
    assert np.all(s.path_c == 0) and np.all(s.path_sigma == 0)
    assert s.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(s.weights) < 0)


def test_init_large_dim():
    s = cma_es.init(3075, sigma0=0.1)
    assert s.popsize == 4 + int(3 * math.log(3075))


def test_init_validation():
    with pytest.raises(cma_es.InvalidInputError):
        cma_es.init(3, sigma0=0.0)
    with pytest.raises(cma_es.InvalidInputError):
        cma_es.init(0)


def test_ask_shapes_and_degenerate_sigma():
    s = cma_es.init(5, mean0=1.5, sigma0=1e-300)
    cands = cma_es.ask(s, Stream(0))
    assert len(cands) == s.popsize and all(c.params.shape == (5,) for c in cands)
    assert [c.id for c in cands] == list(range(s.popsize))
    assert all(np.max(np.abs(c.params - 1.5)) < 1e-12 for c in cands)


def test_ask_sample_covariance():
    s = cma_es.init(4, sigma0=0.5, popsize=10_000)
    x = np.array([c.params for c in cma_es.ask(s, Stream(1))])
    emp = np.cov(x.T)
    target = 0.25 * np.eye(4)
    assert np.linalg.norm(emp - target) / np.linalg.norm(target) < 0.05


def _told(state, cands, f, maximize=False):
    for c in cands:
        c.fitness = f(c.params)
    return cma_es.tell(state, cands, maximize)


def test_tell_matches_reference_implementation():
    purecma = pytest.importorskip("cma.more_algorithms.purecma")
    x0 = [3.0, -2.0, 1.0, 4.0, 0.5]
    s = cma_es.init(5, mean0=x0, sigma0=0.7)
    cands = cma_es.ask(s, Stream(4))
    ref = purecma.CMAES(list(x0), 0.7)
    assert ref.params.lam == s.popsize
    assert np.allclose(ref.params.weights[: s.mu], s.weights, rtol=0, atol=1e-15)
    for name, ours in [("cc", s.c_c), ("cs", s.c_sigma), ("c1", s.c_1), ("cmu", s.c_mu), ("mueff", s.mu_eff)]:
        assert getattr(ref.params, name) == pytest.approx(ours, rel=1e-14)
    arx = [c.params.tolist() for c in cands]
    fit = [sphere(c.params) for c in cands]
    ref.tell(arx, fit)
    _told(s, cands, sphere)
    assert np.max(np.abs(np.array(ref.xmean) - s.mean)) < 1e-10
    assert np.max(np.abs(np.array(ref.pc) - s.path_c)) < 1e-10
    assert np.max(np.abs(np.array(ref.ps) - s.path_sigma)) < 1e-10
    assert np.max(np.abs(np.array([list(row) for row in ref.C]) - s.cov)) < 1e-10
    assert np.linalg.norm(s.mean) < np.linalg.norm(x0)


def test_identical_candidates_keep_mean():
    s = cma_es.init(3, mean0=[1.0, 2.0, 3.0], sigma0=0.5)
    cands = cma_es.ask(s, Stream(0))
    for c in cands:
        c.params = np.array([1.0, 2.0, 3.0])
        c.fitness = 1.0
    cma_es.tell(s, cands)
    assert np.allclose(s.mean, [1.0, 2.0, 3.0], rtol=0, atol=1e-15)


def test_tell_rejects_bad_fitness():
    s = cma_es.init(3)
    cands = cma_es.ask(s, Stream(0))
    with pytest.raises(cma_es.InvalidInputError):
        cma_es.tell(s, cands)
    for c in cands:
        c.fitness = 0.0
    cands[2].fitness = float("nan")
    with pytest.raises(cma_es.InvalidInputError):
        cma_es.tell(s, cands)


def _run(seed, gens, f=sphere, shift=0.0, maximize=False, dim=6):
    s = cma_es.init(dim, mean0=Stream(100 + seed).uniform(dim), sigma0=0.5)
    rng = Stream(seed)
    for _ in range(gens):
        cands = cma_es.ask(s, rng)
        sign = -1.0 if maximize else 1.0
        _told(s, cands, lambda x: sign * f(x) + shift, maximize)
    return s


def _same(a, b):
    return (np.array_equal(a.mean, b.mean) and a.sigma == b.sigma and np.array_equal(a.cov, b.cov)
            and np.array_equal(a.path_c, b.path_c) and np.array_equal(a.path_sigma, b.path_sigma))


def test_fitness_shift_invariance():
    assert _same(_run(0, 30), _run(0, 30, shift=1234.5))


def test_maximize_is_negated_minimize():
    assert _same(_run(1, 25), _run(1, 25, maximize=True))


def test_bitwise_reproducible():
    assert _same(_run(2, 40), _run(2, 40))


def test_tie_break_by_id():
    s1, s2 = cma_es.init(3, sigma0=1.0), cma_es.init(3, sigma0=1.0)
    c1, c2 = cma_es.ask(s1, Stream(0)), cma_es.ask(s2, Stream(0))
    for c in c1 + c2:
        c.fitness = 0.0
    cma_es.tell(s1, c1)
    cma_es.tell(s2, list(reversed(c2)))
    assert _same(s1, s2)
    mu_best = np.array([c.params for c in c1[: s1.mu]])
    assert np.allclose(s1.mean, s1.weights @ mu_best, atol=1e-14)


def test_covariance_stays_symmetric_positive_definite():
    s = cma_es.init(8, mean0=1.0, sigma0=0.5)
    rng = Stream(3)
    for _ in range(500):
        _told(s, cma_es.ask(s, rng), sphere)
        assert np.max(np.abs(s.cov - s.cov.T)) <= 1e-10
        assert s.sigma > 0
    assert np.linalg.eigvalsh(s.cov).min() > 0


def test_median_progress_over_windows():
    curves = []
    for seed in range(10):
        s = cma_es.init(6, mean0=Stream(100 + seed).uniform(6) * 4 - 2, sigma0=0.5)
        rng, best, curve = Stream(seed), math.inf, []
        for _ in range(100):
            cands = cma_es.ask(s, rng)
            _told(s, cands, sphere)
            best = min(best, min(c.fitness for c in cands))
            curve.append(best)
        curves.append(curve)
    med = np.median(np.array(curves), axis=0)
    windows = med[9::10]
    assert np.all(np.diff(windows) < 0)


def test_eigen_interval_lazy_updates():
    s = cma_es.init(4, sigma0=0.5, eigen_interval=3)
    rng = Stream(0)
    for g in range(1, 7):
        _told(s, cma_es.ask(s, rng), sphere)
        assert s.eigen_generation == 3 * (g // 3)


def test_minimize_sphere_and_rosenbrock_small():
    x, fx, evals = cma_es.minimize(sphere, np.full(4, 2.0), 1.0, seed=0, max_evals=5000, target=1e-10)
    assert fx <= 1e-10 and evals <= 5000
    x, fx, _ = cma_es.minimize(rosenbrock, np.zeros(4), 0.5, seed=0, max_evals=20_000, target=1e-8)
    assert fx <= 1e-8
    assert np.allclose(x, 1.0, atol=1e-3)
