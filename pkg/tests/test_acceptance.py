"""Acceptance criteria, each checked at its stated tolerance.

Every test records one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the pytest terminal summary under "acceptance criteria".
"""

from __future__ import annotations

import math
import os
import time

import numpy as np
import pytest

from acceptance_log import report
from harness import narma_certification, narma_reference
from oracles import naive_conv2d
from rcrc import cma_es
from rcrc.benchmarks import rosenbrock, sphere
from rcrc.controller import (
    ActionMode, ControllerWeights, act_continuous, act_discrete, n_params,
)
from rcrc.envs import EnvConfig
from rcrc.fixed_conv import ConvSpec, build_extractor, conv2d, preprocess
from rcrc.prng import Stream
from rcrc.reservoir import ReservoirSpec, build_reservoir
from rcrc.trainer import (
    TrainConfig, evaluate_generalization, history_csv, random_policy_scores, train,
)


def test_reservoir_construction():
    spec = ReservoirSpec()
    worst_rho, zero_ok, t0 = 0.0, True, time.perf_counter()
    built = []
    for seed in range(20):
        r = build_reservoir(spec, seed)
        built.append(r)
    elapsed = time.perf_counter() - t0
    want_zeros = round(0.8 * 512 * 512)
    for r in built:
        rho = np.max(np.abs(np.linalg.eigvals(r.w)))
        worst_rho = max(worst_rho, abs(rho - 0.95))
        zero_ok &= int(np.count_nonzero(r.w == 0.0)) == want_zeros
    ok = worst_rho <= 1e-6 and zero_ok and elapsed < 30
    report("reservoir construction", ok,
           f"max |rho-0.95|={worst_rho:.2e} (<=1e-6), zero count exact={zero_ok}, "
           f"build time {elapsed:.1f}s (<30s)")
    assert ok


def test_echo_state_property():
    spec = ReservoirSpec()
    dists = []
    for seed in range(10):
        a = build_reservoir(spec, seed)
        b = a.fresh()
        b.state[:] = Stream(10_000 + seed).uniform(512) * 2 - 1
        for u in Stream(20_000 + seed).uniform((500, 512)) * 2 - 1:
            a.step(u)
            b.step(u)
        dists.append(float(np.linalg.norm(a.state - b.state)))
    passed = sum(d < 1e-4 for d in dists)
    ok = passed == 10
    report("echo-state fading memory", ok, f"{passed}/10 seeds below 1e-4 (max distance {max(dists):.2e})")
    assert ok


def test_narma_certification():
    t0 = time.perf_counter()
    score = narma_certification(0)
    elapsed = time.perf_counter() - t0
    ref = narma_reference(0)
    ok = score < 0.25 and elapsed < 60
    report("reservoir NARMA-10 certification", ok,
           f"test NMSE {score:.4f} (<0.25; reference ESN {ref:.4f}), runtime {elapsed:.1f}s (<60s)")
    assert ref < 0.25, "threshold not confirmed by the reference ESN"
    assert ok


def test_conv_oracle_equivalence():
    rng = Stream(123)
    worst = 0.0
    for _ in range(200):
        cin, cout = 1 + rng.integers(3), 1 + rng.integers(3)
        h, w = 1 + rng.integers(8), 1 + rng.integers(8)
        k, stride = 1 + rng.integers(5), 1 + rng.integers(3)
        x = rng.normal((cin, h, w))
        kern = rng.normal((cout, cin, k, k))
        worst = max(worst, float(np.max(np.abs(conv2d(x, kern, stride) - naive_conv2d(x, kern, stride)))))
    ok = worst <= 1e-12
    report("conv2d vs naive oracle", ok, f"200 instances, max abs error {worst:.2e} (<=1e-12)")
    assert ok


def test_extractor_contracts():
    a = build_extractor(ConvSpec(), 0)
    b = build_extractor(ConvSpec(), 0)
    rng = Stream(7)
    length_ok = range_ok = same_ok = True
    for i in range(100):
        raw = (rng.uniform((64, 64, 3)) * 256).astype(np.uint8)
        frame = preprocess(raw)
        va, vb = a.extract(frame), b.extract(frame)
        length_ok &= va.shape == (512,)
        range_ok &= bool(np.all(np.abs(va) < 1))
        same_ok &= va.tobytes() == vb.tobytes()
    zero_ok = bool(np.all(a.extract(np.zeros((64, 64, 3))) == 0.0))
    ok = length_ok and range_ok and same_ok and zero_ok
    report("extractor contracts", ok,
           f"length 512={length_ok}, range (-1,1)={range_ok}, zero->zero={zero_ok}, bitwise repeat={same_ok}")
    assert ok


def test_squashing_ranges():
    rng = Stream(99)
    range_ok = scale_ok = True
    for i in range(10_000):
        mag = 10.0 ** (rng.uniform() * 6 - 3)
        w = ControllerWeights(rng.normal((3, 9)) * mag, ActionMode.CONTINUOUS3)
        s = rng.normal(9) * 10.0 ** (rng.uniform() * 4 - 2)
        steer, brake, accel = act_continuous(w, s)
        range_ok &= -1 <= steer <= 1 and 0 <= brake <= 1 and 0 <= accel <= 1
        wd = ControllerWeights(rng.normal((1, 9)) * mag, ActionMode.DISCRETE2)
        c = 10.0 ** (rng.uniform() * 8 - 4)
        scale_ok &= act_discrete(wd, s) == act_discrete(ControllerWeights(wd.w_out * c, "discrete2"), s)
    ok = range_ok and scale_ok
    report("squashing ranges", ok, f"10000 pairs: continuous in range={range_ok}, discrete scale-invariant={scale_ok}")
    assert ok


def _maximize_sphere(seed, budget=20_000):
    s = cma_es.init(10, mean0=Stream(1000 + seed).uniform(10) * 4 - 2, sigma0=1.0)
    rng, evals, best = Stream(seed), 0, math.inf
    while evals + s.popsize <= budget:
        cands = cma_es.ask(s, rng)
        for c in cands:
            c.fitness = -sphere(c.params)
            best = min(best, -c.fitness)
        evals += len(cands)
        if best < 1e-8:
            break
        cma_es.tell(s, cands, maximize=True)
    return best, evals


def test_cma_es_convergence():
    t0 = time.perf_counter()
    sph = [_maximize_sphere(seed) for seed in range(5)]
    ros = []
    for seed in range(5):
        x0 = Stream(1000 + seed).uniform(10) * 4 - 2
        _, fx, evals = cma_es.minimize(rosenbrock, x0, 0.5, seed=seed, max_evals=200_000, target=1e-6)
        ros.append((fx, evals))
    elapsed = time.perf_counter() - t0
    n_sph = sum(f < 1e-8 for f, _ in sph)
    n_ros = sum(f < 1e-6 for f, _ in ros)
    ok = n_sph == 5 and n_ros >= 4 and elapsed < 300
    report("CMA-ES convergence", ok,
           f"sphere {n_sph}/5 <1e-8 (max evals {max(e for _, e in sph)}), "
           f"rosenbrock {n_ros}/5 <1e-6 (max evals {max(e for _, e in ros)}), runtime {elapsed:.1f}s (<300s)")
    assert ok


def test_parameter_counts():
    cont, disc = n_params(ActionMode.CONTINUOUS3), n_params(ActionMode.DISCRETE2)
    c_cfg = TrainConfig(env=EnvConfig("track_runner"))
    d_cfg = TrainConfig(env=EnvConfig("dodge_ball"))
    ok = (cont, disc) == (3075, 1025) and (c_cfg.n_params, d_cfg.n_params) == (3075, 1025)
    report("parameter counts", ok, f"continuous {cont} (3075), discrete {disc} (1025)")
    assert ok


# end-to-end training, shared by the two criteria below

E2E = TrainConfig(
    env=EnvConfig("dodge_ball"),
    n_workers=8,
    episodes_per_candidate=4,
    generations=50,
    conv=ConvSpec(dense_out=64),
    reservoir=ReservoirSpec(input_dim=64, state_dim=64),
    processes=os.cpu_count() or 1,
)


@pytest.fixture(scope="module")
def e2e_runs(tmp_path_factory):
    runs = []
    for name in ("first", "second"):
        out = tmp_path_factory.mktemp(f"e2e-{name}")
        t0 = time.perf_counter()
        result = train(E2E, out)
        runs.append((result, out, time.perf_counter() - t0))
    return runs


def test_end_to_end_training(e2e_runs):
    result, _, elapsed = e2e_runs[0]
    baseline = random_policy_scores(E2E, 100)
    base_mean = float(np.mean(baseline))
    gen_mean, gen_std = evaluate_generalization(result.weights, E2E, 100)
    best_ok = result.best_mean >= 1.5 * base_mean
    gen_ok = gen_mean > base_mean
    ok = best_ok and gen_ok
    report("end-to-end desk-scale training", ok,
           f"random baseline {base_mean:.2f}; best G_i {result.best_mean:.2f} "
           f"(need >= {1.5 * base_mean:.2f}); generalization {gen_mean:.2f}+-{gen_std:.2f} "
           f"over 100 trials (need > {base_mean:.2f}); train time {elapsed / 60:.1f} min "
           f"with {E2E.processes} process(es) on {os.cpu_count()} core(s)")
    assert ok


def test_determinism(e2e_runs):
    (_, out_a, _), (_, out_b, _) = e2e_runs
    a = (out_a / "history.csv").read_bytes()
    b = (out_b / "history.csv").read_bytes()
    ok = a == b and a.count(b"\n") == 51
    report("determinism", ok, f"history CSVs byte-identical={a == b} ({len(a)} bytes, 50 generations)")
    assert ok
