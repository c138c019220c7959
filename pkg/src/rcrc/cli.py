"""Command-line interface: ``rcrc train|eval|rollout|dump-features|bench``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_mod
from . import config as config_mod
from .controller import Move
from .envs import make_env
from .fixed_conv import build_extractor, preprocess
from .prng import Stream
from .reservoir import build_reservoir
from .trainer import evaluate_generalization, make_agent, play_episode, train

log = logging.getLogger("rcrc")


class CliError(Exception):
    pass


def write_ppm(path: Path, rgb: np.ndarray) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes())


def write_pgm(path: Path, gray: np.ndarray) -> None:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes())


def read_pnm(path: Path) -> np.ndarray:
    """Decode a binary PGM/PPM written by this module."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end].decode("ascii"))
        pos = end
    pos += 1
    magic, w, h, _ = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    channels = {"P5": 1, "P6": 3}[magic]
    arr = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos)
    return arr.reshape(h, w, channels) if channels == 3 else arr.reshape(h, w)


def _to_gray(a: np.ndarray) -> np.ndarray:
    """Map tanh activations in [-1, 1] to bytes."""
    return np.clip(np.round((a + 1.0) * 127.5), 0, 255).astype(np.uint8)


def tile_maps(maps: np.ndarray, pad: int = 1) -> np.ndarray:
    """Arrange (C, H, W) feature maps in a near-square grid."""
    c, h, w = maps.shape
    cols = int(math.ceil(math.sqrt(c)))
    rows = int(math.ceil(c / cols))
    grid = np.zeros((rows * (h + pad) - pad, cols * (w + pad) - pad), dtype=maps.dtype)
    for i in range(c):
        r, q = divmod(i, cols)
        grid[r * (h + pad) : r * (h + pad) + h, q * (w + pad) : q * (w + pad) + w] = maps[i]
    return grid


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"{path}: directory is not writable ({exc.strerror})") from None
    return path


def cmd_train(args) -> int:
    cfg, out = config_mod.load(args.config, args.set)
    if args.out:
        out = Path(args.out)
    _ensure_dir(out)
    (out / "config.txt").write_text(config_mod.dumps(cfg))
    result = train(cfg, out, resume=args.resume)
    print(f"generations={len(result.history)} best_mean={result.best_mean!r} out={out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = ckpt_mod.load(args.checkpoint)
    mean, std = evaluate_generalization(ckpt.weights, ckpt.config, args.trials, args.seed_base)
    print(f"mean={mean!r} std={std!r} trials={args.trials or ckpt.config.eval_trials}")
    return 0


def cmd_rollout(args) -> int:
    ckpt = ckpt_mod.load(args.checkpoint)
    dump = _ensure_dir(Path(args.dump_dir))
    cfg = ckpt.config
    env = make_env(cfg.env)
    agent = make_agent(cfg, ckpt.weights)
    rows, states = [], []

    def on_step(step, action, result, agent):
        if isinstance(action, Move):
            act = str(int(action))
        else:
            act = " ".join(repr(float(a)) for a in action)
        rows.append((step, act, repr(result.reward)))
        states.append(agent.reservoir.state.copy())
        write_ppm(dump / f"frame_{step:05d}.ppm", result.frame)

    first = env.reset(args.episode_seed)
    write_ppm(dump / "frame_00000.ppm", first)
    score = play_episode(agent, env, args.episode_seed, on_step)
    with open(dump / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "action", "reward"])
        w.writerows(rows)
    np.savetxt(dump / "states.csv", np.array(states), delimiter=",", fmt="%.17g")
    print(f"score={score!r} steps={len(rows)} dump_dir={dump}")
    return 0


def cmd_dump_features(args) -> int:
    ckpt = ckpt_mod.load(args.checkpoint)
    cfg = ckpt.config
    dump = _ensure_dir(Path(args.dump_dir))
    env = make_env(cfg.env)
    frame = env.reset(args.episode_seed)
    rng = Stream(args.episode_seed)
    for _ in range(args.steps):
        if env.done:
            break
        frame = env.step(env.random_action(rng)).frame
    extractor = build_extractor(cfg.conv, cfg.extractor_seed)
    write_ppm(dump / "input.ppm", frame)
    acts = extractor.activations(preprocess(frame))
    for i, a in enumerate(acts[:-1]):
        write_pgm(dump / f"layer{i + 1}.pgm", _to_gray(tile_maps(a)))
    dense = acts[-1]
    side = int(math.ceil(math.sqrt(dense.size)))
    padded = np.zeros(side * side)
    padded[: dense.size] = dense
    write_pgm(dump / "dense.pgm", _to_gray(padded.reshape(side, side)))
    print(f"layers={len(acts)} dump_dir={dump}")
    return 0


def cmd_bench(args) -> int:
    cfg, _ = config_mod.load(args.config, args.set) if args.config else (None, None)
    if cfg is None:
        from .envs import EnvConfig
        from .trainer import TrainConfig

        cfg = TrainConfig(env=EnvConfig("track_runner"))
    extractor = build_extractor(cfg.conv, cfg.extractor_seed)
    reservoir = build_reservoir(cfg.reservoir, cfg.reservoir_seed)
    env = make_env(cfg.env)
    frame = env.reset(0)
    rng = Stream(0)
    t_extract = t_step = t_env = 0.0
    for _ in range(args.frames):
        t0 = time.perf_counter()
        x = extractor.extract(preprocess(frame))
        t1 = time.perf_counter()
        reservoir.step(x)
        t2 = time.perf_counter()
        if env.done:
            env.reset(0)
        frame = env.step(env.random_action(rng)).frame
        t3 = time.perf_counter()
        t_extract += t1 - t0
        t_step += t2 - t1
        t_env += t3 - t2
    n = args.frames
    print(f"extract_ms={1e3 * t_extract / n:.3f} reservoir_step_ms={1e3 * t_step / n:.3f} "
          f"env_step_ms={1e3 * t_env / n:.3f} frames={n}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rcrc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log every generation")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a controller with CMA-ES")
    t.add_argument("config")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    t.add_argument("--out", help="output directory (overrides output.dir)")
    t.add_argument("--resume", action="store_true", help="continue from the checkpoint in the output directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="average score over fresh evaluation episodes")
    e.add_argument("checkpoint")
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--seed-base", type=int, default=None)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("rollout", help="play one episode and dump frames and a trace")
    r.add_argument("checkpoint")
    r.add_argument("--episode-seed", type=int, default=0)
    r.add_argument("--dump-dir", required=True)
    r.set_defaults(func=cmd_rollout)

    d = sub.add_parser("dump-features", help="write per-layer activation images for one frame")
    d.add_argument("checkpoint")
    d.add_argument("--episode-seed", type=int, default=0)
    d.add_argument("--steps", type=int, default=20, help="random steps before the captured frame")
    d.add_argument("--dump-dir", required=True)
    d.set_defaults(func=cmd_dump_features)

    b = sub.add_parser("bench", help="time feature extraction and reservoir steps per frame")
    b.add_argument("config", nargs="?")
    b.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    b.add_argument("--frames", type=int, default=50)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if getattr(args, "trials", None) is not None and args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (config_mod.ConfigError, ckpt_mod.CheckpointError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
