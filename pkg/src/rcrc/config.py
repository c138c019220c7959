"""Flat ``section.key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Every key is known in advance
(see ``SCHEMA``); unknown keys, duplicates and unparseable values are
reported with the file name and line number.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

from .envs import KINDS, EnvConfig
from .fixed_conv import ConvSpec
from .reservoir import ReservoirSpec
from .trainer import TrainConfig

OUTPUT_ROOT_ENV = "RCRC_OUTPUT_ROOT"

REQUIRED = object()
OPTIONAL = None

# key -> (type, default)
SCHEMA: dict[str, tuple[type, object]] = {
    "env.kind": (str, REQUIRED),
    "env.max_steps": (int, OPTIONAL),
    "env.seed": (int, 0),
    "train.n_workers": (int, OPTIONAL),
    "train.episodes_per_candidate": (int, 8),
    "train.generations": (int, 500),
    "train.eval_trials": (int, 100),
    "train.eval_seed_base": (int, 0),
    "train.processes": (int, 1),
    "train.target_score": (float, OPTIONAL),
    "train.failure_score": (float, OPTIONAL),
    "extractor.seed": (int, 0),
    "extractor.layers": (str, "31:32:2,14:64:2,6:128:2"),
    "extractor.dense_out": (int, 512),
    "extractor.weight_stddev": (float, 0.06),
    "reservoir.seed": (int, 1),
    "reservoir.state_dim": (int, 512),
    "reservoir.leak_rate": (float, 0.8),
    "reservoir.sparsity": (float, 0.8),
    "reservoir.spectral_radius": (float, 0.95),
    "reservoir.weight_stddev": (float, 0.1),
    "cma.sigma0": (float, 0.1),
    "cma.mean0": (float, 0.0),
    "cma.seed": (int, 0),
    "cma.eigen_interval": (int, 1),
    "output.dir": (str, OPTIONAL),
}

# Per-key value checks applied while parsing so errors carry a line number.
CHECKS = {
    "env.kind": (lambda v: v in KINDS, f"must be one of {', '.join(KINDS)}"),
    "env.max_steps": (lambda v: v is None or v >= 1, "must be >= 1"),
    "train.n_workers": (lambda v: v is None or v >= 2, "must be >= 2"),
    "train.episodes_per_candidate": (lambda v: v >= 1, "must be >= 1"),
    "train.generations": (lambda v: v >= 0, "must be >= 0"),
    "train.eval_trials": (lambda v: v >= 1, "must be >= 1"),
    "extractor.dense_out": (lambda v: v >= 1, "must be >= 1"),
    "extractor.weight_stddev": (lambda v: v > 0, "must be > 0"),
    "reservoir.state_dim": (lambda v: v >= 1, "must be >= 1"),
    "reservoir.leak_rate": (lambda v: 0 < v <= 1, "must be in (0, 1]"),
    "reservoir.sparsity": (lambda v: 0 <= v < 1, "must be in [0, 1)"),
    "reservoir.spectral_radius": (lambda v: v > 0, "must be > 0"),
    "reservoir.weight_stddev": (lambda v: v > 0, "must be > 0"),
    "cma.sigma0": (lambda v: v > 0, "must be > 0"),
    "cma.eigen_interval": (lambda v: v >= 1, "must be >= 1"),
}

# Keys that do not change the per-generation results and are left out of the
# config hash, so a run can be resumed with a larger budget or more processes.
UNHASHED = {"train.processes", "train.generations", "train.target_score", "output.dir"}


class ConfigError(ValueError):
    pass


def _convert(key: str, raw: str, where: str):
    typ = SCHEMA[key][0]
    if raw.lower() in ("", "none") and SCHEMA[key][1] is OPTIONAL:
        return None
    try:
        if typ is int:
            return int(raw, 0)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: {key} expects {typ.__name__}, got {raw!r}") from None
    return raw


def _checked(key: str, raw: str, where: str):
    value = _convert(key, raw, where)
    check = CHECKS.get(key)
    if check is not None and not check[0](value):
        raise ConfigError(f"{where}: {key} {check[1]}, got {raw!r}")
    return value


def parse(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse config text into typed values (defaults not applied)."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set on line {lines[key]})")
        values[key] = _checked(key, raw, where)
        lines[key] = lineno
    return values


def apply_overrides(values: dict[str, object], overrides: list[str]) -> dict[str, object]:
    values = dict(values)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"--set {item!r}: unknown key {key!r}")
        values[key] = _checked(key, raw, f"--set {key}")
    return values


def _parse_layers(text: str) -> tuple[tuple[int, int, int], ...]:
    try:
        layers = tuple(tuple(int(v) for v in part.split(":")) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"extractor.layers: expected 'k:filters:stride,...', got {text!r}") from None
    if any(len(l) != 3 for l in layers):
        raise ConfigError(f"extractor.layers: expected 'k:filters:stride,...', got {text!r}")
    return layers


def build(values: dict[str, object], source: str = "<config>") -> TrainConfig:
    """Apply defaults and construct a validated :class:`TrainConfig`."""
    v = {}
    for key, (_, default) in SCHEMA.items():
        if key in values:
            v[key] = values[key]
        elif default is REQUIRED:
            raise ConfigError(f"{source}: missing required key {key!r}")
        else:
            v[key] = default
    try:
        conv = ConvSpec(
            layers=_parse_layers(v["extractor.layers"]),
            dense_out=v["extractor.dense_out"],
            weight_stddev=v["extractor.weight_stddev"],
        )
        reservoir = ReservoirSpec(
            input_dim=conv.dense_out,
            state_dim=v["reservoir.state_dim"],
            leak_rate=v["reservoir.leak_rate"],
            sparsity=v["reservoir.sparsity"],
            spectral_radius=v["reservoir.spectral_radius"],
            weight_stddev=v["reservoir.weight_stddev"],
        )
        return TrainConfig(
            env=EnvConfig(kind=v["env.kind"], max_steps=v["env.max_steps"], seed=v["env.seed"]),
            n_workers=v["train.n_workers"],
            episodes_per_candidate=v["train.episodes_per_candidate"],
            generations=v["train.generations"],
            eval_trials=v["train.eval_trials"],
            eval_seed_base=v["train.eval_seed_base"],
            processes=v["train.processes"],
            target_score=v["train.target_score"],
            failure_score=v["train.failure_score"],
            extractor_seed=v["extractor.seed"],
            conv=conv,
            reservoir_seed=v["reservoir.seed"],
            reservoir=reservoir,
            sigma0=v["cma.sigma0"],
            mean0=v["cma.mean0"],
            cma_seed=v["cma.seed"],
            eigen_interval=v["cma.eigen_interval"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def to_values(cfg: TrainConfig) -> dict[str, object]:
    """Inverse of :func:`build` (``output.dir`` excluded)."""
    return {
        "env.kind": cfg.env.kind,
        "env.max_steps": cfg.env.max_steps,
        "env.seed": cfg.env.seed,
        "train.n_workers": cfg.n_workers,
        "train.episodes_per_candidate": cfg.episodes_per_candidate,
        "train.generations": cfg.generations,
        "train.eval_trials": cfg.eval_trials,
        "train.eval_seed_base": cfg.eval_seed_base,
        "train.processes": cfg.processes,
        "train.target_score": cfg.target_score,
        "train.failure_score": cfg.failure_score,
        "extractor.seed": cfg.extractor_seed,
        "extractor.layers": ",".join(":".join(str(x) for x in l) for l in cfg.conv.layers),
        "extractor.dense_out": cfg.conv.dense_out,
        "extractor.weight_stddev": cfg.conv.weight_stddev,
        "reservoir.seed": cfg.reservoir_seed,
        "reservoir.state_dim": cfg.reservoir.state_dim,
        "reservoir.leak_rate": cfg.reservoir.leak_rate,
        "reservoir.sparsity": cfg.reservoir.sparsity,
        "reservoir.spectral_radius": cfg.reservoir.spectral_radius,
        "reservoir.weight_stddev": cfg.reservoir.weight_stddev,
        "cma.sigma0": cfg.sigma0,
        "cma.mean0": cfg.mean0,
        "cma.seed": cfg.cma_seed,
        "cma.eigen_interval": cfg.eigen_interval,
    }


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in to_values(cfg).items())


def loads(text: str, source: str = "<config>") -> TrainConfig:
    return build(parse(text, source), source)


def config_hash(cfg: TrainConfig) -> str:
    canonical = "".join(
        f"{k}={_fmt(v)}\n" for k, v in sorted(to_values(cfg).items()) if k not in UNHASHED
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load(path: str | os.PathLike, overrides: list[str] = ()) -> tuple[TrainConfig, Path]:
    """Read a config file; returns the config and its output directory.

    A relative ``output.dir`` (default ``runs/<file stem>``) is resolved against
    ``$RCRC_OUTPUT_ROOT`` when set, else the current directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    values = apply_overrides(parse(text, str(path)), list(overrides))
    cfg = build(values, str(path))
    out = Path(values.get("output.dir") or Path("runs") / path.stem)
    if not out.is_absolute():
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / out
    return cfg, out
