"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic      8 bytes  b"RCRCCKPT"
    version    u32
    n_sections u32
    n_sections x { tag: 4 ASCII bytes, length: u64, payload: length bytes }

Sections:

``META``  UTF-8 JSON: PRNG id, extractor and reservoir specs with seeds,
          weight layout notes, controller action mode, generation,
          best mean score, the flat config and its SHA-256 hash.
``WOUT``  u32 rows, u32 cols, then rows*cols float64 (row-major W_out).
``CMAS``  optional optimizer state: u32 JSON length, JSON scalars (including
          the sampling PRNG state), then float64 arrays mean, path_sigma,
          path_c, cov, weights, basis, scales.

Weight tensors of the extractor and reservoir are never stored; they are
regenerated from (spec, seed, PRNG id).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as config_mod
from .cma_es import CmaEsState
from .controller import ControllerWeights
from .fixed_conv import LAYOUT
from .prng import PRNG_ID, Stream
from .trainer import GenerationReport, TrainConfig, history_csv, timings_csv

MAGIC = b"RCRCCKPT"
FORMAT_VERSION = 1
CHECKPOINT_NAME = "checkpoint.bin"
HISTORY_NAME = "history.csv"
TIMINGS_NAME = "timings.csv"

_CMA_SCALARS = ("dim", "sigma", "popsize", "mu_eff", "c_sigma", "d_sigma", "c_c", "c_1", "c_mu",
                "chi_n", "generation", "eigen_interval", "eigen_generation")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: TrainConfig
    weights: ControllerWeights
    best_mean: float = float("-inf")
    generation: int = 0
    optimizer: tuple[CmaEsState, dict] | None = None
    prng_id: str = PRNG_ID
    format_version: int = FORMAT_VERSION

    @property
    def config_hash(self) -> str:
        return config_mod.config_hash(self.config)


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


def _f64(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _encode_optimizer(state: CmaEsState, rng_state: dict) -> bytes:
    scalars = {k: getattr(state, k) for k in _CMA_SCALARS}
    scalars["prng_state"] = rng_state
    head = json.dumps(scalars, sort_keys=True).encode("utf-8")
    arrays = [state.mean, state.path_sigma, state.path_c, state.cov, state.weights, state.basis, state.scales]
    return struct.pack("<I", len(head)) + head + b"".join(_f64(a) for a in arrays)


def _decode_optimizer(payload: bytes) -> tuple[CmaEsState, dict]:
    (n_head,) = struct.unpack_from("<I", payload)
    scalars = json.loads(payload[4 : 4 + n_head].decode("utf-8"))
    rng_state = scalars.pop("prng_state")
    dim, mu = scalars["dim"], scalars["popsize"] // 2
    sizes = [dim, dim, dim, dim * dim, mu, dim * dim, dim]
    expected = 4 + n_head + 8 * sum(sizes)
    if len(payload) != expected:
        raise CheckpointError(f"CMAS section: expected {expected} bytes, got {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f8", offset=4 + n_head).astype(np.float64)
    parts, pos = [], 0
    for n in sizes:
        parts.append(flat[pos : pos + n].copy())
        pos += n
    mean, ps, pc, cov, weights, basis, scales = parts
    state = CmaEsState(
        mean=mean, path_sigma=ps, path_c=pc, cov=cov.reshape(dim, dim), weights=weights,
        basis=basis.reshape(dim, dim), scales=scales, **scalars,
    )
    return state, rng_state


def dumps(ckpt: Checkpoint) -> bytes:
    cfg = ckpt.config
    meta = {
        "prng": ckpt.prng_id,
        "layout": LAYOUT,
        "extractor": {"seed": cfg.extractor_seed, "spec": cfg.conv.to_dict()},
        "reservoir": {"seed": cfg.reservoir_seed, "spec": cfg.reservoir.to_dict()},
        "controller": {"action_mode": ckpt.weights.action_mode.value, "flatten": "row-major"},
        "generation": ckpt.generation,
        "best_mean": ckpt.best_mean,
        "config": config_mod.to_values(cfg),
        "config_hash": ckpt.config_hash,
    }
    sections = [
        _section(b"META", json.dumps(meta, sort_keys=True).encode("utf-8")),
        _section(b"WOUT", struct.pack("<II", *ckpt.weights.w_out.shape) + _f64(ckpt.weights.w_out)),
    ]
    if ckpt.optimizer is not None:
        sections.append(_section(b"CMAS", _encode_optimizer(*ckpt.optimizer)))
    header = MAGIC + struct.pack("<II", ckpt.format_version, len(sections))
    return header + b"".join(sections)


def loads(data: bytes, expected_config: TrainConfig | None = None) -> Checkpoint:
    if len(data) < 16 or data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, n_sections = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version} (expected {FORMAT_VERSION})")
    pos = 16
    sections: dict[bytes, bytes] = {}
    damage = None
    for _ in range(n_sections):
        if pos + 12 > len(data):
            damage = damage or f"truncated file: section header at byte {pos} is incomplete"
            break
        tag = data[pos : pos + 4]
        (length,) = struct.unpack_from("<Q", data, pos + 4)
        payload = data[pos + 12 : pos + 12 + length]
        if len(payload) != length:
            damage = damage or f"section {tag.decode('ascii', 'replace')}: expected {length} bytes, got {len(payload)}"
        sections[tag] = payload
        pos += 12 + length
    if b"WOUT" in sections:
        wout = sections[b"WOUT"]
        if len(wout) < 8:
            raise CheckpointError(f"WOUT section: expected at least 8 header bytes, got {len(wout)}")
        rows, cols = struct.unpack_from("<II", wout)
        expected = 8 * rows * cols
        if len(wout) - 8 != expected:
            raise CheckpointError(f"WOUT section: expected {expected} bytes of weights, got {len(wout) - 8}")
    if damage:
        raise CheckpointError(damage)
    for required in (b"META", b"WOUT"):
        if required not in sections:
            raise CheckpointError(f"missing section {required.decode()}")

    meta = json.loads(sections[b"META"].decode("utf-8"))
    if meta["prng"] != PRNG_ID:
        raise CheckpointError(f"checkpoint uses PRNG {meta['prng']!r}; this build provides {PRNG_ID!r}")
    cfg = config_mod.build(meta["config"], "checkpoint")
    if config_mod.config_hash(cfg) != meta["config_hash"]:
        raise CheckpointError("stored config does not match its hash (corrupt checkpoint)")
    if expected_config is not None and config_mod.config_hash(expected_config) != meta["config_hash"]:
        raise CheckpointError("checkpoint was written for a different configuration (config hash mismatch)")

    wout = sections[b"WOUT"]
    rows, cols = struct.unpack_from("<II", wout)
    w_out = np.frombuffer(wout, dtype="<f8", offset=8).astype(np.float64).reshape(rows, cols)
    weights = ControllerWeights(w_out, meta["controller"]["action_mode"])
    if weights.input_dim != cfg.controller_input_dim:
        raise CheckpointError(
            f"W_out has {weights.input_dim} columns but the config implies {cfg.controller_input_dim}"
        )

    optimizer = _decode_optimizer(sections[b"CMAS"]) if b"CMAS" in sections else None
    return Checkpoint(cfg, weights, meta["best_mean"], meta["generation"], optimizer, meta["prng"], version)


def save(path: str | os.PathLike, ckpt: Checkpoint) -> None:
    """Atomic write: the previous file survives any failure."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(ckpt))
    os.replace(tmp, path)


def load(path: str | os.PathLike, expected_config: TrainConfig | None = None) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc.strerror})") from None
    return loads(data, expected_config)


def save_run(out: Path, cfg: TrainConfig, weights: ControllerWeights, best_mean: float,
             state: CmaEsState, rng: Stream, history: list[GenerationReport]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Checkpoint(cfg, weights, best_mean, state.generation, (state, rng.state))
    save(out / CHECKPOINT_NAME, ckpt)
    _write_text(out / HISTORY_NAME, history_csv(history))
    _write_text(out / TIMINGS_NAME, timings_csv(history))


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_history(path: Path, best_params: np.ndarray | None = None) -> list[GenerationReport]:
    """Rows of a history CSV (candidate parameters are not stored there)."""
    import csv

    if not Path(path).exists():
        return []
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        GenerationReport(int(r["generation"]), [float(s) for s in r["scores"].split()],
                         float(r["best_mean"]), best_params)
        for r in rows
    ]
