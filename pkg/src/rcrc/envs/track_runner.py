"""Top-down tile-track racer with continuous (steer, brake, accel) actions.

A closed track is built from control points on a jittered circle joined by a
centripetal Catmull-Rom spline and cut into tiles of equal arc length.  The
whole track is visible in the 64x64 frame.  Visiting a new tile scores
``1000 / n_tiles``; every step costs 0.1.  The episode ends when every tile has
been visited, the car leaves the track, or the step budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..prng import Stream
from .base import RENDER_SIZE, Env, InvalidActionError


@dataclass(frozen=True)
class TrackConstants:
    n_control: int = 12
    radius_min: float = 17.0
    radius_max: float = 27.0
    angle_jitter: float = 0.3  # fraction of the control-point spacing
    samples_per_segment: int = 24
    tiles_min: int = 60
    tiles_max: int = 100
    half_width: float = 3.0
    margin: float = 1.0
    k_steer: float = 0.35  # heading change per unit steer per pixel travelled
    k_accel: float = 0.06
    k_brake: float = 0.15
    k_drag: float = 0.06
    dt: float = 1.0
    step_penalty: float = 0.1
    total_tile_reward: float = 1000.0


PALETTE = {
    "grass": (30, 130, 40),
    "track": (105, 105, 105),
    "visited": (150, 150, 160),
    "car": (230, 0, 0),
    "nose": (255, 230, 0),
}


def _catmull_rom_closed(points: np.ndarray, samples: int, alpha: float = 0.5) -> np.ndarray:
    """Dense closed polyline through ``points`` (centripetal parameterisation)."""
    n = len(points)
    out = []
    for i in range(n):
        p0, p1, p2, p3 = (points[(i + k) % n] for k in (-1, 0, 1, 2))
        t0 = 0.0
        t1 = t0 + np.linalg.norm(p1 - p0) ** alpha
        t2 = t1 + np.linalg.norm(p2 - p1) ** alpha
        t3 = t2 + np.linalg.norm(p3 - p2) ** alpha
        for t in np.linspace(t1, t2, samples, endpoint=False):
            a1 = (t1 - t) / (t1 - t0) * p0 + (t - t0) / (t1 - t0) * p1
            a2 = (t2 - t) / (t2 - t1) * p1 + (t - t1) / (t2 - t1) * p2
            a3 = (t3 - t) / (t3 - t2) * p2 + (t - t2) / (t3 - t2) * p3
            b1 = (t2 - t) / (t2 - t0) * a1 + (t - t0) / (t2 - t0) * a2
            b2 = (t3 - t) / (t3 - t1) * a2 + (t - t1) / (t3 - t1) * a3
            out.append((t2 - t) / (t2 - t1) * b1 + (t - t1) / (t2 - t1) * b2)
    return np.array(out)


def _distance_to_polyline(pts: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Distance from each of ``pts`` (P, 2) to the closed polyline ``line`` (L, 2)."""
    a = line
    b = np.roll(line, -1, axis=0)
    ab = b - a
    denom = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(ap * ab[None], axis=2) / denom[None], 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.sqrt(np.min(np.sum((pts[:, None, :] - closest) ** 2, axis=2), axis=1))


def _pixel_distance_map(line: np.ndarray, reach: float) -> np.ndarray:
    """Distance from every pixel centre to the closed polyline, exact within ``reach``.

    Each segment only updates the pixels in its bounding box grown by
    ``reach``; pixels farther than that from every segment stay at infinity.
    """
    dist = np.full((RENDER_SIZE, RENDER_SIZE), np.inf)
    for a, b in zip(line, np.roll(line, -1, axis=0)):
        lo = np.floor(np.minimum(a, b) - reach).astype(int)
        hi = np.ceil(np.maximum(a, b) + reach).astype(int)
        c0, r0 = max(lo[0], 0), max(lo[1], 0)
        c1, r1 = min(hi[0], RENDER_SIZE), min(hi[1], RENDER_SIZE)
        if c0 >= c1 or r0 >= r1:
            continue
        ys, xs = np.mgrid[r0:r1, c0:c1]
        px, py = xs + 0.5 - a[0], ys + 0.5 - a[1]
        ab = b - a
        t = np.clip((px * ab[0] + py * ab[1]) / max(ab @ ab, 1e-300), 0.0, 1.0)
        d = np.sqrt((px - t * ab[0]) ** 2 + (py - t * ab[1]) ** 2)
        np.minimum(dist[r0:r1, c0:c1], d, out=dist[r0:r1, c0:c1])
    return dist


class TrackRunner(Env):
    kind = "track_runner"
    default_max_steps = 1000

    def __init__(self, config, constants: TrackConstants | None = None):
        super().__init__(config)
        self.c = constants or TrackConstants()
        self.min_score = -self.c.step_penalty * self.max_steps

    def _generate(self, rng: Stream) -> None:
        c = self.c
        centre = RENDER_SIZE / 2.0
        k = np.arange(c.n_control)
        spacing = 2.0 * math.pi / c.n_control
        angles = k * spacing + (rng.uniform(c.n_control) - 0.5) * 2.0 * c.angle_jitter * spacing
        radii = c.radius_min + rng.uniform(c.n_control) * (c.radius_max - c.radius_min)
        control = np.stack([centre + radii * np.cos(angles), centre + radii * np.sin(angles)], axis=1)
        line = _catmull_rom_closed(control, c.samples_per_segment)
        self.n_tiles = c.tiles_min + rng.integers(c.tiles_max - c.tiles_min + 1)

        seg = np.linalg.norm(np.roll(line, -1, axis=0) - line, axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        self.track_length = float(arc[-1])
        closed = np.vstack([line, line[:1]])
        targets = np.arange(self.n_tiles) * self.track_length / self.n_tiles
        self.tiles = np.stack(
            [np.interp(targets, arc, closed[:, 0]), np.interp(targets, arc, closed[:, 1])], axis=1
        )
        self.centerline = line
        self.visited = np.zeros(self.n_tiles, dtype=bool)

        d = self.tiles[1] - self.tiles[0]
        self.heading = math.atan2(d[1], d[0])
        self.pos = self.tiles[0].copy()
        self.speed = 0.0

        on_track = _pixel_distance_map(line, c.half_width + 1.0) <= c.half_width
        rows, cols = np.nonzero(on_track)
        centres = np.stack([cols + 0.5, rows + 0.5], axis=1)
        nearest = np.argmin(np.sum((centres[:, None, :] - self.tiles[None, :, :]) ** 2, axis=2), axis=1)
        self._pixel_tile = np.full((RENDER_SIZE, RENDER_SIZE), -1, dtype=np.int64)
        self._pixel_tile[rows, cols] = nearest

    def random_action(self, rng: Stream) -> tuple[float, float, float]:
        u = rng.uniform(3)
        return (2.0 * u[0] - 1.0, float(u[1]), float(u[2]))

    def _advance(self, action) -> tuple[float, bool, dict]:
        try:
            steer, brake, accel = (float(v) for v in action)
        except (TypeError, ValueError):
            raise InvalidActionError(f"track_runner expects (steer, brake, accel), got {action!r}") from None
        if not all(math.isfinite(v) for v in (steer, brake, accel)):
            raise InvalidActionError(f"non-finite action {action!r}")
        steer = min(max(steer, -1.0), 1.0)
        brake = min(max(brake, 0.0), 1.0)
        accel = min(max(accel, 0.0), 1.0)

        c = self.c
        self.heading += c.k_steer * steer * self.speed * c.dt
        self.speed += (c.k_accel * accel - c.k_brake * brake - c.k_drag * self.speed) * c.dt
        self.speed = max(self.speed, 0.0)
        self.pos = self.pos + self.speed * c.dt * np.array([math.cos(self.heading), math.sin(self.heading)])

        reward = -c.step_penalty
        off = float(_distance_to_polyline(self.pos[None], self.centerline)[0]) > c.half_width + c.margin
        if not off:
            tile = int(np.argmin(np.sum((self.tiles - self.pos) ** 2, axis=1)))
            if not self.visited[tile]:
                self.visited[tile] = True
                reward += c.total_tile_reward / self.n_tiles
        finished = bool(self.visited.all())
        info = {"tiles_visited": int(self.visited.sum()), "n_tiles": self.n_tiles, "off_track": off}
        return reward, off or finished, info

    def car_pixel(self) -> tuple[int, int]:
        """(row, col) of the pixel containing the car's position."""
        return int(math.floor(self.pos[1])), int(math.floor(self.pos[0]))

    def render(self) -> np.ndarray:
        img = np.empty((RENDER_SIZE, RENDER_SIZE, 3), dtype=np.uint8)
        img[:] = PALETTE["grass"]
        tile = self._pixel_tile
        on = tile >= 0
        img[on] = PALETTE["track"]
        seen = np.zeros_like(on)
        seen[on] = self.visited[tile[on]]
        img[seen] = PALETTE["visited"]

        nose = self.pos + 2.0 * np.array([math.cos(self.heading), math.sin(self.heading)])
        nr, nc = int(math.floor(nose[1])), int(math.floor(nose[0]))
        if 0 <= nr < RENDER_SIZE and 0 <= nc < RENDER_SIZE:
            img[nr, nc] = PALETTE["nose"]
        r0 = int(math.floor(self.pos[1] - 0.5))
        c0 = int(math.floor(self.pos[0] - 0.5))
        img[max(r0, 0) : max(r0 + 2, 0), max(c0, 0) : max(c0 + 2, 0)] = PALETTE["car"]
        return img


def heuristic_action(env: TrackRunner, lookahead: int = 4, cruise: float = 0.7) -> tuple[float, float, float]:
    """Pure-pursuit driver aiming a few tiles past the nearest one."""
    nearest = int(np.argmin(np.sum((env.tiles - env.pos) ** 2, axis=1)))
    target = env.tiles[(nearest + lookahead) % env.n_tiles]
    d = target - env.pos
    err = math.atan2(d[1], d[0]) - env.heading
    err = (err + math.pi) % (2.0 * math.pi) - math.pi
    steer = max(-1.0, min(1.0, 3.0 * err))
    speed_goal = cruise * (1.0 - min(abs(err), 1.0) * 0.6)
    accel = 1.0 if env.speed < speed_goal else 0.0
    brake = 0.0 if env.speed < speed_goal + 0.15 else 1.0
    return steer, brake, accel
