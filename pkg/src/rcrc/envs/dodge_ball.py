"""Front-view projectile dodger with two discrete actions.

The agent is a block on the floor that must move left or right every step.
Projectiles appear at the top of the screen and fall straight down at an
integer speed; touching one costs a hit point.  Every step survived without a
hit scores +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..controller import Move
from ..prng import Stream
from .base import RENDER_SIZE, Env, InvalidActionError


@dataclass(frozen=True)
class DodgeConstants:
    agent_width: int = 8
    agent_height: int = 4
    agent_row: int = 56  # top row of the agent block
    agent_stride: int = 2
    ball_size: int = 4
    speed_min: int = 1
    speed_max: int = 2
    spawn_prob: float = 0.1
    aim_prob: float = 0.5  # chance a spawn is centred on the agent's column
    aim_jitter: int = 4
    hit_points: int = 1


PALETTE = {
    "sky": (16, 16, 40),
    "floor": (90, 70, 50),
    "agent": (40, 220, 80),
    "ball": (255, 120, 20),
}


@dataclass
class Ball:
    x: int
    y: int
    speed: int


class DodgeBall(Env):
    kind = "dodge_ball"
    default_max_steps = 2100
    min_score = 0.0

    def __init__(self, config, constants: DodgeConstants | None = None):
        super().__init__(config)
        self.c = constants or DodgeConstants()

    def _generate(self, rng: Stream) -> None:
        self.rng = rng
        self.agent_x = (RENDER_SIZE - self.c.agent_width) // 2
        self.balls: list[Ball] = []
        self.hit_points = self.c.hit_points

    def random_action(self, rng: Stream) -> Move:
        return Move(rng.integers(2))

    def _spawn(self) -> None:
        c = self.c
        # fixed draw count per step keeps the world stream independent of outcomes
        u_spawn, u_aim, u_x, u_speed = self.rng.uniform(4)
        if u_spawn >= c.spawn_prob:
            return
        hi = RENDER_SIZE - c.ball_size
        if u_aim < c.aim_prob:
            centre = self.agent_x + (c.agent_width - c.ball_size) // 2
            x = centre - c.aim_jitter + int(u_x * (2 * c.aim_jitter + 1))
        else:
            x = int(u_x * (hi + 1))
        x = min(max(x, 0), hi)
        speed = c.speed_min + int(u_speed * (c.speed_max - c.speed_min + 1))
        self.balls.append(Ball(x, 0, speed))

    def _hits_agent(self, b: Ball) -> bool:
        c = self.c
        return (
            b.x < self.agent_x + c.agent_width
            and self.agent_x < b.x + c.ball_size
            and b.y < c.agent_row + c.agent_height
            and c.agent_row < b.y + c.ball_size
        )

    def _advance(self, action) -> tuple[float, bool, dict]:
        try:
            move = Move(int(action))
        except (ValueError, TypeError):
            raise InvalidActionError(f"dodge_ball expects LEFT (0) or RIGHT (1), got {action!r}") from None
        c = self.c
        dx = -c.agent_stride if move is Move.LEFT else c.agent_stride
        self.agent_x = min(max(self.agent_x + dx, 0), RENDER_SIZE - c.agent_width)
        for b in self.balls:
            b.y += b.speed
        self.balls = [b for b in self.balls if b.y < RENDER_SIZE]
        self._spawn()
        hit = [b for b in self.balls if self._hits_agent(b)]
        if hit:
            self.hit_points -= 1
            self.balls = [b for b in self.balls if not self._hits_agent(b)]
        reward = 0.0 if hit else 1.0
        info = {"steps_survived": self.steps + (0 if hit else 1), "hit_points": self.hit_points}
        return reward, self.hit_points <= 0, info

    def render(self) -> np.ndarray:
        c = self.c
        img = np.empty((RENDER_SIZE, RENDER_SIZE, 3), dtype=np.uint8)
        img[:] = PALETTE["sky"]
        img[c.agent_row + c.agent_height :] = PALETTE["floor"]
        for b in self.balls:
            img[b.y : b.y + c.ball_size, b.x : b.x + c.ball_size] = PALETTE["ball"]
        img[c.agent_row : c.agent_row + c.agent_height, self.agent_x : self.agent_x + c.agent_width] = PALETTE["agent"]
        return img


def heuristic_action(env: DodgeBall, depth: int = 8) -> Move:
    """Lookahead search over the visible balls (future spawns ignored).

    Picks the first move of any action sequence that stays clear for
    ``depth`` steps, preferring the move toward the centre of the field.
    """
    c = env.c
    balls = [(b.x, b.y, b.speed) for b in env.balls]
    limit = RENDER_SIZE - c.agent_width

    def clear(x: int, t: int) -> bool:
        for bx, by, sp in balls:
            y = by + sp * t
            if (bx < x + c.agent_width and x < bx + c.ball_size
                    and y < c.agent_row + c.agent_height and c.agent_row < y + c.ball_size):
                return False
        return True

    def survives(x: int, t: int) -> bool:
        if not clear(x, t):
            return False
        if t == depth:
            return True
        return any(survives(min(max(x + dx, 0), limit), t + 1) for dx in (-c.agent_stride, c.agent_stride))

    toward_centre = Move.LEFT if env.agent_x + c.agent_width / 2 > RENDER_SIZE / 2 else Move.RIGHT
    for move in (toward_centre, Move(1 - toward_centre)):
        dx = -c.agent_stride if move is Move.LEFT else c.agent_stride
        if survives(min(max(env.agent_x + dx, 0), limit), 1):
            return move
    return toward_centre
