"""Seedable sparse-reward continuous-control environments.

All environments share one small interface: ``reset(rng)`` returns the first
observation and ``step(action)`` returns a :class:`StepResult`.  Randomness is
confined to ``reset`` (initial conditions), so a fixed seed and action
sequence always reproduce the same trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ContractViolation
from .reports import EvalReport


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: Tuple[float, ...]
    action_high: Tuple[float, ...]
    max_steps: int
    obs_low: Tuple[float, ...]
    obs_high: Tuple[float, ...]


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    success: bool


class Env:
    spec: EnvSpec

    def __init__(self):
        self.t = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> StepResult:
        raise NotImplementedError

    def _action(self, action) -> np.ndarray:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape != (self.spec.action_dim,):
            raise ContractViolation(
                f"{self.spec.name}: action shape {a.shape}, expected ({self.spec.action_dim},)"
            )
        if not np.all(np.isfinite(a)):
            raise ContractViolation(f"{self.spec.name}: non-finite action")
        return a


class GrowingTree(Env):
    """1-D toy task: add the action to a height until it reaches 1.0."""

    GOAL = 1.0
    TOLERANCE = 0.1
    # absorbs rounding in repeated 0.1 increments (0.1 * 9 != 0.9 in binary)
    _TOL_EPS = 1e-9

    spec = EnvSpec(
        name="growing_tree",
        state_dim=1,
        action_dim=1,
        action_low=(-0.1,),
        action_high=(0.1,),
        max_steps=200,
        obs_low=(-2.0,),
        obs_high=(2.0,),
    )

    def __init__(self):
        super().__init__()
        self.h = 0.0

    def reset(self, rng=None) -> np.ndarray:
        self.t = 0
        self.h = 0.0
        return np.array([self.h])

    def step(self, action) -> StepResult:
        a = float(self._action(action)[0])
        a = min(max(a, -0.1), 0.1)
        self.h = min(max(self.h + a, -2.0), 2.0)
        self.t += 1
        success = abs(self.h - self.GOAL) <= self.TOLERANCE + self._TOL_EPS
        done = success or self.t >= self.spec.max_steps
        return StepResult(np.array([self.h]), 1.0 if success else 0.0, done, success)


class SparseMountainCar(Env):
    """Continuous mountain car with only a terminal +100 reward at the flag."""

    POWER = 0.0015
    MAX_SPEED = 0.07
    MIN_POS = -1.2
    MAX_POS = 0.6
    GOAL_POS = 0.45

    spec = EnvSpec(
        name="sparse_mountain_car",
        state_dim=2,
        action_dim=1,
        action_low=(-1.0,),
        action_high=(1.0,),
        max_steps=999,
        obs_low=(-1.2, -0.07),
        obs_high=(0.6, 0.07),
    )

    def __init__(self):
        super().__init__()
        self.pos = -0.5
        self.vel = 0.0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.t = 0
        self.pos = float(rng.uniform(-0.6, -0.4))
        self.vel = 0.0
        return np.array([self.pos, self.vel])

    def set_state(self, pos: float, vel: float) -> None:
        self.pos, self.vel = float(pos), float(vel)

    def step(self, action) -> StepResult:
        force = min(max(float(self._action(action)[0]), -1.0), 1.0)
        vel = self.vel + force * self.POWER - 0.0025 * math.cos(3 * self.pos)
        vel = min(max(vel, -self.MAX_SPEED), self.MAX_SPEED)
        pos = min(max(self.pos + vel, self.MIN_POS), self.MAX_POS)
        if pos == self.MIN_POS and vel < 0:
            vel = 0.0
        self.pos, self.vel = pos, vel
        self.t += 1
        success = pos >= self.GOAL_POS
        done = success or self.t >= self.spec.max_steps
        return StepResult(np.array([pos, vel]), 100.0 if success else 0.0, done, success)


Segment = Tuple[float, float, float, float]


def _box(x0, y0, x1, y1) -> List[Segment]:
    return [(x0, y0, x1, y0), (x1, y0, x1, y1), (x0, y1, x1, y1), (x0, y0, x0, y1)]


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, cx, cy) -> bool:
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


def segments_intersect(p: Segment, q: Segment) -> bool:
    """Closed-segment intersection test (touching counts)."""
    ax, ay, bx, by = p
    cx, cy, dx, dy = q
    d1 = _orient(cx, cy, dx, dy, ax, ay)
    d2 = _orient(cx, cy, dx, dy, bx, by)
    d3 = _orient(ax, ay, bx, by, cx, cy)
    d4 = _orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if d2 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    if d3 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if d4 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    return False


class KinematicMaze(Env):
    """Point robot with heading in a 12x12 arena of axis-aligned walls.

    Observation is ``(x, y, cos(theta), sin(theta))``; action ``(omega, f)``
    turns by ``0.3 * omega`` then moves ``0.5 * f`` along the new heading.  A
    move whose path touches a wall leaves the position unchanged.
    """

    SIZE = 12.0
    TURN = 0.3
    STRIDE = 0.5
    GOAL_RADIUS = 0.6
    JITTER = 0.1

    walls: Sequence[Segment] = ()
    start: Tuple[float, float] = (2.0, 2.0)
    goal: Tuple[float, float] = (2.0, 10.0)
    start_heading = 0.0

    def __init__(self):
        super().__init__()
        self.x, self.y = self.start
        self.theta = self.start_heading
        self.goal_xy = self.goal
        self._walls = list(self.walls) + _box(0.0, 0.0, self.SIZE, self.SIZE)

    def _obs(self) -> np.ndarray:
        return np.array([self.x, self.y, math.cos(self.theta), math.sin(self.theta)])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.t = 0
        j = rng.uniform(-self.JITTER, self.JITTER, size=4)
        self.x = self.start[0] + float(j[0])
        self.y = self.start[1] + float(j[1])
        self.goal_xy = (self.goal[0] + float(j[2]), self.goal[1] + float(j[3]))
        self.theta = self.start_heading
        return self._obs()

    def set_pose(self, x: float, y: float, theta: float) -> None:
        self.x, self.y, self.theta = float(x), float(y), float(theta)

    def blocked(self, x0, y0, x1, y1) -> bool:
        move = (x0, y0, x1, y1)
        return any(segments_intersect(move, w) for w in self._walls)

    def step(self, action) -> StepResult:
        a = self._action(action)
        omega = min(max(float(a[0]), -1.0), 1.0)
        f = min(max(float(a[1]), -1.0), 1.0)
        self.theta = math.remainder(self.theta + self.TURN * omega, math.tau)
        nx = self.x + self.STRIDE * f * math.cos(self.theta)
        ny = self.y + self.STRIDE * f * math.sin(self.theta)
        if not self.blocked(self.x, self.y, nx, ny):
            self.x, self.y = nx, ny
        self.t += 1
        gx, gy = self.goal_xy
        success = math.hypot(self.x - gx, self.y - gy) <= self.GOAL_RADIUS
        done = success or self.t >= self.spec.max_steps
        return StepResult(self._obs(), 1.0 if success else 0.0, done, success)


_MAZE_OBS = dict(obs_low=(0.0, 0.0, -1.0, -1.0), obs_high=(12.0, 12.0, 1.0, 1.0))


class KinematicUMaze(KinematicMaze):
    """U-shaped corridor: a solid block fills the left middle of the arena."""

    spec = EnvSpec(
        name="umaze",
        state_dim=4,
        action_dim=2,
        action_low=(-1.0, -1.0),
        action_high=(1.0, 1.0),
        max_steps=300,
        **_MAZE_OBS,
    )
    walls = _box(0.0, 4.0, 8.0, 8.0)
    start = (2.0, 2.0)
    goal = (2.0, 10.0)


class KinematicFourRooms(KinematicMaze):
    """Four 6x6 rooms joined by doorways; goal in the room opposite the start."""

    spec = EnvSpec(
        name="four_rooms",
        state_dim=4,
        action_dim=2,
        action_low=(-1.0, -1.0),
        action_high=(1.0, 1.0),
        max_steps=300,
        **_MAZE_OBS,
    )
    walls = [
        (6.0, 0.0, 6.0, 2.0), (6.0, 3.5, 6.0, 8.5), (6.0, 10.0, 6.0, 12.0),
        (0.0, 6.0, 2.0, 6.0), (3.5, 6.0, 8.5, 6.0), (10.0, 6.0, 12.0, 6.0),
    ]
    start = (2.0, 2.0)
    goal = (10.0, 10.0)


ENVIRONMENTS: Dict[str, Callable[[], Env]] = {
    "growing_tree": GrowingTree,
    "sparse_mountain_car": SparseMountainCar,
    "umaze": KinematicUMaze,
    "four_rooms": KinematicFourRooms,
}


def make_env(name: str) -> Env:
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown environment {name!r}; choose from {', '.join(ENVIRONMENTS)}"
        ) from None


def env_factory(name: str) -> Callable[[], Env]:
    if name not in ENVIRONMENTS:
        make_env(name)
    return ENVIRONMENTS[name]


def random_baseline(factory: Callable[[], Env], episodes: int, rng: np.random.Generator) -> EvalReport:
    """Roll out uniformly random actions; report like a greedy evaluation."""
    env = factory()
    lo, hi = np.asarray(env.spec.action_low), np.asarray(env.spec.action_high)
    returns, successes, lengths = [], [], []
    for _ in range(episodes):
        env.reset(rng)
        total, steps, res = 0.0, 0, None
        while True:
            res = env.step(rng.uniform(lo, hi))
            total += res.reward
            steps += 1
            if res.done:
                break
        returns.append(total)
        successes.append(res.success)
        lengths.append(steps)
    return EvalReport.from_episodes(0, returns, successes, lengths)
