"""Experiment configuration, multi-seed runs and CSV artifacts."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .agent import AgentConfig, train
from .embedding import IDENTITY, RANDOM_PROJECTION, EmbedderSpec
from .envs import ENVIRONMENTS, KinematicMaze, env_factory, make_env
from .errors import ConfigError, ContractViolation
from .memory import EpisodicMemory, snapshot_load, snapshot_save
from .policy import PolicyParams
from .reports import EvalReport

log = logging.getLogger(__name__)

CURVE_COLUMNS = ["seed", "step", "mean_return", "success_rate", "episode_length"]
AGGREGATE_COLUMNS = [
    "step",
    "mean_return_mean",
    "mean_return_se",
    "success_rate_mean",
    "success_rate_se",
    "n_seeds",
]
VALUE_MAP_COLUMNS = ["cell_x", "cell_y", "angle_bin", "value", "action_1", "action_2"]
GRID_CELLS = 12
ANGLE_BINS = 20

# per-environment defaults
ENV_DEFAULTS: Dict[str, Dict[str, object]] = {
    "growing_tree": dict(k=5, tau=1.0, sigma=0.05, n=3.0, d=0.05, train_budget_steps=100_000),
    "sparse_mountain_car": dict(k=5, tau=1.0, sigma=0.3, n=3.0, d=0.01, train_budget_steps=200_000),
    "umaze": dict(k=5, tau=0.1, sigma=0.3, n=1.0, d=0.1, train_budget_steps=150_000),
    "four_rooms": dict(k=5, tau=1.0, sigma=0.3, n=3.0, d=0.1, train_budget_steps=150_000),
}
COMMON_DEFAULTS: Dict[str, object] = dict(
    gamma=0.99,
    epsilon=1.0,
    capacity=100_000,
    eval_every_steps=10_000,
    eval_episodes=10,
    seeds=(0, 1, 2, 3, 4),
    out="runs",
    embedding=IDENTITY,
    embed_dim=None,
    embed_seed=0,
    embed_unit_variance=False,
)

_INT_KEYS = {"k", "capacity", "train_budget_steps", "eval_every_steps", "eval_episodes", "embed_seed"}
_FLOAT_KEYS = {"tau", "sigma", "n", "d", "gamma", "epsilon"}
KNOWN_KEYS = (
    {"env", "seeds", "out", "embedding", "embed_dim", "embed_unit_variance"} | _INT_KEYS | _FLOAT_KEYS
)


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    agent: AgentConfig
    seeds: Tuple[int, ...]
    out_dir: str
    settings: Tuple[Tuple[str, str], ...] = ()

    def for_seed(self, seed: int) -> AgentConfig:
        return replace(self.agent, rng_seed=seed)


@dataclass(frozen=True)
class CurvePoint:
    seed: int
    step: int
    mean_return: float
    success_rate: float
    episode_length: float


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def read_config_file(path) -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            out[key.strip()] = value.strip()
    return out


def _parse_value(key: str, raw) -> object:
    if not isinstance(raw, str):
        return raw
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if key == "seeds":
            seeds = tuple(int(s) for s in raw.replace(" ", "").split(",") if s)
            if not seeds:
                raise ValueError
            return seeds
        if key == "embed_dim":
            return None if raw.lower() in ("", "none") else int(raw)
        if key == "embed_unit_variance":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return raw.lower() in ("true", "1", "yes")
    except ValueError:
        raise ConfigError(f"malformed value for {key}: {raw!r}") from None
    return raw


def parse_config(path=None, overrides: Optional[Mapping[str, object]] = None) -> ExperimentConfig:
    """Build a validated experiment config from a file and/or overrides (overrides win)."""
    raw: Dict[str, object] = {}
    if path is not None:
        raw.update(read_config_file(path))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    env = raw.get("env")
    if env is None:
        raise ConfigError("config must name an env")
    if env not in ENVIRONMENTS:
        raise ConfigError(f"unknown env {env!r}; choose from {', '.join(ENVIRONMENTS)}")
    vals: Dict[str, object] = dict(COMMON_DEFAULTS)
    vals.update(ENV_DEFAULTS[env])
    for key, value in raw.items():
        if key != "env":
            vals[key] = _parse_value(key, value)

    if vals["k"] < 1:
        raise ConfigError(f"k must be >= 1 (got {vals['k']})")
    if vals["tau"] <= 0:
        raise ConfigError(f"tau must be > 0 (got {vals['tau']})")
    if vals["d"] < 0:
        raise ConfigError(f"distance threshold d must be >= 0 (got {vals['d']})")
    if vals["embedding"] not in (IDENTITY, RANDOM_PROJECTION):
        raise ConfigError(f"unknown embedding {vals['embedding']!r}")

    spec = make_env(env).spec
    try:
        policy = PolicyParams(
            k=vals["k"],
            tau=vals["tau"],
            sigma=vals["sigma"],
            n=vals["n"],
            epsilon=vals["epsilon"],
            action_low=spec.action_low,
            action_high=spec.action_high,
        )
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    embedder = EmbedderSpec(
        kind=vals["embedding"],
        input_dim=spec.state_dim,
        output_dim=vals["embed_dim"],
        rng_seed=vals["embed_seed"],
        unit_variance=vals["embed_unit_variance"],
    )
    embedder.build(spec.state_dim)
    seeds = tuple(vals["seeds"])
    agent = AgentConfig(
        policy=policy,
        gamma=vals["gamma"],
        capacity=vals["capacity"],
        distance_threshold=vals["d"],
        embedder=embedder,
        train_budget_steps=vals["train_budget_steps"],
        eval_every_steps=vals["eval_every_steps"],
        eval_episodes=vals["eval_episodes"],
        rng_seed=seeds[0],
    )
    settings = tuple(
        (key, ",".join(map(str, v)) if key == "seeds" else _fmt(v))
        for key, v in sorted(vals.items())
        if key != "out"
    )
    return ExperimentConfig(env, agent, seeds, str(vals["out"]), (("env", env),) + settings)


def curve_points(seed: int, reports: Iterable[EvalReport]) -> List[CurvePoint]:
    return [
        CurvePoint(seed, r.step, r.mean_return, r.success_rate, r.mean_episode_length)
        for r in reports
    ]


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_curve_csv(path, points: Sequence[CurvePoint]) -> None:
    _write_csv(
        path,
        CURVE_COLUMNS,
        ((p.seed, p.step, p.mean_return, p.success_rate, p.episode_length) for p in points),
    )


def read_curve_csv(path) -> List[CurvePoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        CurvePoint(
            int(r["seed"]), int(r["step"]), float(r["mean_return"]),
            float(r["success_rate"]), float(r["episode_length"]),
        )
        for r in rows
    ]


def aggregate(curves: Sequence[Sequence[CurvePoint]], eval_every: int) -> List[tuple]:
    """Mean and standard error per checkpoint across seeds.

    A report logged at step ``s`` belongs to checkpoint ``floor(s / eval_every) * eval_every``;
    seeds end episodes at different steps, so raw steps rarely coincide.
    """
    groups: Dict[int, List[CurvePoint]] = {}
    for curve in curves:
        for p in curve:
            groups.setdefault(p.step // eval_every * eval_every, []).append(p)
    rows = []
    for step in sorted(groups):
        pts = groups[step]
        ret = np.array([p.mean_return for p in pts])
        suc = np.array([p.success_rate for p in pts])
        rows.append((step, float(ret.mean()), _se(ret), float(suc.mean()), _se(suc), len(pts)))
    return rows


def _se(x: np.ndarray) -> float:
    if len(x) < 2:
        return float("nan")
    return float(x.std(ddof=1) / math.sqrt(len(x)))


def _run_seed(cfg: ExperimentConfig, seed: int):
    mem, reports = train(env_factory(cfg.env), cfg.for_seed(seed))
    return seed, mem, reports


def run_experiment(cfg: ExperimentConfig, plot: bool = False) -> Dict[int, List[EvalReport]]:
    """Train every seed and write per-seed curves, snapshots and the aggregate CSV.

    Output layout in ``cfg.out_dir``: ``config.txt``, ``curve_seed<N>.csv``,
    ``memory_seed<N>.txt``, ``aggregate.csv`` and, with ``plot``, ``learning_curve.png``.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(
        "".join(f"{k}={v}\n" for k, v in cfg.settings), encoding="utf-8"
    )
    results: Dict[int, List[EvalReport]] = {}
    curves = []
    for seed in cfg.seeds:
        log.info("training %s seed %d", cfg.env, seed)
        _, mem, reports = _run_seed(cfg, seed)
        points = curve_points(seed, reports)
        write_curve_csv(out / f"curve_seed{seed}.csv", points)
        snapshot_save(mem, out / f"memory_seed{seed}.txt")
        results[seed] = reports
        curves.append(points)
    rows = aggregate(curves, cfg.agent.eval_every_steps)
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, rows)
    if plot:
        from .plotting import plot_learning_curves

        plot_learning_curves(curves, rows, out / "learning_curve.png", title=cfg.env)
    return results


def value_map_rows(mem: EpisodicMemory, env_name: str) -> List[tuple]:
    """Best stored entry per (x cell, y cell, heading bin) of a maze snapshot."""
    env = make_env(env_name)
    if not isinstance(env, KinematicMaze):
        raise ConfigError(f"value maps need a maze env, got {env_name!r}")
    if mem.state_dim != env.spec.state_dim or mem.action_dim != env.spec.action_dim:
        raise ConfigError(
            f"snapshot dims ({mem.state_dim}, {mem.action_dim}) do not match {env_name} "
            f"({env.spec.state_dim}, {env.spec.action_dim})"
        )
    cell = env.SIZE / GRID_CELLS
    best: Dict[Tuple[int, int, int], int] = {}
    s, v = mem.states, mem.values
    for i in range(len(mem)):
        x, y, c, sn = s[i]
        cx = min(GRID_CELLS - 1, max(0, int(math.floor(x / cell))))
        cy = min(GRID_CELLS - 1, max(0, int(math.floor(y / cell))))
        angle = math.atan2(sn, c) % math.tau
        b = int(math.floor(angle / (math.tau / ANGLE_BINS))) % ANGLE_BINS
        key = (cx, cy, b)
        if key not in best or v[i] > v[best[key]]:
            best[key] = i
    a = mem.actions
    return [
        (cx, cy, b, float(v[i]), float(a[i, 0]), float(a[i, 1]))
        for (cx, cy, b), i in sorted(best.items())
    ]


def export_value_map(snapshot_path, env_name: str, out_path, plot: bool = False) -> List[tuple]:
    mem = snapshot_load(snapshot_path)
    rows = value_map_rows(mem, env_name)
    _write_csv(out_path, VALUE_MAP_COLUMNS, rows)
    if plot:
        from .plotting import plot_value_map

        plot_value_map(rows, os.path.splitext(os.fspath(out_path))[0] + ".png", title=env_name)
    return rows
