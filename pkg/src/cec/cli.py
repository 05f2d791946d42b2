"""``cec`` command line: train, eval, value-map, inspect.

Exit status is 0 on success, 1 on a validation error and 2 on an I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace

from .agent import AgentConfig, evaluate
from .envs import ENVIRONMENTS, env_factory, make_env
from .errors import ConfigError, ContractViolation, SnapshotFormatError
from .harness import export_value_map, parse_config, run_experiment
from .memory import snapshot_load
from .policy import PolicyParams

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def cmd_train(args) -> int:
    overrides = _overrides(args.set)
    overrides.update(env=args.env, seeds=args.seeds, out=args.out)
    if args.config is None and args.env is None:
        raise ConfigError("train needs --config or --env")
    cfg = parse_config(args.config, overrides)
    run_experiment(cfg, plot=args.plot)
    print(f"wrote {len(cfg.seeds)} seed(s) to {cfg.out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    mem = snapshot_load(args.snapshot)
    if args.config is not None:
        agent = parse_config(args.config, {"env": args.env}).agent
    else:
        spec = make_env(args.env).spec
        agent = AgentConfig(
            policy=PolicyParams(1, 1.0, 0.0, 1.0, 0.0, spec.action_low, spec.action_high),
            distance_threshold=mem.distance_threshold,
            train_budget_steps=0,
        )
    agent = replace(agent, eval_episodes=args.episodes, rng_seed=args.seed)
    env = make_env(args.env)
    embedder = agent.embedder.build(env.spec.state_dim)
    if (mem.state_dim, mem.action_dim) != (embedder.output_dim, env.spec.action_dim):
        raise ConfigError(
            f"snapshot dims ({mem.state_dim}, {mem.action_dim}) do not match env {args.env}"
        )
    r = evaluate(env_factory(args.env), mem, embedder, agent)
    print(f"{r.mean_return!r},{r.success_rate!r},{r.mean_episode_length!r}")
    return EXIT_OK


def cmd_value_map(args) -> int:
    rows = export_value_map(args.snapshot, args.env, args.out, plot=args.plot)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    mem = snapshot_load(args.snapshot)
    v = mem.values
    stats = (
        (float(v.min()), float(v.mean()), float(v.max())) if len(mem) else (math.nan,) * 3
    )
    lines = [
        f"count={len(mem)}",
        f"capacity={mem.capacity}",
        f"state_dim={mem.state_dim}",
        f"action_dim={mem.action_dim}",
        f"d={mem.distance_threshold!r}",
        f"global_tick={mem.global_tick}",
        f"value_min={stats[0]!r}",
        f"value_mean={stats[1]!r}",
        f"value_max={stats[2]!r}",
    ]
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cec", description="Continuous episodic control experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    envs = ", ".join(ENVIRONMENTS)

    t = sub.add_parser("train", help="train over several seeds and write CSVs + snapshots")
    t.add_argument("--config", help="key=value config file")
    t.add_argument("--env", help=f"environment ({envs})")
    t.add_argument("--seeds", help="comma-separated seeds, e.g. 1,2,3")
    t.add_argument("--out", help="output directory")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    t.add_argument("--plot", action="store_true", help="also render learning_curve.png")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy evaluation of a memory snapshot")
    e.add_argument("--snapshot", required=True)
    e.add_argument("--env", required=True, help=envs)
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0, help="seed for episode start states")
    e.add_argument("--config", help="config file supplying the embedding")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("value-map", help="export a 12x12x20 value map of a maze snapshot")
    v.add_argument("--snapshot", required=True)
    v.add_argument("--env", required=True)
    v.add_argument("--out", required=True)
    v.add_argument("--plot", action="store_true", help="also render a quiver PNG beside the CSV")
    v.set_defaults(func=cmd_value_map)

    i = sub.add_parser("inspect", help="print snapshot statistics")
    i.add_argument("--snapshot", required=True)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if getattr(args, "episodes", 1) < 1:
            raise ConfigError("--episodes must be >= 1")
        return args.func(args)
    except (ConfigError, ContractViolation, SnapshotFormatError) as exc:
        print(f"cec: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cec: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
