"""Training and evaluation loops of the continuous episodic control agent."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from .embedding import Embedder, EmbedderSpec
from .envs import Env
from .errors import ConfigError, ContractViolation
from .memory import DEFAULT_CAPACITY, EpisodicMemory
from .policy import PolicyParams, select_action_greedy, select_action_train
from .reports import EvalReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float


@dataclass(frozen=True)
class AgentConfig:
    policy: PolicyParams
    gamma: float = 0.99
    capacity: int = DEFAULT_CAPACITY
    distance_threshold: float = 0.1
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    train_budget_steps: int = 100_000
    eval_every_steps: int = 10_000
    eval_episodes: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.capacity < 1:
            raise ConfigError("capacity must be >= 1")
        if not self.distance_threshold >= 0:
            raise ConfigError("distance threshold d must be >= 0")
        if self.train_budget_steps < 0:
            raise ConfigError("train_budget_steps must be >= 0")
        if self.eval_every_steps < 1:
            raise ConfigError("eval_every_steps must be >= 1")
        if self.train_budget_steps > 0 and self.eval_every_steps > self.train_budget_steps:
            raise ConfigError("eval_every_steps must not exceed train_budget_steps")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")


def compute_returns(transcript: List[Transition], gamma: float) -> List[Tuple[np.ndarray, np.ndarray, float]]:
    """Discounted returns, walked from the last step backwards.

    Output is in reverse chronological order: element 0 is the final step.
    """
    if not transcript:
        raise ContractViolation("transcript must be non-empty")
    if not 0.0 <= gamma <= 1.0:
        raise ContractViolation("gamma must lie in [0, 1]")
    out = []
    v = 0.0
    for tr in reversed(transcript):
        v = tr.reward + gamma * v
        out.append((tr.state, tr.action, v))
    return out


def new_memory(env: Env, embedder: Embedder, config: AgentConfig) -> EpisodicMemory:
    return EpisodicMemory(
        embedder.output_dim, env.spec.action_dim, config.capacity, config.distance_threshold
    )


def run_training_episode(
    env: Env,
    mem: EpisodicMemory,
    embedder: Embedder,
    config: AgentConfig,
    rng: np.random.Generator,
    policy: Callable = select_action_train,
) -> Tuple[List[Transition], int]:
    obs = env.reset(rng)
    transcript = []
    while True:
        action = policy(mem, embedder(obs), config.policy, rng)
        res = env.step(action)
        transcript.append(Transition(obs, np.asarray(action, dtype=np.float64), res.reward))
        obs = res.observation
        if res.done:
            break
    return transcript, len(transcript)


def update_memory_from_episode(
    mem: EpisodicMemory, embedder: Embedder, transcript: List[Transition], gamma: float
) -> int:
    """Write the episode's returns into memory, last step first; count changed slots."""
    writes = 0
    for s, a, v in compute_returns(transcript, gamma):
        if mem.insert_or_update(embedder(s), a, v).changed:
            writes += 1
    return writes


def run_greedy_episode(env: Env, mem: EpisodicMemory, embedder: Embedder, config: AgentConfig, rng):
    obs = env.reset(rng)
    total, steps, trajectory = 0.0, 0, [obs]
    while True:
        res = env.step(select_action_greedy(mem, embedder(obs), config.policy, rng))
        total += res.reward
        steps += 1
        obs = res.observation
        trajectory.append(obs)
        if res.done:
            return total, res.success, steps, trajectory


def evaluate(
    env_factory: Callable[[], Env],
    mem: EpisodicMemory,
    embedder: Embedder,
    config: AgentConfig,
    step: int = 0,
    rng: np.random.Generator = None,
) -> EvalReport:
    """Greedy rollouts with exploration off; ``mem`` is only read."""
    if rng is None:
        rng = np.random.default_rng([config.rng_seed, 1])
    env = env_factory()
    returns, successes, lengths = [], [], []
    for _ in range(config.eval_episodes):
        ret, ok, n, _ = run_greedy_episode(env, mem, embedder, config, rng)
        returns.append(ret)
        successes.append(ok)
        lengths.append(n)
    return EvalReport.from_episodes(step, returns, successes, lengths)


def train(env_factory: Callable[[], Env], config: AgentConfig) -> Tuple[EpisodicMemory, List[EvalReport]]:
    """Alternate exploratory episodes and memory updates until the step budget is spent.

    An evaluation runs at the first episode boundary at or past each multiple
    of ``eval_every_steps``.  Every evaluation replays the same seeded start
    states so checkpoints are comparable.
    """
    env = env_factory()
    embedder = config.embedder.build(env.spec.state_dim)
    mem = new_memory(env, embedder, config)
    train_rng = np.random.default_rng([config.rng_seed, 0])
    reports: List[EvalReport] = []
    steps = 0
    next_eval = config.eval_every_steps
    while steps < config.train_budget_steps:
        transcript, used = run_training_episode(env, mem, embedder, config, train_rng)
        update_memory_from_episode(mem, embedder, transcript, config.gamma)
        steps += used
        if steps >= next_eval:
            report = evaluate(env_factory, mem, embedder, config, step=steps)
            log.debug("step %d: %s", steps, report)
            reports.append(report)
            while next_eval <= steps:
                next_eval += config.eval_every_steps
    return mem, reports
