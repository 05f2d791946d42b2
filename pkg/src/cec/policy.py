"""Action selection from a neighbour set: softmax sampling or closest neighbour."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .memory import EpisodicMemory


@dataclass(frozen=True)
class PolicyParams:
    """Hyperparameters of the training/evaluation policies.

    Attributes:
        k: number of nearest neighbours considered.
        tau: softmax temperature over neighbour values.
        sigma: standard deviation of the Gaussian action noise.
        n: filter factor; neighbours farther than ``n * d`` are dropped.
        epsilon: probability of perturbing the sampled action.
        action_low, action_high: per-dimension action bounds.
    """

    k: int
    tau: float
    sigma: float
    n: float
    epsilon: float
    action_low: tuple
    action_high: tuple

    def __post_init__(self):
        if self.k < 1:
            raise ContractViolation("k must be >= 1")
        if not self.tau > 0:
            raise ContractViolation("tau must be > 0")
        if not self.sigma >= 0:
            raise ContractViolation("sigma must be >= 0")
        if not self.n > 0:
            raise ContractViolation("n must be > 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ContractViolation("epsilon must lie in [0, 1]")
        lo = tuple(float(x) for x in np.atleast_1d(self.action_low))
        hi = tuple(float(x) for x in np.atleast_1d(self.action_high))
        if len(lo) != len(hi) or not all(a < b for a, b in zip(lo, hi)):
            raise ContractViolation("action bounds must satisfy low < high elementwise")
        object.__setattr__(self, "action_low", lo)
        object.__setattr__(self, "action_high", hi)

    @property
    def low(self) -> np.ndarray:
        return np.asarray(self.action_low)

    @property
    def high(self) -> np.ndarray:
        return np.asarray(self.action_high)


def softmax_probs(values, tau: float) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ContractViolation("softmax needs a non-empty 1-D list of values")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("softmax values must be finite")
    if not tau > 0:
        raise ContractViolation("tau must be > 0")
    z = np.exp((v - v.max()) / tau)
    return z / z.sum()


def uniform_action(params: PolicyParams, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(params.low, params.high)


def select_action_train(
    mem: EpisodicMemory, emb_state, params: PolicyParams, rng: np.random.Generator
) -> np.ndarray:
    """Sample an exploratory action for ``emb_state``.

    One neighbour within ``n * d`` is drawn with softmax probabilities over the
    stored values and its action is taken; an empty neighbour set falls back
    to a uniform action.  With probability ``epsilon`` Gaussian noise of std
    ``sigma`` is added, then the action is clipped to the bounds.
    """
    idx, _ = mem.knn_indices(params.k, emb_state, params.n)
    if len(idx) == 0:
        action = uniform_action(params, rng)
    else:
        values = mem.values[idx]
        if len(idx) == 1:
            pick = 0
        else:
            pick = rng.choice(len(idx), p=softmax_probs(values, params.tau))
        action = mem.actions[idx[pick]].copy()
    if rng.random() < params.epsilon:
        action = action + rng.normal(0.0, params.sigma, size=action.shape)
    return np.clip(action, params.low, params.high)


def select_action_greedy(
    mem: EpisodicMemory, emb_state, params: PolicyParams, rng: np.random.Generator = None
) -> np.ndarray:
    """Action of the closest stored state, without distance filter or noise."""
    i = mem.nearest_index(emb_state)
    if i is None:
        if rng is None:
            raise ContractViolation("greedy selection on an empty memory needs an rng")
        return uniform_action(params, rng)
    return np.clip(mem.actions[i], params.low, params.high)
