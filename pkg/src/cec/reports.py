from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class EvalReport:
    step: int
    mean_return: float
    success_rate: float
    mean_episode_length: float

    @classmethod
    def from_episodes(
        cls, step: int, returns: Sequence[float], successes: Sequence[bool], lengths: Sequence[int]
    ) -> "EvalReport":
        n = len(returns)
        if n == 0:
            raise ValueError("cannot summarize zero episodes")
        return cls(
            step=int(step),
            mean_return=float(sum(returns) / n),
            success_rate=float(sum(bool(s) for s in successes) / n),
            mean_episode_length=float(sum(lengths) / n),
        )
