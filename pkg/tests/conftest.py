import math

import numpy as np
import pytest


def brute_knn(states, query, k, radius=math.inf):
    """Exhaustive oracle: sort every entry by (distance, index), filter by radius."""
    scored = []
    for i, s in enumerate(states):
        dist = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(s, query)))
        if dist <= radius:
            scored.append((dist, i))
    scored.sort()
    return scored[:k]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICT_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record ``(criterion, passed, detail)``; lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICT_KEY, [])

    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} ({detail})"
        print(line)
        lines.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
