import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cec import memory as memory_mod
from cec.errors import ContractViolation, SnapshotFormatError
from cec.memory import EpisodicMemory, Outcome, snapshot_load, snapshot_save

from conftest import brute_knn


def filled(rng, n, sdim, adim=1, capacity=None, d=0.0):
    mem = EpisodicMemory(sdim, adim, capacity or n, d)
    for _ in range(n):
        mem.insert_or_update(rng.normal(size=sdim), rng.normal(size=adim), rng.normal())
    return mem


def test_nearest_empty_is_none():
    assert EpisodicMemory(1, 1).nearest([0.3]) is None


def test_nearest_1d():
    mem = EpisodicMemory(1, 1, distance_threshold=0.01)
    mem.insert_or_update([0.0], [0.0], 0.0)
    mem.insert_or_update([1.0], [0.0], 0.0)
    nb = mem.nearest([0.2])
    assert nb.index == 0
    assert nb.distance == pytest.approx(0.2)


def test_nearest_tie_prefers_lower_index():
    mem = EpisodicMemory(1, 1, distance_threshold=0.0)
    mem.insert_or_update([1.0], [0.0], 0.0)
    mem.insert_or_update([-1.0], [0.0], 0.0)
    assert mem.nearest([0.0]).index == 0
    assert [n.index for n in mem.knn(2, [0.0], 1.0, 5.0)] == [0, 1]


def test_nearest_matches_linear_scan(rng):
    mem = filled(rng, 500, 4)
    for _ in range(100):
        q = rng.normal(size=4)
        (dist, idx), = brute_knn(mem.states, q, 1)
        nb = mem.nearest(q)
        assert nb.index == idx
        assert nb.distance == pytest.approx(dist, rel=1e-9)


def test_knn_threshold_filter():
    mem = EpisodicMemory(1, 1, distance_threshold=0.01)
    for s in (0.0, 0.05, 5.0):
        mem.insert_or_update([s], [s], 0.0)
    got = mem.knn(5, [0.0], n=1, d=0.1)
    assert [float(g.entry.state[0]) for g in got] == [0.0, 0.05]


def test_knn_k1_is_nearest(rng):
    mem = filled(rng, 50, 2)
    for _ in range(20):
        q = rng.normal(size=2)
        nb = mem.nearest(q)
        got = mem.knn(1, q, n=1, d=nb.distance + 1e-12)
        assert [g.index for g in got] == [nb.index]


def test_knn_matches_brute_force(rng):
    mem = filled(rng, 1000, 6)
    for _ in range(100):
        q = rng.normal(size=6)
        radius = rng.uniform(1.0, 4.0)
        want = brute_knn(mem.states, q, 5, radius)
        got = mem.knn(5, q, n=2.0, d=radius / 2.0)
        assert [g.index for g in got] == [i for _, i in want]
        for g, (dist, _) in zip(got, want):
            assert g.distance == pytest.approx(dist, rel=1e-9)


def test_tree_path_matches_brute_force_under_mutation(rng):
    """Large memory: exercise the k-d tree plus dirty-slot patching."""
    mem = EpisodicMemory(3, 1, capacity=6000, distance_threshold=0.05)
    for _ in range(9000):
        mem.insert_or_update(rng.uniform(0, 4, size=3), rng.normal(size=1), rng.normal())
    assert len(mem) > memory_mod._LINEAR_LIMIT
    for _ in range(150):
        q = rng.uniform(0, 4, size=3)
        for k, radius in ((1, math.inf), (5, 0.3)):
            want = brute_knn(mem.states, q, k, radius)
            idx, dist = mem.knn_indices(k, q, n=1.0, d=radius)
            assert list(idx) == [i for _, i in want]
            np.testing.assert_allclose(dist, [dd for dd, _ in want], rtol=1e-9)
        # interleave writes so stale slots exist between queries
        mem.insert_or_update(q, [0.0], 10.0)


def test_dimension_mismatch_raises():
    mem = EpisodicMemory(2, 1)
    with pytest.raises(ContractViolation):
        mem.nearest([0.0])
    with pytest.raises(ContractViolation):
        mem.insert_or_update([0.0, 0.0], [0.0, 1.0], 1.0)
    with pytest.raises(ContractViolation):
        mem.knn(0, [0.0, 0.0])


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_non_finite_rejected(bad):
    mem = EpisodicMemory(1, 1)
    with pytest.raises(ContractViolation):
        mem.insert_or_update([bad], [0.0], 0.0)
    with pytest.raises(ContractViolation):
        mem.insert_or_update([0.0], [0.0], bad)


def test_insert_empty_appends():
    mem = EpisodicMemory(1, 1)
    out = mem.insert_or_update([0.0], [0.1], 1.0)
    assert out.kind is Outcome.APPENDED and out.index == 0
    assert len(mem) == 1


def test_overwrite_when_close_and_better():
    mem = EpisodicMemory(1, 1, distance_threshold=0.1)
    mem.insert_or_update([0.0], [0.3], 1.0)
    out = mem.insert_or_update([0.05], [0.7], 2.0)
    assert out.kind is Outcome.OVERWROTE and out.index == 0
    e = mem.entry(0)
    assert e.state[0] == 0.05 and e.action[0] == 0.7 and e.value == 2.0
    assert e.tick == 2 and len(mem) == 1


def test_discard_when_close_and_not_better():
    mem = EpisodicMemory(1, 1, distance_threshold=0.1)
    mem.insert_or_update([0.0], [0.3], 1.0)
    before = mem.entries
    tick = mem.global_tick
    assert mem.insert_or_update([0.05], [0.7], 0.5).kind is Outcome.DISCARDED
    assert mem.insert_or_update([0.05], [0.7], 1.0).kind is Outcome.DISCARDED
    assert mem.global_tick == tick
    for a, b in zip(mem.entries, before):
        assert np.array_equal(a.state, b.state) and np.array_equal(a.action, b.action)
        assert a.value == b.value and a.tick == b.tick


def test_boundary_distance_counts_as_far():
    mem = EpisodicMemory(1, 1, distance_threshold=0.5)
    mem.insert_or_update([0.0], [0.0], 0.0)
    assert mem.insert_or_update([0.5], [0.0], 9.0).kind is Outcome.APPENDED


def test_lru_eviction_when_full():
    mem = EpisodicMemory(1, 1, capacity=2, distance_threshold=0.1)
    mem.insert_or_update([0.0], [0.0], 0.0)
    mem.insert_or_update([1.0], [0.0], 0.0)
    out = mem.insert_or_update([5.0], [0.2], 3.0)
    assert out.kind is Outcome.EVICTED_LRU_AND_APPENDED and out.index == 0
    assert mem.entry(0).state[0] == 5.0
    # overwrite refreshes recency: slot 1 becomes the most recent, slot 0 the LRU
    mem.insert_or_update([1.01], [0.0], 1.0)
    assert mem.insert_or_update([-5.0], [0.0], 0.0).index == 0


def test_len_and_capacity():
    mem = EpisodicMemory(2, 1, capacity=7)
    assert len(mem) == 0 and mem.capacity == 7
    mem.insert_or_update([0, 0], [0], 0)
    assert len(mem) == 1


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    capacity=st.integers(1, 12),
    d=st.floats(0.0, 0.8),
)
def test_write_rule_invariants(seed, capacity, d):
    rng = np.random.default_rng(seed)
    mem = EpisodicMemory(2, 1, capacity=capacity, distance_threshold=d)
    last_tick = 0
    for _ in range(10 * capacity):
        s = rng.uniform(-1, 1, size=2)
        v = float(rng.integers(0, 4))
        prev = mem.copy()
        out = mem.insert_or_update(s, [0.0], v)
        assert len(mem) <= capacity
        if out.kind is Outcome.APPENDED and len(prev):
            assert np.all(np.linalg.norm(prev.states - s, axis=1) >= d)
        if out.kind is Outcome.OVERWROTE:
            assert mem.values[out.index] > prev.values[out.index]
        if out.kind is Outcome.EVICTED_LRU_AND_APPENDED:
            assert prev.ticks[out.index] == prev.ticks.min()
        if out.kind is Outcome.DISCARDED:
            np.testing.assert_array_equal(mem.states, prev.states)
            np.testing.assert_array_equal(mem.values, prev.values)
            np.testing.assert_array_equal(mem.ticks, prev.ticks)
        else:
            assert mem.ticks[out.index] == mem.global_tick > last_tick
            last_tick = mem.global_tick
        assert len(set(mem.ticks.tolist())) == len(mem)
        assert mem.global_tick >= mem.ticks.max()


def test_snapshot_roundtrip_empty(tmp_path):
    mem = EpisodicMemory(3, 2, capacity=10, distance_threshold=0.25)
    path = tmp_path / "m.txt"
    snapshot_save(mem, path)
    back = snapshot_load(path)
    assert (back.state_dim, back.action_dim, back.capacity) == (3, 2, 10)
    assert back.distance_threshold == 0.25 and len(back) == 0 and back.global_tick == 0
    assert path.read_text().startswith(
        "cec-mem v1 state_dim=3 action_dim=2 capacity=10 d=0.25 global_tick=0"
    )


def test_snapshot_roundtrip_random(tmp_path, rng):
    mem = EpisodicMemory(4, 2, capacity=1500, distance_threshold=0.3)
    for _ in range(3000):
        mem.insert_or_update(rng.normal(size=4) * 3, rng.normal(size=2), rng.normal() * 1e3)
    path = tmp_path / "m.txt"
    mem.save(path)
    back = EpisodicMemory.load(path)
    assert back.global_tick == mem.global_tick
    assert back.distance_threshold == mem.distance_threshold
    for name in ("states", "actions", "values", "ticks"):
        np.testing.assert_array_equal(getattr(back, name), getattr(mem, name))


def test_snapshot_truncated(tmp_path, rng):
    mem = filled(rng, 20, 2, d=0.0)
    path = tmp_path / "m.txt"
    snapshot_save(mem, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(SnapshotFormatError):
        snapshot_load(path)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "garbage\n",
        "cec-mem v2 state_dim=1 action_dim=1 capacity=5 d=0.1 global_tick=0\n",
        "cec-mem v1 state_dim=1 action_dim=1 capacity=5 d=0.1 global_tick=3\n1,0.0,0.5\n",
        "cec-mem v1 state_dim=1 action_dim=1 capacity=5 d=0.1 global_tick=3\n9,0.0,0.5,0.1\n",
        "cec-mem v1 state_dim=1 action_dim=1 capacity=1 d=0.1 global_tick=3\n1,0,0,0\n2,0,1,0\n",
    ],
)
def test_snapshot_malformed(tmp_path, text):
    path = tmp_path / "m.txt"
    path.write_text(text)
    with pytest.raises(SnapshotFormatError):
        snapshot_load(path)
