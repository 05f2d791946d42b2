"""Fixed-capacity episodic memory of (state, action, value) tuples.

Entries live in preallocated numpy arrays indexed by insertion slot.  Nearest
neighbour queries are exact: small memories use a linear scan, large ones use
a k-d tree that is rebuilt lazily and patched with a linear scan over the
slots written since the last rebuild.  Either path returns the same result as
an exhaustive scan, ties resolved towards the lower slot index.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContractViolation, SnapshotFormatError

DEFAULT_CAPACITY = 100_000

# below this many entries a plain scan beats building a tree
_LINEAR_LIMIT = 4096
_MIN_DIRTY = 256
_MAX_DIRTY = 1024
# relative slack when deciding whether tree candidates are provably complete
_TREE_SLACK = 1e-9

SNAPSHOT_MAGIC = "cec-mem"
SNAPSHOT_VERSION = "v1"


@dataclass(frozen=True)
class MemoryEntry:
    state: np.ndarray
    action: np.ndarray
    value: float
    tick: int


@dataclass(frozen=True)
class Neighbor:
    index: int
    distance: float
    entry: MemoryEntry


class Outcome(enum.Enum):
    APPENDED = "appended"
    OVERWROTE = "overwrote"
    EVICTED_LRU_AND_APPENDED = "evicted_lru_and_appended"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class UpdateOutcome:
    kind: Outcome
    index: Optional[int] = None

    @property
    def changed(self) -> bool:
        return self.kind is not Outcome.DISCARDED


def _as_vector(x, dim: int, what: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape != (dim,):
        raise ContractViolation(f"{what} has shape {v.shape}, expected ({dim},)")
    if not np.all(np.isfinite(v)):
        raise ContractViolation(f"{what} contains non-finite values")
    return v


class EpisodicMemory:
    """Bounded table of state-action-value tuples with the CEC write rule.

    Args:
        state_dim: dimension of the (embedded) states stored.
        action_dim: dimension of the stored actions.
        capacity: maximum number of entries.
        distance_threshold: radius ``d`` under which an incoming state counts
            as a duplicate of its nearest stored neighbour.
    """

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        capacity: int = DEFAULT_CAPACITY,
        distance_threshold: float = 0.1,
    ):
        if state_dim < 1 or action_dim < 1:
            raise ContractViolation("state_dim and action_dim must be >= 1")
        if capacity < 1:
            raise ContractViolation("capacity must be >= 1")
        if not (math.isfinite(distance_threshold) and distance_threshold >= 0):
            raise ContractViolation("distance_threshold must be finite and >= 0")
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self._capacity = int(capacity)
        self.distance_threshold = float(distance_threshold)
        self.global_tick = 0
        self._count = 0
        self._states = np.zeros((0, self.state_dim))
        self._actions = np.zeros((0, self.action_dim))
        self._values = np.zeros(0)
        self._ticks = np.zeros(0, dtype=np.int64)
        self._tree: Optional[cKDTree] = None
        self._tree_n = 0
        self._stale: List[int] = []
        self._stale_mask = np.zeros(0, dtype=bool)

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return self._count

    @property
    def capacity(self) -> int:
        return self._capacity

    @property
    def states(self) -> np.ndarray:
        """Read-only view of the stored states, shape (len, state_dim)."""
        v = self._states[: self._count]
        v.flags.writeable = False
        return v

    @property
    def actions(self) -> np.ndarray:
        v = self._actions[: self._count]
        v.flags.writeable = False
        return v

    @property
    def values(self) -> np.ndarray:
        v = self._values[: self._count]
        v.flags.writeable = False
        return v

    @property
    def ticks(self) -> np.ndarray:
        v = self._ticks[: self._count]
        v.flags.writeable = False
        return v

    def entry(self, index: int) -> MemoryEntry:
        if not 0 <= index < self._count:
            raise IndexError(index)
        return MemoryEntry(
            state=self._states[index].copy(),
            action=self._actions[index].copy(),
            value=float(self._values[index]),
            tick=int(self._ticks[index]),
        )

    @property
    def entries(self) -> List[MemoryEntry]:
        return [self.entry(i) for i in range(self._count)]

    def _grow(self, needed: int) -> None:
        old = self._states.shape[0]
        if needed <= old:
            return
        new = min(self._capacity, max(needed, 2 * old, 64))
        for name in ("_states", "_actions", "_values", "_ticks"):
            arr = getattr(self, name)
            grown = np.zeros((new,) + arr.shape[1:], dtype=arr.dtype)
            grown[:old] = arr
            setattr(self, name, grown)

    # -- queries ------------------------------------------------------------

    def _distances(self, query: np.ndarray, idx=None) -> np.ndarray:
        if idx is None:
            diff = self._states[: self._count] - query
        else:
            diff = self._states[idx] - query
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def _linear(self, query: np.ndarray, k: int, radius: float):
        dist = self._distances(query)
        n = dist.shape[0]
        if k < n:
            kth = np.partition(dist, k - 1)[k - 1]
            idx = np.flatnonzero(dist <= kth)
        else:
            idx = np.arange(n)
        idx = idx[dist[idx] <= radius]
        order = np.lexsort((idx, dist[idx]))[:k]
        idx = idx[order]
        return idx, dist[idx]

    def _maybe_rebuild(self) -> None:
        dirty = len(self._stale) + (self._count - self._tree_n)
        limit = min(_MAX_DIRTY, max(_MIN_DIRTY, self._count // 16))
        if self._tree is None or dirty > limit:
            self._tree = cKDTree(self._states[: self._count].copy())
            self._tree_n = self._count
            self._stale = []
            self._stale_mask = np.zeros(self._count, dtype=bool)

    def _tree_query(self, query: np.ndarray, k: int, radius: float):
        self._maybe_rebuild()
        tree_n = self._tree_n
        m = min(tree_n, k + 2)
        while True:
            td, ti = self._tree.query(query, k=m)
            td = np.atleast_1d(td)
            ti = np.atleast_1d(ti)
            live = ~self._stale_mask[ti]
            bound = float(td[-1])
            if m >= tree_n or live.sum() >= k or bound > radius:
                break
            m = min(tree_n, 4 * m)
        complete = m >= tree_n
        extra = [np.asarray(self._stale, dtype=np.int64), np.arange(tree_n, self._count)]
        cand = np.concatenate([ti[live]] + extra)
        dist = self._distances(query, cand)
        keep = dist <= radius
        cand, dist = cand[keep], dist[keep]
        order = np.lexsort((cand, dist))[:k]
        cand, dist = cand[order], dist[order]
        if not complete:
            # every tree point not returned lies at tree-distance >= bound
            need = dist[-1] if len(cand) == k else radius
            if not need < bound * (1.0 - _TREE_SLACK):
                return self._linear(query, k, radius)
        return cand, dist

    def _search(self, query: np.ndarray, k: int, radius: float):
        if self._count <= _LINEAR_LIMIT:
            return self._linear(query, k, radius)
        return self._tree_query(query, k, radius)

    def _neighbors(self, idx, dist) -> List[Neighbor]:
        return [Neighbor(int(i), float(dd), self.entry(int(i))) for i, dd in zip(idx, dist)]

    def nearest(self, query) -> Optional[Neighbor]:
        """Closest stored entry by Euclidean distance, or None when empty."""
        q = _as_vector(query, self.state_dim, "query")
        if self._count == 0:
            return None
        idx, dist = self._search(q, 1, math.inf)
        return self._neighbors(idx, dist)[0]

    def nearest_index(self, query) -> Optional[int]:
        q = _as_vector(query, self.state_dim, "query")
        if self._count == 0:
            return None
        idx, _ = self._search(q, 1, math.inf)
        return int(idx[0])

    def knn_indices(self, k: int, query, n: float = 1.0, d: Optional[float] = None):
        """Slot indices and distances of up to ``k`` neighbours within ``n * d``."""
        if k < 1:
            raise ContractViolation("k must be >= 1")
        if not n > 0:
            raise ContractViolation("filter factor n must be > 0")
        d = self.distance_threshold if d is None else d
        if not d >= 0:
            raise ContractViolation("distance threshold d must be >= 0")
        q = _as_vector(query, self.state_dim, "query")
        if self._count == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        return self._search(q, int(k), n * d)

    def knn(self, k: int, query, n: float = 1.0, d: Optional[float] = None) -> List[Neighbor]:
        """Up to ``k`` nearest entries whose distance does not exceed ``n * d``.

        Sorted ascending by distance; equal distances keep the lower index
        first.  ``d`` defaults to the memory's own distance threshold.
        """
        return self._neighbors(*self.knn_indices(k, query, n, d))

    # -- writes ---------------------------------------------------------------

    def _write(self, index: int, s: np.ndarray, a: np.ndarray, v: float) -> None:
        self.global_tick += 1
        self._states[index] = s
        self._actions[index] = a
        self._values[index] = v
        self._ticks[index] = self.global_tick
        if index < self._tree_n and not self._stale_mask[index]:
            self._stale_mask[index] = True
            self._stale.append(index)

    def insert_or_update(self, s, a, v: float) -> UpdateOutcome:
        """Apply the episodic write rule to one (state, action, return) tuple.

        With ``c`` the nearest stored entry and ``d`` the distance threshold:
        a state closer than ``d`` to ``c`` replaces it only when its value is
        strictly larger, otherwise it is discarded; a state at distance ``d``
        or more is appended, evicting the least recently written entry when
        the memory is full.
        """
        s = _as_vector(s, self.state_dim, "state")
        a = _as_vector(a, self.action_dim, "action")
        v = float(v)
        if not math.isfinite(v):
            raise ContractViolation("value must be finite")
        if self._count:
            idx, dist = self._search(s, 1, math.inf)
            c, dc = int(idx[0]), float(dist[0])
            if dc < self.distance_threshold:
                if v > self._values[c]:
                    self._write(c, s, a, v)
                    return UpdateOutcome(Outcome.OVERWROTE, c)
                return UpdateOutcome(Outcome.DISCARDED)
            if self._count == self._capacity:
                lru = int(np.argmin(self._ticks[: self._count]))
                self._write(lru, s, a, v)
                return UpdateOutcome(Outcome.EVICTED_LRU_AND_APPENDED, lru)
        self._grow(self._count + 1)
        index = self._count
        self._count += 1
        self._write(index, s, a, v)
        return UpdateOutcome(Outcome.APPENDED, index)

    def _restore(self, s, a, v, ticks, global_tick) -> None:
        n = len(v)
        self._grow(n)
        self._states[:n] = s
        self._actions[:n] = a
        self._values[:n] = v
        self._ticks[:n] = ticks
        self._count = n
        self.global_tick = int(global_tick)
        self._tree, self._tree_n = None, 0
        self._stale, self._stale_mask = [], np.zeros(0, dtype=bool)

    def copy(self) -> "EpisodicMemory":
        m = EpisodicMemory(self.state_dim, self.action_dim, self._capacity, self.distance_threshold)
        m._restore(self.states, self.actions, self.values, self.ticks, self.global_tick)
        return m

    # -- snapshots ------------------------------------------------------------

    def save(self, path) -> None:
        snapshot_save(self, path)

    @classmethod
    def load(cls, path) -> "EpisodicMemory":
        return snapshot_load(path)


def _header(mem: EpisodicMemory) -> str:
    return (
        f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} state_dim={mem.state_dim} "
        f"action_dim={mem.action_dim} capacity={mem.capacity} "
        f"d={mem.distance_threshold!r} global_tick={mem.global_tick}"
    )


def snapshot_text(mem: EpisodicMemory) -> str:
    lines = [_header(mem)]
    s, a, v, t = mem.states, mem.actions, mem.values, mem.ticks
    for i in range(len(mem)):
        fields = [str(int(t[i])), repr(float(v[i]))]
        fields += [repr(float(x)) for x in s[i]]
        fields += [repr(float(x)) for x in a[i]]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def snapshot_save(mem: EpisodicMemory, path) -> None:
    """Write ``mem`` as a UTF-8 text snapshot (header line + one row per entry)."""
    text = snapshot_text(mem)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _parse_header(line: str) -> dict:
    parts = line.split(" ")
    if len(parts) != 7 or parts[0] != SNAPSHOT_MAGIC or parts[1] != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"bad snapshot header: {line!r}")
    keys = ["state_dim", "action_dim", "capacity", "d", "global_tick"]
    out = {}
    for key, tok in zip(keys, parts[2:]):
        name, sep, val = tok.partition("=")
        if name != key or not sep:
            raise SnapshotFormatError(f"bad header field {tok!r}, expected {key}=...")
        try:
            out[key] = float(val) if key == "d" else int(val)
        except ValueError:
            raise SnapshotFormatError(f"bad header value {tok!r}") from None
    return out


def parse_snapshot(text: str) -> EpisodicMemory:
    if not text.endswith("\n"):
        raise SnapshotFormatError("snapshot is truncated (missing final newline)")
    lines = text[:-1].split("\n")
    h = _parse_header(lines[0])
    D, A = h["state_dim"], h["action_dim"]
    try:
        mem = EpisodicMemory(D, A, h["capacity"], h["d"])
    except ContractViolation as exc:
        raise SnapshotFormatError(f"invalid header: {exc}") from None
    rows = lines[1:]
    if len(rows) > mem.capacity:
        raise SnapshotFormatError(f"{len(rows)} rows exceed capacity {mem.capacity}")
    width = 2 + D + A
    ticks = np.zeros(len(rows), dtype=np.int64)
    data = np.zeros((len(rows), width - 1))
    for i, row in enumerate(rows):
        fields = row.split(",")
        if len(fields) != width:
            raise SnapshotFormatError(
                f"row {i + 1} has {len(fields)} fields, header implies {width}"
            )
        try:
            ticks[i] = int(fields[0])
            data[i] = [float(x) for x in fields[1:]]
        except ValueError:
            raise SnapshotFormatError(f"row {i + 1} is not numeric") from None
    if not np.all(np.isfinite(data)):
        raise SnapshotFormatError("snapshot contains non-finite values")
    if len(rows):
        if ticks.min() < 1 or ticks.max() > h["global_tick"]:
            raise SnapshotFormatError("entry tick outside [1, global_tick]")
        if len(np.unique(ticks)) != len(ticks):
            raise SnapshotFormatError("duplicate entry ticks")
    mem._restore(data[:, 1 : 1 + D], data[:, 1 + D :], data[:, 0], ticks, h["global_tick"])
    return mem


def snapshot_load(path) -> EpisodicMemory:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_snapshot(text)
