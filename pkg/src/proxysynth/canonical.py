"""Canonical trace rewriting: handle pools, relative ranks, clustering.

Raw traces carry runtime-random handle values and absolute peer ranks,
both of which are high-entropy and defeat grammar compression.  This
module renumbers handles from dense free pools, rewrites point-to-point
peers as signed offsets, clusters near-identical computation vectors,
and interns the result into a per-rank terminal table.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

from .errors import DanglingHandleError, DoubleFreeError, HandleError, InvalidRankError
from .events import (
    COMM_CREATE_FUNCS,
    P2P_FUNCS,
    ROOTED_COLLECTIVES,
    CommEvent,
    ComputeEvent,
    Trace,
    serialize_event,
)

#: World communicator's pool number; never released.
WORLD_COMM = 0


class HandlePool:
    """Free pool of small integers, allocated smallest-first from zero."""

    def __init__(self):
        self._free: list[int] = []
        self._live: set[int] = set()
        self._next_fresh = 0

    def allocate(self) -> int:
        if self._free:
            n = heapq.heappop(self._free)
        else:
            n = self._next_fresh
            self._next_fresh += 1
        self._live.add(n)
        return n

    def release(self, n: int) -> None:
        if n not in self._live:
            raise DoubleFreeError(f"handle {n} is not live")
        self._live.remove(n)
        heapq.heappush(self._free, n)

    @property
    def live(self) -> frozenset[int]:
        return frozenset(self._live)

    def high_water(self) -> int:
        """Largest number ever handed out plus one (pool array size)."""
        return self._next_fresh


class TerminalTable:
    """Bijection between canonical event key strings and dense ids."""

    def __init__(self):
        self._key_to_id: dict[str, int] = {}
        self._keys: list[str] = []

    def intern(self, key: str) -> int:
        tid = self._key_to_id.get(key)
        if tid is None:
            tid = len(self._keys)
            self._key_to_id[key] = tid
            self._keys.append(key)
        return tid

    def id_for(self, key: str) -> int:
        return self._key_to_id[key]

    def key_for(self, tid: int) -> str:
        return self._keys[tid]

    def keys(self) -> list[str]:
        return list(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: str) -> bool:
        return key in self._key_to_id


@dataclass(frozen=True)
class ClusterConfig:
    """Relative-distance bound for merging computation events."""

    threshold: float = 0.05

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")


def canonicalize_handles(trace: Trace) -> Trace:
    """Rewrite request/comm handles to pool numbers.

    Completions release their request number back to the pool; Comm_free
    releases its comm number.  World is comm 0 and is never released, so
    created communicators start at 1.
    """
    req_pool = HandlePool()
    comm_pool = HandlePool()
    world = comm_pool.allocate()
    assert world == WORLD_COMM

    req_map: dict[int | str, int] = {}
    req_done: set[int | str] = set()
    # Both spellings of the world communicator resolve to pool number 0.
    comm_map: dict[int | str, int] = {"W": WORLD_COMM, 0: WORLD_COMM}
    comm_done: set[int | str] = set()

    out: list = []
    for e in trace.events:
        if not isinstance(e, CommEvent):
            out.append(e)
            continue
        f = e.func
        new_req = e.req
        new_comm = e.comm

        if f in ("Isend", "Irecv"):
            if e.req in req_map:
                raise HandleError(f"request token {e.req!r} already live")
            req_map[e.req] = req_pool.allocate()
            req_done.discard(e.req)  # raw values may be recycled once released
            new_req = req_map[e.req]
        elif f == "Wait":
            if e.req not in req_map:
                if e.req in req_done:
                    raise DoubleFreeError(f"request {e.req!r} completed twice")
                raise DanglingHandleError(f"wait on unknown request {e.req!r}")
            new_req = req_map.pop(e.req)
            req_done.add(e.req)
            req_pool.release(new_req)

        if f in COMM_CREATE_FUNCS:
            if e.comm in comm_map:
                raise HandleError(f"comm token {e.comm!r} already live")
            comm_map[e.comm] = comm_pool.allocate()
            comm_done.discard(e.comm)
            new_comm = comm_map[e.comm]
        elif f == "Comm_free":
            if e.comm not in comm_map:
                if e.comm in comm_done:
                    raise DoubleFreeError(f"comm {e.comm!r} freed twice")
                raise DanglingHandleError(f"free of unknown comm {e.comm!r}")
            new_comm = comm_map.pop(e.comm)
            if new_comm == WORLD_COMM:
                raise HandleError("cannot free the world communicator")
            comm_done.add(e.comm)
            comm_pool.release(new_comm)
        elif e.comm is not None:
            if e.comm not in comm_map:
                raise DanglingHandleError(f"use of unknown comm {e.comm!r}")
            new_comm = comm_map[e.comm]

        out.append(replace(e, req=new_req, comm=new_comm))
    return Trace(rank=trace.rank, events=out)


def encode_relative_ranks(trace: Trace, my_rank: int, world_size: int) -> Trace:
    """Store point-to-point peers as offsets (target - my_rank).

    Collective roots stay absolute; no modular wraparound is applied, so
    decoding is plain addition.
    """
    out: list = []
    for e in trace.events:
        if isinstance(e, CommEvent) and e.func in P2P_FUNCS:
            if not e.peer_abs:
                out.append(e)  # already relative
                continue
            if not 0 <= e.peer < world_size:
                raise InvalidRankError(f"peer {e.peer} outside [0, {world_size})")
            rpeer = e.rpeer
            if rpeer is not None:
                if not 0 <= rpeer < world_size:
                    raise InvalidRankError(f"rpeer {rpeer} outside [0, {world_size})")
                rpeer = rpeer - my_rank
            out.append(replace(e, peer=e.peer - my_rank, rpeer=rpeer, peer_abs=False))
        else:
            if isinstance(e, CommEvent) and e.func in ROOTED_COLLECTIVES:
                if not 0 <= e.peer < world_size:
                    raise InvalidRankError(f"root {e.peer} outside [0, {world_size})")
            out.append(e)
    return Trace(rank=trace.rank, events=out)


def decode_relative_ranks(trace: Trace, my_rank: int) -> Trace:
    """Inverse of :func:`encode_relative_ranks` (testing aid)."""
    out: list = []
    for e in trace.events:
        if isinstance(e, CommEvent) and e.func in P2P_FUNCS and not e.peer_abs:
            rpeer = e.rpeer if e.rpeer is None else e.rpeer + my_rank
            out.append(replace(e, peer=e.peer + my_rank, rpeer=rpeer, peer_abs=True))
        else:
            out.append(e)
    return Trace(rank=trace.rank, events=out)


def relative_distance(a: tuple[int, ...], b: tuple[int, ...]) -> float:
    """max_i |a_i - b_i| / max(b_i, 1): scale-free, zero-count safe."""
    return max(abs(x - y) / max(y, 1) for x, y in zip(a, b))


def cluster_compute_events(
    events: list[ComputeEvent], cfg: ClusterConfig
) -> tuple[list[ComputeEvent], list[int]]:
    """Single-pass greedy clustering of metric vectors.

    An event joins the first representative within the relative-distance
    threshold, else becomes a new representative.  Representatives are
    the first-seen member, keeping the outcome order-deterministic and
    every representative an actually-observed vector.
    """
    reps: list[ComputeEvent] = []
    assignment: list[int] = []
    for e in events:
        chosen = -1
        for i, r in enumerate(reps):
            if relative_distance(e.metrics, r.metrics) <= cfg.threshold:
                chosen = i
                break
        if chosen < 0:
            chosen = len(reps)
            reps.append(e)
        assignment.append(chosen)
    return reps, assignment


def cluster_trace_computes(trace: Trace, cfg: ClusterConfig) -> Trace:
    """Replace every compute event by its cluster representative."""
    computes = [e for e in trace.events if isinstance(e, ComputeEvent)]
    reps, assignment = cluster_compute_events(computes, cfg)
    it = iter(assignment)
    out = [
        reps[next(it)] if isinstance(e, ComputeEvent) else e
        for e in trace.events
    ]
    return Trace(rank=trace.rank, events=out)


def intern_events(trace: Trace, table: TerminalTable) -> list[int]:
    """Map a canonical trace to a dense id sequence, extending the table.

    The key string is the exact serialized canonical event, so mapping
    ids back through the table reproduces the trace byte-for-byte.
    """
    return [table.intern(serialize_event(e)) for e in trace.events]


def canonicalize(
    trace: Trace,
    my_rank: int,
    world_size: int,
    cfg: ClusterConfig = ClusterConfig(),
) -> Trace:
    """Full canonical pipeline: handles, relative ranks, clustering."""
    t = canonicalize_handles(trace)
    t = encode_relative_ranks(t, my_rank, world_size)
    return cluster_trace_computes(t, cfg)
