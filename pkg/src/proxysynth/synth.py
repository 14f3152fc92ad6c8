"""Synthetic SPMD trace generation.

Desk-scale stand-in for traced MPI applications: every rank runs the
same phase skeleton with rank-dependent peers, so the merged grammar
exercises the same duplication the real pipeline sees.  Raw traces come
out un-canonicalized on purpose (absolute peers, opaque pointer-like
handle tokens) to feed the canonicalizer something realistic.

Streams are reproducible: rank r of a spec seeded s draws from a
counter-based Philox generator keyed (s, r), so any implementation of
Philox4x64 yields identical traces.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .events import CommEvent, ComputeEvent, Trace, serialize_trace

PATTERNS = ("ring", "halo-1d", "allreduce", "stencil")

#: Plausible per-span counter magnitudes (INS CYC LST L1_DCM BR_CN MSP);
#: chosen reachable under the shipped block-cost fixture.
DEFAULT_COMPUTE_BASE = (2_617_000, 1_863_000, 760_000, 31_905, 279_000, 6_070)


@dataclass(frozen=True)
class PhaseSpec:
    """One program phase: a comm pattern repeated `iterations` times."""

    pattern: str
    iterations: int
    volume: int = 1024
    tag: int = 0
    compute_base: tuple[int, int, int, int, int, int] = DEFAULT_COMPUTE_BASE
    jitter: float = 0.0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}; pick from {PATTERNS}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must be in [0, 1)")
        if self.volume < 0:
            raise ValueError("volume must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    world_size: int
    phases: tuple[PhaseSpec, ...]
    seed: int = 0

    def __post_init__(self):
        if self.world_size < 1:
            raise ValueError("world_size must be >= 1")
        object.__setattr__(self, "phases", tuple(self.phases))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        data = json.loads(text)
        phases = tuple(PhaseSpec(**{**p, "compute_base": tuple(p.get("compute_base", DEFAULT_COMPUTE_BASE))})
                       for p in data["phases"])
        return cls(world_size=data["world_size"], phases=phases, seed=data.get("seed", 0))


class _RankStream:
    """Per-rank event emitter with pointer-like raw handle tokens."""

    def __init__(self, rank: int, seed: int):
        self.rank = rank
        self.rng = np.random.Generator(np.random.Philox(key=[seed, rank]))
        self.events: list = []
        self._next_handle = 0x7F00_0000_0000 + rank * 0x100_0000

    def handle(self) -> str:
        self._next_handle += 0x40
        return hex(self._next_handle)

    def compute(self, phase: PhaseSpec) -> None:
        base = phase.compute_base
        if phase.jitter == 0.0:
            m = list(base)
        else:
            factors = 1.0 + self.rng.uniform(-phase.jitter, phase.jitter, size=6)
            m = [max(int(round(b * f)), 0) for b, f in zip(base, factors)]
        ins, cyc, lst, l1, br, msp = m
        br = min(br, ins)
        msp = min(msp, br)
        l1 = min(l1, lst)
        self.events.append(ComputeEvent((ins, cyc, lst, l1, br, msp)))

    def comm(self, **kw) -> None:
        self.events.append(CommEvent(**kw))


def _emit_iteration(s: _RankStream, phase: PhaseSpec, world_size: int) -> None:
    r, P = s.rank, world_size
    vol, tag = phase.volume, phase.tag
    W = "W"

    if phase.pattern == "ring":
        left, right = (r - 1) % P, (r + 1) % P
        rq_recv, rq_send = s.handle(), s.handle()
        s.comm(func="Irecv", vol=vol, peer=left, peer_abs=True, tag=tag, comm=W, req=rq_recv)
        s.comm(func="Isend", vol=vol, peer=right, peer_abs=True, tag=tag, comm=W, req=rq_send)
        s.compute(phase)
        s.comm(func="Wait", req=rq_recv)
        s.comm(func="Wait", req=rq_send)
        return

    if phase.pattern in ("halo-1d", "stencil"):
        reqs = []
        for peer in (r - 1, r + 1):
            if 0 <= peer < P:
                rq = s.handle()
                s.comm(func="Irecv", vol=vol, peer=peer, peer_abs=True, tag=tag, comm=W, req=rq)
                reqs.append(rq)
        for peer in (r - 1, r + 1):
            if 0 <= peer < P:
                rq = s.handle()
                s.comm(func="Isend", vol=vol, peer=peer, peer_abs=True, tag=tag, comm=W, req=rq)
                reqs.append(rq)
        s.compute(phase)
        for rq in reqs:
            s.comm(func="Wait", req=rq)
        if phase.pattern == "stencil":
            s.comm(func="Allreduce", vol=8, comm=W)
        elif not reqs:
            # single-rank halo has no messages; a barrier still bounds
            # the compute span
            s.comm(func="Barrier", comm=W)
        return

    if phase.pattern == "allreduce":
        s.compute(phase)
        s.comm(func="Allreduce", vol=vol, comm=W)
        return

    raise AssertionError(phase.pattern)


def generate(spec: SynthSpec) -> list[Trace]:
    """One raw trace per rank, deterministic in the spec seed."""
    traces = []
    for rank in range(spec.world_size):
        s = _RankStream(rank, spec.seed)
        for phase in spec.phases:
            for _ in range(phase.iterations):
                _emit_iteration(s, phase, spec.world_size)
        traces.append(Trace(rank=rank, events=s.events))
    return traces


def write_trace_files(traces: list[Trace], outdir) -> list[Path]:
    """trace.<rank>.txt per rank; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in traces:
        p = outdir / f"trace.{t.rank}.txt"
        p.write_text(serialize_trace(t), encoding="utf-8")
        paths.append(p)
    return paths
