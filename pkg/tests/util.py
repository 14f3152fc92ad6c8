"""Shared helpers for the test suite."""

from __future__ import annotations

import os
import shutil
import subprocess
from pathlib import Path

from proxysynth.canonical import ClusterConfig, TerminalTable, canonicalize, intern_events
from proxysynth.codegen import shim_header_text
from proxysynth.events import Trace
from proxysynth.grammar import Grammar

GCC = shutil.which("gcc") or shutil.which("cc")


def compress_traces(traces: list[Trace], threshold: float = 0.05):
    """Canonicalize + intern + grammar per rank.

    Returns (per_rank, id_seqs): per_rank pairs feed merge_program, and
    id_seqs holds each rank's canonical local-id sequence.
    """
    world = len(traces)
    per_rank = []
    id_seqs = []
    for rank, trace in enumerate(traces):
        canon = canonicalize(trace, rank, world, ClusterConfig(threshold))
        table = TerminalTable()
        ids = intern_events(canon, table)
        g = Grammar()
        g.extend(ids)
        per_rank.append((table, g))
        id_seqs.append(ids)
    return per_rank, id_seqs


def compile_with_shim(source: str, workdir: Path, name: str = "proxy") -> Path:
    """Build a generated program against the logging shim; returns the binary."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    (workdir / "proxy.c").write_text(source, encoding="utf-8")
    (workdir / "mpi_proxy_shim.h").write_text(shim_header_text(), encoding="utf-8")
    binary = workdir / name
    subprocess.run(
        [GCC, "-std=c99", "-Wall", "-Wextra", "-O1", "-DMPI_PROXY_SHIM",
         f"-I{workdir}", str(workdir / "proxy.c"), "-o", str(binary)],
        check=True,
        capture_output=True,
    )
    return binary


def replay_keys(binary: Path, rank: int, world: int) -> list[str]:
    """Run one rank of a shim build; returns the logged terminal keys."""
    log = binary.parent / f"replay.{rank}.log"
    env = dict(
        os.environ,
        MPI_PROXY_RANK=str(rank),
        MPI_PROXY_SIZE=str(world),
        MPI_PROXY_LOG=str(log),
    )
    subprocess.run([str(binary)], env=env, check=True, capture_output=True)
    lines = log.read_text(encoding="utf-8").splitlines()
    out = []
    for line in lines:
        assert line.startswith("(") and line.endswith(")"), line
        out.append(line[1:-1])
    return out
