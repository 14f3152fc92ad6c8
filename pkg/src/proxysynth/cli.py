"""Pipeline driver: trace generation, compression, merging, synthesis.

Subcommands map one-to-one onto pipeline stages plus an end-to-end
``pipeline`` command.  Reports are line-oriented ``key=value`` text
(optionally mirrored to JSON); exit codes: 0 success, 2 usage error,
3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import traceback
from pathlib import Path

from . import artifacts, codegen, solver, synth
from .canonical import ClusterConfig, TerminalTable, canonicalize, intern_events
from .errors import ProxySynthError
from .events import ComputeEvent, parse_event, parse_trace
from .grammar import Grammar
from .merge import MergedProgram, merge_program_parts

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_TRACE_RE = re.compile(r"trace\.(\d+)\.txt$")
_DUMP_RE = re.compile(r"grammar\.(\d+)\.txt$")


def _discover(directory: Path, pattern: re.Pattern, what: str) -> list[Path]:
    if not directory.is_dir():
        raise ProxySynthError(f"{what} directory not found: {directory}")
    found: dict[int, Path] = {}
    for path in directory.iterdir():
        m = pattern.search(path.name)
        if m:
            found[int(m.group(1))] = path
    if not found:
        raise ProxySynthError(f"no {what} files in {directory}")
    ranks = sorted(found)
    if ranks != list(range(len(ranks))):
        raise ProxySynthError(f"{what} ranks must be dense 0..P-1, got {ranks}")
    return [found[r] for r in ranks]


class Report:
    """key=value lines, printed and optionally mirrored to JSON."""

    def __init__(self):
        self.lines: list[str] = []
        self.data: dict = {}

    def add(self, key: str, value) -> None:
        self.lines.append(f"{key}={value}")
        self.data[key] = value

    def emit(self, json_path: str | None) -> None:
        for line in self.lines:
            print(line)
        if json_path:
            Path(json_path).write_text(json.dumps(self.data, indent=2) + "\n", encoding="utf-8")


def _compress_one(
    text: str, rank: int, world_size: int, threshold: float
) -> tuple[TerminalTable, Grammar, int]:
    trace = parse_trace(text, rank=rank)
    canon = canonicalize(trace, rank, world_size, ClusterConfig(threshold))
    table = TerminalTable()
    ids = intern_events(canon, table)
    grammar = Grammar()
    grammar.extend(ids)
    return table, grammar, len(trace.events)


def cmd_gen_trace(args) -> int:
    if args.spec:
        spec = synth.SynthSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    else:
        phase = synth.PhaseSpec(
            pattern=args.pattern,
            iterations=args.iterations,
            volume=args.volume,
            jitter=args.jitter,
        )
        spec = synth.SynthSpec(world_size=args.ranks, phases=(phase,), seed=args.seed)
    traces = synth.generate(spec)
    outdir = Path(args.out)
    paths = synth.write_trace_files(traces, outdir)
    (outdir / "spec.json").write_text(spec.to_json() + "\n", encoding="utf-8")
    report = Report()
    report.add("ranks", spec.world_size)
    for t, p in zip(traces, paths):
        report.add(f"rank{t.rank}_events", len(t.events))
    report.add("out", str(outdir))
    report.emit(args.json)
    return EXIT_OK


def cmd_compress(args) -> int:
    paths = _discover(Path(args.traces), _TRACE_RE, "trace")
    world = len(paths)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report = Report()
    report.add("ranks", world)
    total_trace = total_dump = 0
    for rank, path in enumerate(paths):
        text = path.read_text(encoding="utf-8")
        table, grammar, events = _compress_one(text, rank, world, args.cluster_threshold)
        dump = artifacts.write_rank_dump(table, grammar, rank)
        dump_path = outdir / f"grammar.{rank}.txt"
        dump_path.write_text(dump, encoding="utf-8")
        trace_bytes = len(text.encode("utf-8"))
        dump_bytes = len(dump.encode("utf-8"))
        total_trace += trace_bytes
        total_dump += dump_bytes
        report.add(f"rank{rank}_events", events)
        report.add(f"rank{rank}_trace_bytes", trace_bytes)
        report.add(f"rank{rank}_terminals", len(table))
        report.add(f"rank{rank}_grammar_size", grammar.size())
        report.add(f"rank{rank}_dump_bytes", dump_bytes)
        report.add(f"rank{rank}_ratio", round(trace_bytes / max(dump_bytes, 1), 3))
    report.add("total_trace_bytes", total_trace)
    report.add("total_dump_bytes", total_dump)
    report.add("total_ratio", round(total_trace / max(total_dump, 1), 3))
    report.emit(args.json)
    return EXIT_OK


def _read_dumps(dumps_dir: Path):
    paths = _discover(dumps_dir, _DUMP_RE, "grammar dump")
    parts = []
    for expect_rank, path in enumerate(paths):
        rank, table, main, rules = artifacts.read_rank_dump(path.read_text(encoding="utf-8"))
        if rank != expect_rank:
            raise ProxySynthError(f"{path}: header rank {rank} != filename rank {expect_rank}")
        parts.append((table, main, rules))
    return parts


def cmd_merge(args) -> int:
    parts = _read_dumps(Path(args.dumps))
    program = merge_program_parts(parts, args.merge_similarity)
    dump = artifacts.write_merged_dump(program)
    Path(args.out).write_text(dump, encoding="utf-8")
    report = Report()
    report.add("world_size", program.world_size)
    report.add("terminals", len(program.table.table))
    report.add("rules", len(program.rules))
    report.add("main_symbols", len(program.main))
    report.add("merged_bytes", len(dump.encode("utf-8")))
    report.add("out", args.out)
    report.emit(args.json)
    return EXIT_OK


def _solve_combos(program: MergedProgram, matrix: solver.BlockMatrix, scale: float, report: Report):
    combos = {}
    worst = 0.0
    for tid, key in enumerate(program.table.table.keys()):
        event = parse_event(key)
        if not isinstance(event, ComputeEvent):
            continue
        combo = solver.synthesize_compute_terminal(event.metrics, matrix, scale)
        combos[tid] = combo
        err = max(combo.relative_errors, default=0.0)
        worst = max(worst, err)
        report.add(f"terminal_t{tid}_max_rel_err", round(err, 6))
    report.add("compute_terminals", len(combos))
    report.add("max_rel_err", round(worst, 6))
    return combos


def _synthesize(program: MergedProgram, args, report: Report) -> str:
    if args.block_matrix:
        matrix = solver.BlockMatrix.load(args.block_matrix)
        report.add("block_matrix", args.block_matrix)
    else:
        matrix = solver.fixture_block_matrix()
        report.add("block_matrix", "builtin-fixture")
    models = codegen.load_comm_models(args.comm_model) if args.comm_model else codegen.default_models()
    cfg = codegen.CodegenConfig(world_size=program.world_size, scaling_factor=args.scale)
    combos = _solve_combos(program, matrix, args.scale, report)
    return codegen.generate_program(program, combos, cfg, models)


def _write_c(source: str, out_path: Path, report: Report) -> None:
    out_path.write_text(source, encoding="utf-8")
    shim = out_path.parent / "mpi_proxy_shim.h"
    shim.write_text(codegen.shim_header_text(), encoding="utf-8")
    report.add("out", str(out_path))
    report.add("shim", str(shim))


def cmd_synthesize(args) -> int:
    merged_path = Path(args.merged)
    if not merged_path.is_file():
        raise ProxySynthError(f"merged dump not found: {merged_path}")
    program = artifacts.read_merged_dump(merged_path.read_text(encoding="utf-8"))
    report = Report()
    report.add("world_size", program.world_size)
    report.add("scale", args.scale)
    source = _synthesize(program, args, report)
    _write_c(source, Path(args.out), report)
    report.emit(args.json)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    paths = _discover(Path(args.traces), _TRACE_RE, "trace")
    world = len(paths)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report = Report()
    report.add("ranks", world)

    parts = []
    total_trace = 0
    for rank, path in enumerate(paths):
        text = path.read_text(encoding="utf-8")
        table, grammar, _ = _compress_one(text, rank, world, args.cluster_threshold)
        total_trace += len(text.encode("utf-8"))
        (outdir / f"grammar.{rank}.txt").write_text(
            artifacts.write_rank_dump(table, grammar, rank), encoding="utf-8"
        )
        parts.append((table, grammar.main_body(), grammar.rule_bodies()))
    report.add("total_trace_bytes", total_trace)

    program = merge_program_parts(parts, args.merge_similarity)
    merged = artifacts.write_merged_dump(program)
    (outdir / "merged.txt").write_text(merged, encoding="utf-8")
    report.add("merged_bytes", len(merged.encode("utf-8")))
    report.add("ratio", round(total_trace / max(len(merged.encode('utf-8')), 1), 3))

    source = _synthesize(program, args, report)
    _write_c(source, outdir / "proxy.c", report)
    report.emit(args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxysynth",
        description="Compress MPI event traces into grammars and synthesize C proxy programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="generate synthetic SPMD traces")
    p.add_argument("--out", required=True, help="output directory for trace.<rank>.txt")
    p.add_argument("--spec", help="JSON spec file (overrides the inline flags)")
    p.add_argument("--ranks", type=int, default=4)
    p.add_argument("--pattern", choices=synth.PATTERNS, default="ring")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--volume", type=int, default=1024)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the report as JSON here")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("compress", help="canonicalize traces and build per-rank grammars")
    p.add_argument("--traces", required=True, help="directory holding trace.<rank>.txt")
    p.add_argument("--out", required=True, help="directory for grammar.<rank>.txt dumps")
    p.add_argument("--cluster-threshold", type=float, default=0.05)
    p.add_argument("--json")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("merge", help="merge per-rank grammar dumps")
    p.add_argument("--dumps", required=True, help="directory holding grammar.<rank>.txt")
    p.add_argument("--out", required=True, help="merged program dump path")
    p.add_argument("--merge-similarity", type=float, default=0.9)
    p.add_argument("--json")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("synthesize", help="emit a C proxy program from a merged dump")
    p.add_argument("--merged", required=True)
    p.add_argument("--out", required=True, help="output .c path")
    p.add_argument("--block-matrix", help="6x11 block cost file (default: builtin fixture)")
    p.add_argument("--comm-model", help="per-family linear comm model file")
    p.add_argument("--scale", type=float, default=10.0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("pipeline", help="compress + merge + synthesize in one run")
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cluster-threshold", type=float, default=0.05)
    p.add_argument("--merge-similarity", type=float, default=0.9)
    p.add_argument("--block-matrix")
    p.add_argument("--comm-model")
    p.add_argument("--scale", type=float, default=10.0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProxySynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
