"""C source generation from a merged program.

Every terminal becomes one C function (an MPI call with decoded
parameters, or a computation-block combination), every rule becomes a
function calling its body in order with run-length loops, and the
merged main rule becomes ``main`` with rank-list branch guards.  Code
size therefore tracks grammar size, not trace length.

Shrinking: computation targets are divided by the scaling factor before
the block solver runs, and blocking-call volumes are shrunk by
inverting a fitted linear time-vs-volume model so that the modeled
call time drops by the same factor.  Non-blocking calls keep their
volume; their cost overlaps computation that is already shrunk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import CodegenError, DegenerateFitError
from .events import NONBLOCKING_FUNCS, CommEvent, ComputeEvent, parse_event
from .grammar import Body, body_depths, nt_id
from .merge import MergedProgram, RankList
from .solver import ProxyCombination

#: Largest count accepted by the C int MPI APIs.
_MAX_INT = 2**31 - 1

#: Communication-model families.
FAMILIES = ("send", "recv", "collective")

_FAMILY_OF = {
    "Send": "send",
    "Isend": "send",
    "Sendrecv": "send",
    "Recv": "recv",
    "Irecv": "recv",
    "Allreduce": "collective",
    "Bcast": "collective",
    "Reduce": "collective",
    "Alltoall": "collective",
}

#: Synthetic computation blocks, in solver column order.  Bodies use
#: volatile sinks so optimizing compilers keep the work.
BLOCK_MACROS = [
    ("BLK_ALU", """\
#define BLK_ALU(n) do { long _a = g_sink; long long _i; \\
    for (_i = 0; _i < (n); _i++) { _a += (long)_i * 3 + 1; _a ^= _a >> 7; } \\
    g_sink = _a; } while (0)"""),
    ("BLK_CHAIN", """\
#define BLK_CHAIN(n) do { long _a = g_sink | 1; long long _i; \\
    for (_i = 0; _i < (n); _i++) { _a = (_a * 3 + 1) ^ (_a >> 2); } \\
    g_sink = _a; } while (0)"""),
    ("BLK_LOAD", """\
#define BLK_LOAD(n) do { long _a = 0; size_t _p = (size_t)(g_sink & 0xff); long long _i; \\
    for (_i = 0; _i < (n); _i++) { _a += g_arena[_p]; _a += g_arena[_p + 8]; _a += g_arena[_p + 16]; \\
        _p = (_p + 24) & (PROXY_ARENA_BYTES - 1); } \\
    g_sink = _a; } while (0)"""),
    ("BLK_STORE", """\
#define BLK_STORE(n) do { size_t _p = (size_t)(g_sink & 0xff); long long _i; \\
    for (_i = 0; _i < (n); _i++) { g_arena[_p] = (unsigned char)_i; g_arena[_p + 8] = (unsigned char)(_i >> 3); \\
        g_arena[_p + 16] = (unsigned char)(_i >> 5); _p = (_p + 24) & (PROXY_ARENA_BYTES - 1); } \\
    } while (0)"""),
    ("BLK_STRIDE", """\
#define BLK_STRIDE(n) do { long _a = 0; size_t _p = (size_t)(g_sink & 0xff); long long _i; \\
    for (_i = 0; _i < (n); _i++) { _a += g_arena[_p]; g_arena[_p + 1] = (unsigned char)_a; \\
        _p = (_p + 4099) & (PROXY_ARENA_BYTES - 1); } \\
    g_sink = _a; } while (0)"""),
    ("BLK_BR_PRED", """\
#define BLK_BR_PRED(n) do { long _a = g_sink; long long _i; \\
    for (_i = 0; _i < (n); _i++) { \\
        if ((_i & 3) == 0) _a += 3; else if ((_i & 3) == 1) _a -= 1; else _a ^= 5; \\
        if (_a > 0) _a -= (_i & 7); } \\
    g_sink = _a; } while (0)"""),
    ("BLK_BR_RAND", """\
#define BLK_BR_RAND(n) do { long _a = g_sink; unsigned _r = g_rand_state | 1u; long long _i; \\
    for (_i = 0; _i < (n); _i++) { _r = _r * 1103515245u + 12345u; \\
        if (_r & 0x10000u) _a += 7; else _a -= 3; \\
        if (_r & 0x20000u) _a ^= _r >> 11; } \\
    g_rand_state = _r; g_sink = _a; } while (0)"""),
    ("BLK_LDBR", """\
#define BLK_LDBR(n) do { long _a = 0; size_t _p = (size_t)(g_sink & 0xff); long long _i; \\
    for (_i = 0; _i < (n); _i++) { unsigned char _v = g_arena[_p]; \\
        if (_v & 1) _a += _v; else _a -= 1; \\
        g_arena[_p + 2] = (unsigned char)_a; _p = (_p + 40) & (PROXY_ARENA_BYTES - 1); } \\
    g_sink = _a; } while (0)"""),
    ("BLK_MUL", """\
#define BLK_MUL(n) do { long _a = g_sink | 3; long long _i; \\
    for (_i = 0; _i < (n); _i++) { _a = _a * 0x9e3779b1L + 17; _a = _a * 31 + (_a >> 5); } \\
    g_sink = _a; } while (0)"""),
    ("BLK_SPIN", """\
#define BLK_SPIN(n) do { long _a = g_sink; long long _i; \\
    for (_i = 0; _i < (n); _i++) { _a = (_a >> 1) ^ (long)_i; } \\
    g_sink = _a; } while (0)"""),
    ("BLK_LOOP_OVERHEAD", """\
#define BLK_LOOP_OVERHEAD(n) do { long _a = 0; long long _i; \\
    for (_i = 0; _i < (n); _i++) { _a ^= g_sink; } \\
    g_sink = _a; } while (0)"""),
]

BLOCK_NAMES = [name for name, _ in BLOCK_MACROS]


@dataclass(frozen=True)
class CommTimeModel:
    """Linear blocking-call cost model: seconds = intercept + slope * bytes."""

    slope: float
    intercept: float

    def __post_init__(self):
        if self.slope < 0 or not math.isfinite(self.slope) or not math.isfinite(self.intercept):
            raise CodegenError("comm model needs finite slope >= 0")

    def time(self, volume: float) -> float:
        return self.intercept + self.slope * volume


#: Ballpark small-message latency and per-byte cost; used when no
#: measured samples are supplied.
DEFAULT_COMM_MODEL = CommTimeModel(slope=1e-9, intercept=1e-6)


def default_models() -> dict[str, CommTimeModel]:
    return {family: DEFAULT_COMM_MODEL for family in FAMILIES}


def fit_comm_model(samples: list[tuple[float, float]]) -> CommTimeModel:
    """Ordinary least squares over (volume, seconds); slope clamped at 0."""
    if len(samples) < 2:
        raise DegenerateFitError("need at least two samples")
    v = np.array([s[0] for s in samples], dtype=float)
    t = np.array([s[1] for s in samples], dtype=float)
    if np.ptp(v) == 0:
        raise DegenerateFitError("all volumes equal; slope is undetermined")
    vm, tm = v.mean(), t.mean()
    slope = float(np.dot(v - vm, t - tm) / np.dot(v - vm, v - vm))
    slope = max(slope, 0.0)
    intercept = float(tm - slope * vm)
    return CommTimeModel(slope=slope, intercept=intercept)


def load_comm_models(path) -> dict[str, CommTimeModel]:
    """Model file: one `<family> <intercept> <slope>` line per family."""
    models = default_models()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in FAMILIES:
                raise CodegenError(f"comm model line {lineno}: expected '<family> <intercept> <slope>'")
            models[parts[0]] = CommTimeModel(intercept=float(parts[1]), slope=float(parts[2]))
    return models


def scaled_volume(model: CommTimeModel, volume: int, factor: float) -> float:
    """Volume whose modeled time is the original's divided by `factor`.

    Exact inversion of the linear model, clamped at zero; a zero slope
    leaves the volume unchanged (call time does not depend on it).
    """
    if factor == 1.0 or model.slope == 0.0:
        return float(volume)
    target = model.time(volume) / factor
    return max((target - model.intercept) / model.slope, 0.0)


@dataclass(frozen=True)
class CodegenConfig:
    """Code generation knobs."""

    world_size: int
    scaling_factor: float = 10.0

    def __post_init__(self):
        if self.world_size < 1:
            raise CodegenError("world_size must be >= 1")
        if self.scaling_factor < 1.0:
            raise CodegenError("scaling factor must be >= 1")


def shim_header_text() -> str:
    return resources.files("proxysynth.data").joinpath("mpi_proxy_shim.h").read_text()


def _c_string(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _peer_expr(offset: int) -> str:
    return f"g_rank + ({offset})"


def _emit_volume(event: CommEvent, vol: int, models, cfg: CodegenConfig) -> int:
    """Final integer byte count for one call argument."""
    if event.func in NONBLOCKING_FUNCS:
        scaled = float(vol)  # overlapped cost shrinks with computation
    else:
        model = models[_FAMILY_OF[event.func]]
        scaled = scaled_volume(model, vol, cfg.scaling_factor)
    out = int(round(scaled))
    if out > _MAX_INT:
        raise CodegenError(f"volume {out} exceeds the C int MPI count range")
    return out


def _terminal_volumes(event: CommEvent, models, cfg) -> dict[str, int]:
    out = {}
    if event.vol is not None:
        out["vol"] = _emit_volume(event, event.vol, models, cfg)
    if event.rvol is not None:
        out["rvol"] = _emit_volume(event, event.rvol, models, cfg)
    return out


def _comm_call(event: CommEvent, vols: dict[str, int], world_size: int) -> str:
    f = event.func
    if f in ("Send", "Recv", "Isend", "Irecv", "Sendrecv"):
        if abs(event.peer) >= world_size:
            raise CodegenError(f"peer offset {event.peer} unreachable in world of {world_size}")
    if f == "Send":
        return (f"MPI_Send(g_sendbuf, {vols['vol']}, MPI_BYTE, {_peer_expr(event.peer)}, "
                f"{event.tag}, g_comm[{event.comm}]);")
    if f == "Recv":
        return (f"MPI_Recv(g_recvbuf, {vols['vol']}, MPI_BYTE, {_peer_expr(event.peer)}, "
                f"{event.tag}, g_comm[{event.comm}], MPI_STATUS_IGNORE);")
    if f == "Isend":
        return (f"MPI_Isend(g_sendbuf, {vols['vol']}, MPI_BYTE, {_peer_expr(event.peer)}, "
                f"{event.tag}, g_comm[{event.comm}], &g_req[{event.req}]);")
    if f == "Irecv":
        return (f"MPI_Irecv(g_recvbuf, {vols['vol']}, MPI_BYTE, {_peer_expr(event.peer)}, "
                f"{event.tag}, g_comm[{event.comm}], &g_req[{event.req}]);")
    if f == "Wait":
        return f"MPI_Wait(&g_req[{event.req}], MPI_STATUS_IGNORE);"
    if f == "Barrier":
        return f"MPI_Barrier(g_comm[{event.comm}]);"
    if f == "Allreduce":
        return (f"MPI_Allreduce(g_sendbuf, g_recvbuf, {vols['vol']}, MPI_BYTE, MPI_BOR, "
                f"g_comm[{event.comm}]);")
    if f == "Bcast":
        if not 0 <= event.peer < world_size:
            raise CodegenError(f"root {event.peer} outside world of {world_size}")
        return f"MPI_Bcast(g_sendbuf, {vols['vol']}, MPI_BYTE, {event.peer}, g_comm[{event.comm}]);"
    if f == "Reduce":
        if not 0 <= event.peer < world_size:
            raise CodegenError(f"root {event.peer} outside world of {world_size}")
        return (f"MPI_Reduce(g_sendbuf, g_recvbuf, {vols['vol']}, MPI_BYTE, MPI_BOR, "
                f"{event.peer}, g_comm[{event.comm}]);")
    if f == "Alltoall":
        return (f"MPI_Alltoall(g_sendbuf, {vols['vol']}, MPI_BYTE, g_recvbuf, {vols['vol']}, "
                f"MPI_BYTE, g_comm[{event.comm}]);")
    if f == "Sendrecv":
        return (f"MPI_Sendrecv(g_sendbuf, {vols['vol']}, MPI_BYTE, {_peer_expr(event.peer)}, {event.tag}, "
                f"g_recvbuf, {vols['rvol']}, MPI_BYTE, {_peer_expr(event.rpeer)}, {event.tag}, "
                f"g_comm[{event.comm}], MPI_STATUS_IGNORE);")
    if f == "Comm_split":
        return f"MPI_Comm_split(g_comm[0], 0, g_rank, &g_comm[{event.comm}]);"
    if f == "Comm_dup":
        return f"MPI_Comm_dup(g_comm[0], &g_comm[{event.comm}]);"
    if f == "Comm_free":
        return f"MPI_Comm_free(&g_comm[{event.comm}]);"
    raise CodegenError(f"no translation for {f}")


def _compute_body(combo: ProxyCombination) -> list[str]:
    # every block runs its full solved count: the calibrated costs include
    # each block's own loop shell, so the emitted metrics follow the
    # solver's linear model term for term
    lines = []
    x = combo.x
    for j in range(len(BLOCK_NAMES)):
        if x[j] > 0:
            lines.append(f"    {BLOCK_NAMES[j]}({x[j]}LL);")
    return lines


def emit_terminal(
    tid: int,
    key: str,
    cfg: CodegenConfig,
    models: dict[str, CommTimeModel] | None = None,
    combo: ProxyCombination | None = None,
) -> str:
    """One C function per terminal; never silently skips an event."""
    models = models or default_models()
    event = parse_event(key)
    lines = [f"static void ev_t{tid}(void)", "{", f"    PROXY_LOG({_c_string('(' + key + ')')});"]
    if isinstance(event, ComputeEvent):
        if combo is None:
            raise CodegenError(f"terminal {tid}: compute terminal lacks a block combination")
        lines.extend(_compute_body(combo))
    else:
        vols = _terminal_volumes(event, models, cfg)
        lines.append("    " + _comm_call(event, vols, cfg.world_size))
    lines.append("}")
    return "\n".join(lines)


def _call_lines(body: Body, indent: str) -> list[str]:
    lines = []
    for sid, exp in body:
        name = f"ev_t{sid}" if sid >= 0 else f"fn_r{nt_id(sid)}"
        if exp == 1:
            lines.append(f"{indent}{name}();")
        else:
            lines.append(f"{indent}for (_i = 0; _i < {exp}LL; _i++) {name}();")
    return lines


def emit_rule(rid: int, body: Body) -> str:
    """One C function per rule; exponents become counted loops."""
    lines = [f"static void fn_r{rid}(void)", "{"]
    if any(exp != 1 for _, exp in body):
        lines.append("    long long _i;")
    lines.extend(_call_lines(body, "    "))
    lines.append("}")
    return "\n".join(lines)


def _guard_condition(ranks: RankList) -> str:
    parts = []
    for lo, hi in ranks.intervals:
        if lo == hi:
            parts.append(f"g_rank == {lo}")
        else:
            parts.append(f"g_rank >= {lo} && g_rank <= {hi}")
    if len(parts) == 1:
        return parts[0]
    return " || ".join(f"({p})" if "&&" in p else p for p in parts)


def emit_main(main: list, world_size: int) -> str:
    """main(): rank-guarded calls; consecutive symbols with identical
    rank lists share one guard, full-range lists need none."""
    lines = [
        "int main(int argc, char **argv)",
        "{",
        "    long long _i;",
        "    (void)_i;",
        "    {",
        "        /* arena fill matching the calibration conditions */",
        "        unsigned _r = 12345u;",
        "        size_t _p;",
        "        for (_p = 0; _p < PROXY_ARENA_BYTES; _p++) {",
        "            _r = _r * 1103515245u + 12345u;",
        "            g_arena[_p] = (unsigned char)(_r >> 16);",
        "        }",
        "    }",
        "    MPI_Init(&argc, &argv);",
        "    g_comm[0] = MPI_COMM_WORLD;",
        "    MPI_Comm_rank(g_comm[0], &g_rank);",
        "    MPI_Comm_size(g_comm[0], &g_size);",
        f"    if (g_size != {world_size}) {{",
        f'        fprintf(stderr, "proxy was generated for {world_size} ranks, got %d\\n", g_size);',
        "        MPI_Abort(g_comm[0], 1);",
        "    }",
        "",
    ]
    idx = 0
    while idx < len(main):
        ranks = main[idx].ranks
        if not ranks:
            raise CodegenError("main symbol with an empty rank list")
        group = [main[idx]]
        idx += 1
        while idx < len(main) and main[idx].ranks == ranks:
            group.append(main[idx])
            idx += 1
        body = [(s.sid, s.exp) for s in group]
        if ranks.is_full(world_size):
            lines.extend(_call_lines(body, "    "))
        else:
            lines.append(f"    if ({_guard_condition(ranks)}) {{")
            lines.extend(_call_lines(body, "        "))
            lines.append("    }")
    lines.extend(["", "    MPI_Finalize();", "    return 0;", "}"])
    return "\n".join(lines)


def _buffer_need(event: CommEvent, vols: dict[str, int], world_size: int) -> int:
    need = 0
    if "vol" in vols:
        need = vols["vol"]
    if "rvol" in vols:
        need = max(need, vols["rvol"])
    if event.func == "Alltoall":
        need = vols["vol"] * world_size
    return need


def generate_program(
    program: MergedProgram,
    combos: dict[int, ProxyCombination],
    cfg: CodegenConfig,
    models: dict[str, CommTimeModel] | None = None,
) -> str:
    """Whole translation unit; byte-identical for identical inputs."""
    models = models or default_models()
    if cfg.world_size != program.world_size:
        raise CodegenError(
            f"config world_size {cfg.world_size} != program world_size {program.world_size}"
        )

    keys = program.table.table.keys()
    events = [parse_event(key) for key in keys]

    max_req = 0
    max_comm = 0
    buf_need = 1
    for tid, event in enumerate(events):
        if isinstance(event, ComputeEvent):
            if tid not in combos:
                raise CodegenError(f"terminal {tid}: compute terminal lacks a block combination")
            continue
        if isinstance(event.req, int):
            max_req = max(max_req, event.req)
        if isinstance(event.comm, int):
            max_comm = max(max_comm, event.comm)
        vols = _terminal_volumes(event, models, cfg)
        buf_need = max(buf_need, _buffer_need(event, vols, cfg.world_size))

    depths = body_depths(program.rules)  # also rejects reference cycles

    sections: list[str] = []
    sections.append("/* Proxy program generated from an event-trace grammar. */")
    sections.append(
        "#ifdef MPI_PROXY_SHIM\n"
        '#include "mpi_proxy_shim.h"\n'
        "#else\n"
        "#include <mpi.h>\n"
        "#endif\n"
        "#include <stddef.h>\n"
        "#include <stdio.h>\n"
        "#include <stdlib.h>"
    )
    sections.append(
        "#ifdef MPI_PROXY_SHIM\n"
        "#define PROXY_LOG(key) mpi_proxy_log(key)\n"
        "#else\n"
        "#define PROXY_LOG(key)\n"
        "#endif"
    )
    sections.append(
        "#define PROXY_ARENA_BYTES 262144\n"
        "static volatile long g_sink;\n"
        "static volatile unsigned g_rand_state = 0x1234567u;\n"
        "static unsigned char g_arena[PROXY_ARENA_BYTES];"
    )
    sections.append("\n\n".join(text for _, text in BLOCK_MACROS))
    sections.append(
        "static int g_rank, g_size;\n"
        f"static unsigned char g_sendbuf[{buf_need}];\n"
        f"static unsigned char g_recvbuf[{buf_need}];\n"
        f"static MPI_Request g_req[{max_req + 1}];\n"
        f"static MPI_Comm g_comm[{max_comm + 1}];"
    )
    for tid, key in enumerate(keys):
        sections.append(emit_terminal(tid, key, cfg, models, combos.get(tid)))
    for rid in sorted(program.rules, key=lambda r: (depths[r], r)):
        sections.append(emit_rule(rid, program.rules[rid]))
    sections.append(emit_main(program.main, cfg.world_size))
    return "\n\n".join(sections) + "\n"


# ---- structural validation (test and report support) ----------------------


def program_functions(source: str) -> list[str]:
    """Names of functions defined in a generated program."""
    names = []
    for line in source.splitlines():
        if line.startswith("static void ") and line.endswith("(void)"):
            names.append(line[len("static void "):-len("(void)")])
        elif line.startswith("int main("):
            names.append("main")
    return names


def validate_structure(source: str, program: MergedProgram) -> None:
    """Brace balance, function count, call-graph acyclicity."""
    if source.count("{") != source.count("}"):
        raise CodegenError("unbalanced braces")
    names = program_functions(source)
    expected = len(program.table.table) + len(program.rules) + 1
    if len(names) != expected:
        raise CodegenError(f"expected {expected} functions, found {len(names)}")
    # call edges among generated functions must follow rule depths
    body_depths(program.rules)
