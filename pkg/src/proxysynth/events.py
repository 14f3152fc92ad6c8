"""Event data model and the line-based on-disk trace format.

A trace is a sequence of communication records (one MPI call each) and
computation records (one hardware-counter vector each), one event per
line, one file per rank.  Only data volumes are stored for messages,
never buffer contents.

Line grammar::

    COMPUTE <ins> <cyc> <lst> <l1dcm> <brcn> <msp>
    <VERB> [vol=<n>] [peer=<+k|-k|r<abs>>] [tag=<n>] [comm=<tok>] [req=<tok>]
    SENDRECV vol=<n> peer=<p> rvol=<n> rpeer=<p> tag=<n> comm=<tok>

``#`` starts a comment line.  Handle tokens (``comm=``, ``req=``) are
opaque strings in raw traces and small pool integers after
canonicalization; ``comm=W`` names the world communicator in raw form.
Peers are absolute (``r5``) in raw traces and signed offsets (``+1``)
after canonicalization; collective roots stay absolute.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

from .errors import TraceParseError, UnsupportedEventError

#: Metric names in fixed vector order.
METRICS = ("INS", "CYC", "LST", "L1_DCM", "BR_CN", "MSP")

#: Supported MPI functions (canonical spelling).
FUNCS = (
    "Send",
    "Recv",
    "Isend",
    "Irecv",
    "Wait",
    "Barrier",
    "Allreduce",
    "Bcast",
    "Reduce",
    "Alltoall",
    "Sendrecv",
    "Comm_split",
    "Comm_dup",
    "Comm_free",
)

_VERB_TO_FUNC = {f.upper(): f for f in FUNCS}

P2P_FUNCS = frozenset({"Send", "Recv", "Isend", "Irecv", "Sendrecv"})
NONBLOCKING_FUNCS = frozenset({"Isend", "Irecv"})
COMPLETION_FUNCS = frozenset({"Wait"})
ROOTED_COLLECTIVES = frozenset({"Bcast", "Reduce"})
VOLUME_FUNCS = frozenset(
    {"Send", "Recv", "Isend", "Irecv", "Sendrecv", "Allreduce", "Bcast", "Reduce", "Alltoall"}
)
COMM_CREATE_FUNCS = frozenset({"Comm_split", "Comm_dup"})
#: Functions whose comm= names an existing communicator.
COMM_USE_FUNCS = frozenset(FUNCS) - COMM_CREATE_FUNCS - {"Wait"}


@dataclass(frozen=True)
class CommEvent:
    """One MPI call: function name plus canonicalized parameters.

    ``peer`` is a signed rank offset once canonical (``peer_abs`` False)
    or an absolute rank before that / for collective roots.  ``rvol`` and
    ``rpeer`` exist only for Sendrecv (receive half).
    """

    func: str
    vol: int | None = None
    peer: int | None = None
    peer_abs: bool = False
    tag: int | None = None
    comm: int | str | None = None
    req: int | str | None = None
    rvol: int | None = None
    rpeer: int | None = None


@dataclass(frozen=True)
class ComputeEvent:
    """Computation span between two communication events: 6 counter deltas."""

    metrics: tuple[int, int, int, int, int, int]


Event = CommEvent | ComputeEvent


@dataclass
class Trace:
    """Ordered event sequence of one rank."""

    rank: int = 0
    events: list[Event] = field(default_factory=list)


class TraceWarning(UserWarning):
    """Recoverable trace irregularity (e.g. adjacent compute spans)."""


def _fmt_peer(peer: int, absolute: bool) -> str:
    if absolute:
        return f"r{peer}"
    return f"+{peer}" if peer >= 0 else str(peer)


def serialize_event(e: Event) -> str:
    """Render one event as its canonical trace line."""
    if isinstance(e, ComputeEvent):
        return "COMPUTE " + " ".join(str(m) for m in e.metrics)
    parts = [e.func.upper()]
    if e.vol is not None:
        parts.append(f"vol={e.vol}")
    if e.peer is not None:
        parts.append(f"peer={_fmt_peer(e.peer, e.peer_abs)}")
    if e.rvol is not None:
        parts.append(f"rvol={e.rvol}")
    if e.rpeer is not None:
        parts.append(f"rpeer={_fmt_peer(e.rpeer, e.peer_abs)}")
    if e.tag is not None:
        parts.append(f"tag={e.tag}")
    if e.comm is not None:
        parts.append(f"comm={e.comm}")
    if e.req is not None:
        parts.append(f"req={e.req}")
    return " ".join(parts)


def serialize_trace(trace: Trace) -> str:
    """Inverse of :func:`parse_trace`; one line per event, trailing newline."""
    lines = [serialize_event(e) for e in trace.events]
    lines.append("")
    return "\n".join(lines)


def _parse_int(lineno: int, name: str, text: str, minimum: int | None = None) -> int:
    try:
        value = int(text)
    except ValueError:
        raise TraceParseError(lineno, f"{name} is not an integer: {text!r}") from None
    if minimum is not None and value < minimum:
        raise TraceParseError(lineno, f"{name} must be >= {minimum}, got {value}")
    return value


def _parse_peer(lineno: int, text: str) -> tuple[int, bool]:
    if text.startswith("r"):
        return _parse_int(lineno, "peer", text[1:], minimum=0), True
    if text.startswith(("+", "-")):
        return _parse_int(lineno, "peer", text), False
    raise TraceParseError(lineno, f"peer must be +k, -k or r<abs>: {text!r}")


def _parse_handle(text: str) -> int | str:
    # Canonical traces carry small decimal ints; raw traces carry opaque tokens.
    if text.isdigit():
        return int(text)
    return text


def _check_metrics(lineno: int, m: tuple[int, ...]) -> None:
    ins, _cyc, lst, l1, br, msp = m
    if ins < br:
        raise TraceParseError(lineno, f"INS ({ins}) < BR_CN ({br})")
    if br < msp:
        raise TraceParseError(lineno, f"BR_CN ({br}) < MSP ({msp})")
    if lst < l1:
        raise TraceParseError(lineno, f"LST ({lst}) < L1_DCM ({l1})")


def parse_event(line: str, lineno: int = 1) -> Event:
    """Parse one trace line into an event; raises TraceParseError."""
    parts = line.split()
    verb = parts[0]
    if verb == "COMPUTE":
        if len(parts) != 7:
            raise TraceParseError(lineno, f"COMPUTE needs 6 metrics, got {len(parts) - 1}")
        m = tuple(_parse_int(lineno, name, p, minimum=0) for name, p in zip(METRICS, parts[1:]))
        _check_metrics(lineno, m)
        return ComputeEvent(m)

    func = _VERB_TO_FUNC.get(verb)
    if func is None:
        raise UnsupportedEventError(lineno, f"unsupported event: {verb}")

    fields: dict[str, str] = {}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep or not value:
            raise TraceParseError(lineno, f"expected key=value, got {part!r}")
        if key in fields:
            raise TraceParseError(lineno, f"duplicate field {key}")
        fields[key] = value

    vol = peer = tag = rvol = rpeer = None
    peer_abs = False
    comm = req = None

    if "vol" in fields:
        vol = _parse_int(lineno, "vol", fields.pop("vol"), minimum=0)
    have_peer = "peer" in fields
    if have_peer:
        peer, peer_abs = _parse_peer(lineno, fields.pop("peer"))
    if "rvol" in fields:
        rvol = _parse_int(lineno, "rvol", fields.pop("rvol"), minimum=0)
    if "rpeer" in fields:
        rpeer, rpeer_abs = _parse_peer(lineno, fields.pop("rpeer"))
        if have_peer and rpeer_abs != peer_abs:
            raise TraceParseError(lineno, "peer and rpeer must share encoding")
        peer_abs = peer_abs if have_peer else rpeer_abs
    if "tag" in fields:
        tag = _parse_int(lineno, "tag", fields.pop("tag"), minimum=0)
    if "comm" in fields:
        comm = _parse_handle(fields.pop("comm"))
    if "req" in fields:
        req = _parse_handle(fields.pop("req"))
    if fields:
        raise TraceParseError(lineno, f"unknown fields: {sorted(fields)}")

    e = CommEvent(func, vol, peer, peer_abs, tag, comm, req, rvol, rpeer)
    _check_event(lineno, e)
    return e


def _require(lineno: int, cond: bool, message: str) -> None:
    if not cond:
        raise TraceParseError(lineno, message)


def _check_event(lineno: int, e: CommEvent) -> None:
    f = e.func
    needs_req = f in NONBLOCKING_FUNCS or f in COMPLETION_FUNCS
    _require(lineno, (e.req is not None) == needs_req,
             f"{f}: req must be {'present' if needs_req else 'absent'}")
    _require(lineno, (e.vol is not None) == (f in VOLUME_FUNCS),
             f"{f}: vol must be {'present' if f in VOLUME_FUNCS else 'absent'}")
    if f in P2P_FUNCS:
        _require(lineno, e.peer is not None, f"{f}: peer required")
        _require(lineno, e.tag is not None, f"{f}: tag required")
    elif f in ROOTED_COLLECTIVES:
        _require(lineno, e.peer is not None and e.peer_abs, f"{f}: absolute root required")
        _require(lineno, e.tag is None, f"{f}: tag must be absent")
    else:
        _require(lineno, e.peer is None, f"{f}: peer must be absent")
        _require(lineno, e.tag is None, f"{f}: tag must be absent")
    if f == "Sendrecv":
        _require(lineno, e.rvol is not None and e.rpeer is not None,
                 "Sendrecv: rvol and rpeer required")
    else:
        _require(lineno, e.rvol is None and e.rpeer is None,
                 f"{f}: rvol/rpeer only valid for Sendrecv")
    if f == "Wait":
        _require(lineno, e.comm is None, "Wait: comm must be absent")
    else:
        _require(lineno, e.comm is not None, f"{f}: comm required")


def _merge_computes(a: ComputeEvent, b: ComputeEvent) -> ComputeEvent:
    return ComputeEvent(tuple(x + y for x, y in zip(a.metrics, b.metrics)))


def parse_trace(data: bytes | str | io.IOBase, rank: int = 0) -> Trace:
    """Parse a trace file body; malformed input fails with a line number.

    Adjacent compute spans cannot occur by construction but malformed
    input may contain them; they are merged by metric addition with a
    warning.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    elif isinstance(data, str):
        text = data
    else:
        raw = data.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    events: list[Event] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        e = parse_event(stripped, lineno)
        if (
            isinstance(e, ComputeEvent)
            and events
            and isinstance(events[-1], ComputeEvent)
        ):
            warnings.warn(
                f"line {lineno}: adjacent compute events merged", TraceWarning, stacklevel=2
            )
            events[-1] = _merge_computes(events[-1], e)
        else:
            events.append(e)
    return Trace(rank=rank, events=events)


def validate_trace(trace: Trace) -> None:
    """Re-check model invariants on an in-memory trace."""
    prev_compute = False
    for i, e in enumerate(trace.events):
        if isinstance(e, ComputeEvent):
            if prev_compute:
                raise TraceParseError(i + 1, "adjacent compute events")
            if any(m < 0 for m in e.metrics):
                raise TraceParseError(i + 1, "negative metric")
            _check_metrics(i + 1, e.metrics)
            prev_compute = True
        else:
            _check_event(i + 1, e)
            prev_compute = False
