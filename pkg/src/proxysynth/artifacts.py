"""Text dump formats for grammars and merged programs.

One rule per line, main rule first::

    # proxysynth grammar dump
    # rank=0
    T0 = ISEND vol=1024 peer=+1 tag=0 comm=0 req=0
    S -> R0^100
    R0 -> T0 T1^2

``T<k>`` lines bind terminal ids to their canonical event keys; rule
lines reference terminals as ``T<k>`` and rules as ``R<k>``, with an
optional ``^<exp>`` run-length suffix and, in merged main rules, an
``@{ranklist}`` suffix.  Rules are ordered by first-creation index, so
dumps are deterministic.  The merged dump is the compressed-size
measurement artifact for a run.
"""

from __future__ import annotations

from .canonical import TerminalTable
from .errors import ProxySynthError
from .grammar import Body, Grammar, nt_id, nt_sid
from .merge import GlobalTable, MergedProgram, MSym, RankList


class DumpFormatError(ProxySynthError):
    """Dump file does not follow the grammar dump format."""


def _format_symbol(sid: int, exp: int, ranks: RankList | None = None) -> str:
    text = f"T{sid}" if sid >= 0 else f"R{nt_id(sid)}"
    if exp != 1:
        text += f"^{exp}"
    if ranks is not None:
        text += f"@{ranks.format()}"
    return text


def _parse_symbol(token: str, lineno: int) -> tuple[int, int, RankList | None]:
    ranks = None
    if "@" in token:
        token, _, rtext = token.partition("@")
        try:
            ranks = RankList.parse(rtext)
        except ValueError as exc:
            raise DumpFormatError(f"line {lineno}: {exc}") from None
    exp = 1
    if "^" in token:
        token, _, etext = token.partition("^")
        try:
            exp = int(etext)
        except ValueError:
            raise DumpFormatError(f"line {lineno}: bad exponent {etext!r}") from None
        if exp < 1:
            raise DumpFormatError(f"line {lineno}: exponent must be >= 1")
    try:
        if token.startswith("T"):
            sid = int(token[1:])
            if sid < 0:
                raise ValueError
        elif token.startswith("R"):
            sid = nt_sid(int(token[1:]))
        else:
            raise ValueError
    except ValueError:
        raise DumpFormatError(f"line {lineno}: bad symbol {token!r}") from None
    return sid, exp, ranks


def _format_rule(head: str, body, with_ranks: bool) -> str:
    if with_ranks:
        symbols = [_format_symbol(s.sid, s.exp, s.ranks) for s in body]
    else:
        symbols = [_format_symbol(sid, exp) for sid, exp in body]
    return f"{head} -> {' '.join(symbols)}"


def write_rank_dump(table: TerminalTable, grammar: Grammar, rank: int) -> str:
    """Per-rank dump: terminal table plus the rank's grammar."""
    lines = ["# proxysynth grammar dump", f"# rank={rank}"]
    for tid, key in enumerate(table.keys()):
        lines.append(f"T{tid} = {key}")
    lines.append(_format_rule("S", grammar.main_body(), with_ranks=False))
    for rid, body in grammar.rule_bodies().items():
        lines.append(_format_rule(f"R{rid}", body, with_ranks=False))
    lines.append("")
    return "\n".join(lines)


def write_merged_dump(program: MergedProgram) -> str:
    """Merged-program dump; main symbols carry rank lists."""
    lines = ["# proxysynth merged program", f"# world_size={program.world_size}"]
    for tid, key in enumerate(program.table.table.keys()):
        lines.append(f"T{tid} = {key}")
    lines.append(_format_rule("S", program.main, with_ranks=True))
    for rid in sorted(program.rules):
        lines.append(_format_rule(f"R{rid}", program.rules[rid], with_ranks=False))
    lines.append("")
    return "\n".join(lines)


def _parse_dump(text: str):
    header: dict[str, str] = {}
    table = TerminalTable()
    main_plain: Body | None = None
    main_ranked: list[MSym] | None = None
    rules: dict[int, Body] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            if sep:
                header[key.strip()] = value.strip()
            continue
        tokens = line.split(None, 2)
        if (
            len(tokens) >= 2
            and tokens[0].startswith("T")
            and tokens[0][1:].isdigit()
            and tokens[1] == "="
        ):
            # terminal binding line: "T<k> = <key>"
            tid = int(tokens[0][1:])
            if tid != len(table):
                raise DumpFormatError(f"line {lineno}: terminal ids must be dense")
            if len(tokens) < 3 or not tokens[2].strip():
                raise DumpFormatError(f"line {lineno}: empty terminal key")
            table.intern(tokens[2].strip())
            continue
        head, sep, body = line.partition("->")
        if not sep:
            raise DumpFormatError(f"line {lineno}: expected a rule or terminal line")
        head = head.strip()
        symbols = [_parse_symbol(tok, lineno) for tok in body.split()]
        if head == "S":
            if main_plain is not None or main_ranked is not None:
                raise DumpFormatError(f"line {lineno}: duplicate main rule")
            if any(r is not None for _, _, r in symbols):
                main_ranked = []
                for sid, exp, ranks in symbols:
                    if ranks is None:
                        raise DumpFormatError(
                            f"line {lineno}: merged main symbols all need rank lists"
                        )
                    main_ranked.append(MSym(sid, exp, ranks))
            else:
                main_plain = [(sid, exp) for sid, exp, _ in symbols]
        elif head.startswith("R") and head[1:].isdigit():
            rid = int(head[1:])
            if rid in rules:
                raise DumpFormatError(f"line {lineno}: duplicate rule R{rid}")
            if any(r is not None for _, _, r in symbols):
                raise DumpFormatError(f"line {lineno}: rank lists only belong in main")
            rules[rid] = [(sid, exp) for sid, exp, _ in symbols]
        else:
            raise DumpFormatError(f"line {lineno}: bad rule head {head!r}")

    if main_plain is None and main_ranked is None:
        # an empty trace compresses to an empty main rule
        main_plain = []
    return header, table, main_plain, main_ranked, rules


def read_rank_dump(text: str) -> tuple[int, TerminalTable, Body, dict[int, Body]]:
    header, table, main_plain, main_ranked, rules = _parse_dump(text)
    if main_ranked is not None:
        raise DumpFormatError("rank dump must not carry rank lists")
    rank = int(header.get("rank", "0"))
    return rank, table, main_plain, rules


def read_merged_dump(text: str) -> MergedProgram:
    header, table, main_plain, main_ranked, rules = _parse_dump(text)
    if "world_size" not in header:
        raise DumpFormatError("merged dump needs a world_size header")
    world_size = int(header["world_size"])
    if main_ranked is None:
        if main_plain:
            raise DumpFormatError("merged main symbols all need rank lists")
        main_ranked = []
    return MergedProgram(
        table=GlobalTable(table=table, remaps=[]),
        rules=rules,
        main=main_ranked,
        world_size=world_size,
    )
