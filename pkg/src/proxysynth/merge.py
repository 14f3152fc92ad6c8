"""Cross-rank merging of terminal tables and grammars.

SPMD programs produce one trace per rank with heavy duplication between
ranks.  Merging proceeds in three stages: pairwise tree reduction of
terminal tables into one global table, depth-ordered deduplication of
identical rules, and grouping of per-rank main rules by edit distance
followed by longest-common-subsequence merging with rank lists.  The
merged program reproduces every rank's id sequence exactly when its main
rule is filtered by rank and expanded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .canonical import TerminalTable
from .grammar import Body, Grammar, body_depths, expand_bodies, nt_id, nt_sid


class RankList:
    """Sorted set of rank ids stored as disjoint inclusive intervals."""

    __slots__ = ("_ivs",)

    def __init__(self, intervals=()):
        self._ivs = self._normalize(intervals)

    @staticmethod
    def _normalize(intervals) -> tuple[tuple[int, int], ...]:
        ivs = sorted((int(lo), int(hi)) for lo, hi in intervals)
        out: list[tuple[int, int]] = []
        for lo, hi in ivs:
            if hi < lo:
                raise ValueError(f"bad interval {lo}-{hi}")
            if out and lo <= out[-1][1] + 1:
                out[-1] = (out[-1][0], max(out[-1][1], hi))
            else:
                out.append((lo, hi))
        return tuple(out)

    @classmethod
    def of(cls, *ranks: int) -> "RankList":
        return cls((r, r) for r in ranks)

    @classmethod
    def full(cls, world_size: int) -> "RankList":
        return cls(((0, world_size - 1),))

    @property
    def intervals(self) -> tuple[tuple[int, int], ...]:
        return self._ivs

    def union(self, other: "RankList") -> "RankList":
        return RankList(self._ivs + other._ivs)

    def __contains__(self, rank: int) -> bool:
        return any(lo <= rank <= hi for lo, hi in self._ivs)

    def __iter__(self):
        for lo, hi in self._ivs:
            yield from range(lo, hi + 1)

    def __len__(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self._ivs)

    def __bool__(self) -> bool:
        return bool(self._ivs)

    def __eq__(self, other) -> bool:
        return isinstance(other, RankList) and self._ivs == other._ivs

    def __hash__(self) -> int:
        return hash(self._ivs)

    def is_full(self, world_size: int) -> bool:
        return self._ivs == ((0, world_size - 1),)

    def format(self) -> str:
        parts = [f"{lo}-{hi}" if hi > lo else f"{lo}" for lo, hi in self._ivs]
        return "{" + ",".join(parts) + "}"

    @classmethod
    def parse(cls, text: str) -> "RankList":
        if not (text.startswith("{") and text.endswith("}")):
            raise ValueError(f"bad rank list {text!r}")
        body = text[1:-1]
        ivs = []
        if body:
            for part in body.split(","):
                lo, sep, hi = part.partition("-")
                ivs.append((int(lo), int(hi) if sep else int(lo)))
        return cls(ivs)

    def __repr__(self) -> str:
        return f"RankList{self.format()}"


class MSym(NamedTuple):
    """Main-rule symbol: id, run-length exponent, executing ranks."""

    sid: int
    exp: int
    ranks: RankList


@dataclass
class GlobalTable:
    """Merged terminal table plus per-rank local-to-global id remaps."""

    table: TerminalTable
    remaps: list[list[int]]


@dataclass
class MergedProgram:
    """One grammar for all ranks; main-rule symbols carry rank lists."""

    table: GlobalTable
    rules: dict[int, Body]
    main: list[MSym]
    world_size: int


def merge_terminal_tables(tables: list[TerminalTable]) -> GlobalTable:
    """Pairwise tree reduction of terminal tables.

    Global ids follow first appearance scanning ranks upward, which is
    what ordered pairwise unions produce when leaves sit in rank order.
    """
    if not tables:
        raise ValueError("need at least one table")
    level: list[list[str]] = [t.keys() for t in tables]
    while len(level) > 1:
        nxt: list[list[str]] = []
        for i in range(0, len(level) - 1, 2):
            left, right = level[i], level[i + 1]
            seen = set(left)
            merged = list(left)
            for key in right:
                if key not in seen:
                    seen.add(key)
                    merged.append(key)
            nxt.append(merged)
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt

    table = TerminalTable()
    for key in level[0]:
        table.intern(key)
    remaps = [[table.id_for(key) for key in t.keys()] for t in tables]
    return GlobalTable(table=table, remaps=remaps)


def _remap_body(body: Body, term_remap: list[int], rule_remap: dict[int, int]) -> Body:
    out: list[tuple[int, int]] = []
    for sid, exp in body:
        if sid >= 0:
            out.append((term_remap[sid], exp))
        else:
            out.append((nt_sid(rule_remap[nt_id(sid)]), exp))
    return out


def merge_nonterminals(
    per_rank: list[tuple[Body, dict[int, Body]]], global_table: GlobalTable
) -> tuple[dict[int, Body], list[Body]]:
    """Merge identical rules across ranks, shallow depths first.

    Two rules merge exactly when their fully remapped bodies agree
    symbol-by-symbol (ids and exponents); identical depth is implied.
    Returns the global rule set and the remapped per-rank main bodies.
    """
    global_rules: dict[int, Body] = {}
    by_key: dict[tuple, int] = {}
    mains: list[Body] = []

    rank_depths = [body_depths(bodies) for _, bodies in per_rank]
    max_depth = max((max(d.values(), default=0) for d in rank_depths), default=0)

    rule_remaps: list[dict[int, int]] = [dict() for _ in per_rank]
    for depth in range(1, max_depth + 1):
        for rank, (_, bodies) in enumerate(per_rank):
            depths = rank_depths[rank]
            for rid in sorted(bodies):
                if depths[rid] != depth:
                    continue
                body = _remap_body(
                    bodies[rid], global_table.remaps[rank], rule_remaps[rank]
                )
                key = tuple(body)
                gid = by_key.get(key)
                if gid is None:
                    gid = len(global_rules)
                    by_key[key] = gid
                    global_rules[gid] = body
                rule_remaps[rank][rid] = gid

    for rank, (main, _) in enumerate(per_rank):
        mains.append(_remap_body(main, global_table.remaps[rank], rule_remaps[rank]))
    return global_rules, mains


def _levenshtein(a: list, b: list) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        append = cur.append
        for j, y in enumerate(b):
            append(min(prev[j] + (x != y), prev[j + 1] + 1, cur[-1] + 1))
        prev = cur
    return prev[-1]


def edit_distance(a: Body, b: Body) -> float:
    """Normalized edit distance over (id, exponent) tokens, in [0, 1]."""
    denom = max(len(a), len(b))
    if denom == 0:
        return 0.0
    return _levenshtein(a, b) / denom


def cluster_main_rules(mains: list[Body], similarity_threshold: float) -> list[list[int]]:
    """Greedy agglomeration: join the first group whose founding exemplar
    is within 1 - similarity of the rule, else found a new group."""
    if not 0.0 <= similarity_threshold <= 1.0:
        raise ValueError("similarity threshold must be in [0, 1]")
    bound = 1.0 - similarity_threshold
    groups: list[list[int]] = []
    exemplars: list[Body] = []
    for rank, main in enumerate(mains):
        gi = None
        for i, ex in enumerate(exemplars):
            if edit_distance(ex, main) <= bound:
                gi = i
                break
        if gi is None:
            gi = len(groups)
            groups.append([])
            exemplars.append(main)
        groups[gi].append(rank)
    return groups


def _lcs_last_row(a: list[int], b: list[int]) -> list[int]:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        append = cur.append
        for j, y in enumerate(b):
            append(prev[j] + 1 if x == y else max(cur[-1], prev[j + 1]))
        prev = cur
    return prev


def _lcs_pairs(a: list[int], b: list[int], ao: int, bo: int, out: list[tuple[int, int]]):
    # Hirschberg split: linear space, quadratic time
    if not a or not b:
        return
    if len(a) == 1:
        x = a[0]
        for j, y in enumerate(b):
            if y == x:
                out.append((ao, bo + j))
                return
        return
    mid = len(a) // 2
    left = _lcs_last_row(a[:mid], b)
    right = _lcs_last_row(a[mid:][::-1], b[::-1])
    best, split = -1, 0
    nb = len(b)
    for i in range(nb + 1):
        v = left[i] + right[nb - i]
        if v > best:
            best, split = v, i
    _lcs_pairs(a[:mid], b[:split], ao, bo, out)
    _lcs_pairs(a[mid:], b[split:], ao + mid, bo + split, out)


def lcs_merge_mains(a: list[MSym], b: list[MSym]) -> list[MSym]:
    """Merge two main rules along their longest common subsequence.

    Symbols compare equal on (id, exponent).  Matched symbols appear once
    with unioned rank lists; unmatched symbols keep their original order
    inside each gap, a's residues before b's.
    """
    ta = [(s.sid, s.exp) for s in a]
    tb = [(s.sid, s.exp) for s in b]
    if ta == tb:
        return [MSym(x.sid, x.exp, x.ranks.union(y.ranks)) for x, y in zip(a, b)]
    # token hashing: compare small ints inside the quadratic core
    codes: dict[tuple[int, int], int] = {}
    ca = [codes.setdefault(t, len(codes)) for t in ta]
    cb = [codes.setdefault(t, len(codes)) for t in tb]
    pairs: list[tuple[int, int]] = []
    _lcs_pairs(ca, cb, 0, 0, pairs)

    out: list[MSym] = []
    ai = bi = 0
    for i, j in pairs:
        out.extend(a[ai:i])
        out.extend(b[bi:j])
        out.append(MSym(a[i].sid, a[i].exp, a[i].ranks.union(b[j].ranks)))
        ai, bi = i + 1, j + 1
    out.extend(a[ai:])
    out.extend(b[bi:])
    return out


def merge_program(
    per_rank: list[tuple[TerminalTable, Grammar]],
    similarity_threshold: float = 0.9,
) -> MergedProgram:
    """Compose the three merge stages over dense ranks 0..P-1."""
    return merge_program_parts(
        [(t, g.main_body(), g.rule_bodies()) for t, g in per_rank],
        similarity_threshold,
    )


def merge_program_parts(
    per_rank: list[tuple[TerminalTable, Body, dict[int, Body]]],
    similarity_threshold: float = 0.9,
) -> MergedProgram:
    """merge_program over already-extracted rule bodies (e.g. from dumps)."""
    tables = [t for t, _, _ in per_rank]
    global_table = merge_terminal_tables(tables)
    bodies = [(main, rules) for _, main, rules in per_rank]
    global_rules, mains = merge_nonterminals(bodies, global_table)

    groups = cluster_main_rules(mains, similarity_threshold)
    merged_main: list[MSym] = []
    for group in groups:
        acc = [MSym(sid, exp, RankList.of(group[0])) for sid, exp in mains[group[0]]]
        for rank in group[1:]:
            nxt = [MSym(sid, exp, RankList.of(rank)) for sid, exp in mains[rank]]
            acc = lcs_merge_mains(acc, nxt)
        merged_main.extend(acc)

    return MergedProgram(
        table=global_table,
        rules=global_rules,
        main=merged_main,
        world_size=len(per_rank),
    )


def filter_main(program: MergedProgram, rank: int) -> Body:
    """Symbols of the merged main executed by one rank."""
    return [(s.sid, s.exp) for s in program.main if rank in s.ranks]


def expand_for_rank(program: MergedProgram, rank: int) -> list[int]:
    """Global-id sequence of one rank, recovered from the merged program."""
    return expand_bodies(filter_main(program, rank), program.rules)


def verify_round_trip(program: MergedProgram, sequences: list[list[int]]) -> bool:
    """True when every rank's global-id sequence is reproduced exactly."""
    for rank, seq in enumerate(sequences):
        remap = program.table.remaps[rank]
        if expand_for_rank(program, rank) != [remap[t] for t in seq]:
            return False
    return True
