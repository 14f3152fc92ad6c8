"""Online grammar construction over terminal-id sequences.

Appending symbols one at a time maintains a context-free grammar whose
expansion is exactly the appended sequence, enforcing three constraints:

1. digram uniqueness — an adjacent symbol pair occurs at most once over
   all rule bodies (pairs are compared including run-length exponents;
   occurrences that differ only in exponent stay raw),
2. rule utility — every non-main rule is used at least twice, counting
   a reference with exponent k as k uses,
3. run-length folding — adjacent equal symbols a^i a^j collapse into
   a^{i+j} (can be disabled to study the unoptimized behavior).

Terminal ids are non-negative; rule references are encoded as negative
symbol ids internally.  Work per append is amortized constant.
"""

from __future__ import annotations

from .errors import MalformedGrammarError

#: Plain body form: list of (sid, exp) with sid >= 0 terminal, < 0 rule ref.
Body = list[tuple[int, int]]


def nt_sid(rule_id: int) -> int:
    """Symbol id of a rule reference."""
    return -1 - rule_id


def nt_id(sid: int) -> int:
    """Rule id referenced by a negative symbol id."""
    return -1 - sid


class _Node:
    __slots__ = ("sid", "exp", "prev", "next", "rule")

    def __init__(self, sid, exp):
        self.sid = sid
        self.exp = exp
        self.prev = None
        self.next = None
        self.rule = None  # back-reference, guard nodes only


class _Rule:
    __slots__ = ("rid", "guard")

    def __init__(self, rid):
        self.rid = rid  # None marks the main rule
        g = _Node(None, 0)
        g.prev = g
        g.next = g
        g.rule = self
        self.guard = g

    def body(self) -> Body:
        out = []
        node = self.guard.next
        while node.sid is not None:
            out.append((node.sid, node.exp))
            node = node.next
        return out


class Grammar:
    """Single-writer incremental grammar over one id sequence."""

    def __init__(self, run_length: bool = True):
        self.run_length = run_length
        self._main = _Rule(None)
        self._rules: dict[int, _Rule] = {}
        self._digrams: dict[tuple, _Node] = {}
        self._mult: dict[int, int] = {}  # rule id -> sum of reference exponents
        self._next_rid = 0
        self._appended = 0

    # -- construction ---------------------------------------------------

    def append(self, tid: int) -> None:
        """Extend the represented sequence by one terminal."""
        if tid < 0:
            raise ValueError("terminal ids must be non-negative")
        self._appended += 1
        guard = self._main.guard
        last = guard.prev
        if self.run_length and last is not guard and last.sid == tid:
            # constraint 3 fast path; the (prev,last) digram is re-keyed
            # because last's exponent changes
            p = last.prev
            if p.sid is not None:
                self._forget(p)
            last.exp += 1
            if p.sid is not None:
                self._check(p)
            return
        node = _Node(tid, 1)
        self._insert_after(last, node)
        if last.sid is not None:
            self._check(last)

    def extend(self, tids) -> None:
        append = self.append
        for tid in tids:
            append(tid)

    # -- linked-list primitives ------------------------------------------

    def _insert_after(self, pos, node):
        nxt = pos.next
        pos.next = node
        node.prev = pos
        node.next = nxt
        nxt.prev = node
        if node.sid is not None and node.sid < 0:
            self._mult[nt_id(node.sid)] = self._mult.get(nt_id(node.sid), 0) + node.exp

    def _unlink(self, node):
        p, n = node.prev, node.next
        if p.sid is not None:
            self._forget(p)
        if n.sid is not None:
            self._forget(node)
        p.next = n
        n.prev = p
        node.prev = node.next = None
        if node.sid < 0:
            self._mult[nt_id(node.sid)] -= node.exp
        if not self.run_length:
            # triple fix: when a digram of a run of equals dies, its
            # surviving overlapping twin takes over the index slot
            if (
                p.sid is not None
                and p.prev.sid == p.sid
                and p.prev.exp == p.exp
                and p.sid == node.sid
                and p.exp == node.exp
            ):
                self._digrams.setdefault((p.sid, p.exp, p.sid, p.exp), p.prev)
            if (
                n.sid is not None
                and n.next.sid == n.sid
                and n.next.exp == n.exp
                and n.sid == node.sid
                and n.exp == node.exp
            ):
                self._digrams.setdefault((n.sid, n.exp, n.sid, n.exp), n)

    def _forget(self, first):
        second = first.next
        if first.sid is None or second.sid is None:
            return
        key = (first.sid, first.exp, second.sid, second.exp)
        if self._digrams.get(key) is first:
            del self._digrams[key]

    # -- constraint enforcement -------------------------------------------

    def _check(self, first):
        """Enforce all constraints on the digram starting at `first`."""
        while True:
            if first.prev is None:  # node died in a cascade
                return
            second = first.next
            if first.sid is None or second.sid is None:
                return
            if self.run_length and first.sid == second.sid:
                first = self._fold(first)
                continue
            key = (first.sid, first.exp, second.sid, second.exp)
            m = self._digrams.get(key)
            if m is None:
                self._digrams[key] = first
                return
            if m is first:
                return
            if m.next is first or first.next is m:  # overlapping occurrence
                return
            self._process_match(first, m)
            return

    def _fold(self, first):
        """Merge first.next into first (equal sids); returns first."""
        second = first.next
        p = first.prev
        if p.sid is not None:
            self._forget(p)
        self._forget(first)
        self._forget(second)
        first.exp += second.exp
        n2 = second.next
        first.next = n2
        n2.prev = first
        second.prev = second.next = None
        # reference count is unchanged: second's exponent moved into first
        if p.sid is not None:
            self._check(p)
        return first

    def _full_body_rule(self, first):
        """Rule whose entire body is the digram at `first`, if any."""
        second = first.next
        if first.prev.sid is None and second.next is first.prev:
            rule = first.prev.rule
            if rule.rid is not None:
                return rule
        return None

    def _process_match(self, novel, indexed):
        rule = self._full_body_rule(indexed)
        if rule is None:
            rule = self._full_body_rule(novel)
            if rule is not None:
                novel = indexed  # replace the raw side, keep the body
        if rule is not None:
            self._substitute(novel, rule)
            self._ensure_indexed(rule.guard.next)
            return
        # create a fresh rule from the digram content
        rid = self._next_rid
        self._next_rid += 1
        rule = _Rule(rid)
        self._rules[rid] = rule
        self._mult[rid] = 0
        b1 = _Node(novel.sid, novel.exp)
        b2 = _Node(novel.next.sid, novel.next.exp)
        self._insert_after(rule.guard, b1)
        self._insert_after(b1, b2)
        self._substitute(indexed, rule)
        self._substitute(novel, rule)
        self._ensure_indexed(b1)

    def _substitute(self, first, rule):
        """Replace the digram at `first` with a reference to `rule`."""
        second = first.next
        content = (first.sid, second.sid)
        pos = first.prev
        self._unlink(first)
        self._unlink(second)
        ref = _Node(nt_sid(rule.rid), 1)
        self._insert_after(pos, ref)
        if pos.sid is not None:
            self._check(pos)
        if ref.prev is not None:
            self._check(ref)
        # rule-utility enforcement on the replaced content; the surviving
        # single reference normally sits in the replacement rule's body
        for sid in content:
            if sid < 0 and self._mult.get(nt_id(sid), 0) == 1:
                self._inline_single(nt_id(sid), hint=rule)

    def _ensure_indexed(self, b1):
        """Index a rule's body digram, resolving duplicates that appeared
        while seams were being enforced."""
        while True:
            if b1.prev is None:
                return
            b2 = b1.next
            if b1.sid is None or b2.sid is None:
                return
            key = (b1.sid, b1.exp, b2.sid, b2.exp)
            m = self._digrams.get(key)
            if m is None:
                self._digrams[key] = b1
                return
            if m is b1:
                return
            rule = self._full_body_rule(b1)
            if rule is None or self._full_body_rule(m) is not None:
                return  # keep the existing entry
            if m.next is b1 or m is b2:
                return
            self._substitute(m, rule)

    def _find_ref(self, sid, hint=None):
        if hint is not None:
            node = hint.guard.next
            while node.sid is not None:
                if node.sid == sid:
                    return node
                node = node.next
        for rule in self._rules.values():
            node = rule.guard.next
            while node.sid is not None:
                if node.sid == sid:
                    return node
                node = node.next
        node = self._main.guard.next
        while node.sid is not None:
            if node.sid == sid:
                return node
            node = node.next
        return None

    def _inline_single(self, rid, hint=None):
        """Inline a rule whose total use count fell to one."""
        site = self._find_ref(nt_sid(rid), hint)
        if site is None or site.exp != 1:
            return
        rule = self._rules.pop(rid)
        pos = site.prev
        self._unlink(site)
        del self._mult[rid]
        g = rule.guard
        first_body, last_body = g.next, g.prev
        nxt = pos.next
        # splice body nodes in place; interior digram index entries remain
        # valid because nodes move rather than copy
        pos.next = first_body
        first_body.prev = pos
        last_body.next = nxt
        nxt.prev = last_body
        g.prev = g.next = g
        if pos.sid is not None:
            self._check(pos)
        if last_body.prev is not None and last_body.sid is not None:
            self._check(last_body)

    # -- read-out -----------------------------------------------------------

    def main_body(self) -> Body:
        return self._main.body()

    def rule_bodies(self) -> dict[int, Body]:
        return {rid: rule.body() for rid, rule in sorted(self._rules.items())}

    def size(self) -> int:
        """Total symbol count over all rule bodies including main."""
        total = len(self.main_body())
        for rule in self._rules.values():
            total += len(rule.body())
        return total

    def rule_depth(self, rid: int) -> int:
        """Derivation-tree height of a rule; terminals sit at depth 0."""
        bodies = self.rule_bodies()
        if rid not in bodies:
            raise MalformedGrammarError(f"unknown rule {rid}")
        return body_depths(bodies)[rid]

    def main_depth(self) -> int:
        bodies = self.rule_bodies()
        depths = body_depths(bodies)
        return 1 + max(
            (depths[nt_id(sid)] if sid < 0 else 0 for sid, _ in self.main_body()),
            default=-1,
        )

    def expand(self) -> list[int]:
        """Reproduce the exact appended sequence."""
        return expand_bodies(self.main_body(), self.rule_bodies())

    @property
    def appended(self) -> int:
        return self._appended

    # -- invariant audit (test support) --------------------------------------

    def check_invariants(self) -> None:
        occurrences: dict[tuple, list[_Node]] = {}
        all_rules = [self._main] + list(self._rules.values())
        for rule in all_rules:
            node = rule.guard.next
            while node.sid is not None:
                if node.exp < 1:
                    raise AssertionError("exponent < 1")
                nxt = node.next
                if nxt.sid is not None:
                    if self.run_length and node.sid == nxt.sid:
                        raise AssertionError("adjacent equal symbols survived")
                    key = (node.sid, node.exp, nxt.sid, nxt.exp)
                    occurrences.setdefault(key, []).append(node)
                node = nxt
        for key, occ in occurrences.items():
            if len(occ) == 1:
                continue
            if self.run_length:
                raise AssertionError(f"digram {key} occurs {len(occ)} times")
            for a in occ:
                for b in occ:
                    if a is not b and a.next is not b and b.next is not a:
                        raise AssertionError(f"non-overlapping duplicate digram {key}")
        for key, node in self._digrams.items():
            if node.prev is None or node.next is None:
                raise AssertionError("index entry points at a dead node")
            if node.sid is None or node.next.sid is None:
                raise AssertionError("index entry points at a guard")
            actual = (node.sid, node.exp, node.next.sid, node.next.exp)
            if actual != key:
                raise AssertionError(f"stale index entry {key} -> {actual}")
        # utility: every rule is used at least twice, exponents included
        counts = {rid: 0 for rid in self._rules}
        for rule in all_rules:
            node = rule.guard.next
            while node.sid is not None:
                if node.sid < 0:
                    counts[nt_id(node.sid)] += node.exp
                node = node.next
        for rid, count in counts.items():
            if count < 2:
                raise AssertionError(f"rule {rid} used {count} time(s)")
            if counts[rid] != self._mult.get(rid):
                raise AssertionError(f"rule {rid} multiplicity ledger drift")


def build_grammar(sequence, run_length: bool = True) -> Grammar:
    g = Grammar(run_length=run_length)
    g.extend(sequence)
    return g


def body_depths(bodies: dict[int, Body]) -> dict[int, int]:
    """Depth of every rule; raises on reference cycles or unknown ids."""
    depths: dict[int, int] = {}
    in_progress: set[int] = set()

    def depth(rid: int) -> int:
        if rid in depths:
            return depths[rid]
        if rid in in_progress:
            raise MalformedGrammarError(f"rule cycle through {rid}")
        if rid not in bodies:
            raise MalformedGrammarError(f"unknown rule {rid}")
        in_progress.add(rid)
        d = 1 + max(
            (depth(nt_id(sid)) if sid < 0 else 0 for sid, _ in bodies[rid]),
            default=-1,
        )
        in_progress.remove(rid)
        depths[rid] = d
        return d

    for rid in bodies:
        depth(rid)
    return depths


def expand_bodies(main: Body, bodies: dict[int, Body]) -> list[int]:
    """Expand a main body over plain rule bodies to the full id sequence."""
    body_depths(bodies)  # cycle / unknown-id detection
    for sid, _ in main:
        if sid < 0 and nt_id(sid) not in bodies:
            raise MalformedGrammarError(f"unknown rule {nt_id(sid)}")
    memo: dict[int, list[int]] = {}

    def expansion(rid: int) -> list[int]:
        cached = memo.get(rid)
        if cached is None:
            cached = _expand_one(bodies[rid])
            memo[rid] = cached
        return cached

    def _expand_one(body: Body) -> list[int]:
        out: list[int] = []
        for sid, exp in body:
            if sid >= 0:
                if exp == 1:
                    out.append(sid)
                else:
                    out.extend([sid] * exp)
            else:
                out.extend(expansion(nt_id(sid)) * exp)
        return out

    return _expand_one(main)


def grammar_size(g: Grammar) -> int:
    return g.size()
