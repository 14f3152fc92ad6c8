import pytest

from proxysynth.artifacts import (
    DumpFormatError,
    read_merged_dump,
    read_rank_dump,
    write_merged_dump,
    write_rank_dump,
)
from proxysynth.canonical import TerminalTable
from proxysynth.grammar import build_grammar
from proxysynth.merge import expand_for_rank, merge_program, verify_round_trip


def _compressed(seq):
    table = TerminalTable()
    ids = [table.intern(f"key {v}") for v in seq]
    return table, build_grammar(ids), ids


def test_rank_dump_round_trip():
    table, grammar, _ = _compressed([0, 1, 0, 1, 2, 0, 1, 0, 1, 2])
    text = write_rank_dump(table, grammar, rank=3)
    rank, table2, main, rules = read_rank_dump(text)
    assert rank == 3
    assert table2.keys() == table.keys()
    assert main == grammar.main_body()
    assert rules == grammar.rule_bodies()


def test_rank_dump_is_deterministic_and_main_first():
    table, grammar, _ = _compressed([0, 1] * 50)
    a = write_rank_dump(table, grammar, 0)
    b = write_rank_dump(table, grammar, 0)
    assert a == b
    rule_lines = [l for l in a.splitlines() if "->" in l]
    assert rule_lines[0].startswith("S ->")


def test_merged_dump_round_trip():
    per_rank = []
    id_seqs = []
    for rank in range(4):
        seq = [0, 1, 2] * 40 + ([9] if rank == 0 else [])
        table, grammar, ids = _compressed(seq)
        per_rank.append((table, grammar))
        id_seqs.append(ids)
    program = merge_program(per_rank, 0.9)
    text = write_merged_dump(program)
    back = read_merged_dump(text)
    assert back.world_size == 4
    assert back.rules == program.rules
    assert [(s.sid, s.exp, s.ranks) for s in back.main] == [
        (s.sid, s.exp, s.ranks) for s in program.main
    ]
    for rank in range(4):
        assert expand_for_rank(back, rank) == expand_for_rank(program, rank)
    assert verify_round_trip(program, id_seqs)


def test_merged_dump_requires_world_size():
    with pytest.raises(DumpFormatError):
        read_merged_dump("S -> T0@{0}\nT0 = X\n".replace("T0 = X\n", ""))


def test_rank_dump_rejects_rank_lists():
    with pytest.raises(DumpFormatError):
        read_rank_dump("# rank=0\nT0 = X\nS -> T0@{0}\n")


@pytest.mark.parametrize(
    "text",
    [
        "T1 = X\n",                      # ids must be dense from 0
        "T0 = X\nS -> T0^0\n",           # exponent must be >= 1
        "T0 = X\nS -> Q4\n",             # bad symbol
        "T0 = X\nS -> T0\nS -> T0\n",    # duplicate main
        "T0 = X\nwhat is this\n",        # not a rule line
        "T0 = X\nR1 -> T0@{0}\n",        # rank list outside main
    ],
)
def test_dump_format_errors(text):
    with pytest.raises(DumpFormatError):
        read_rank_dump(text)


def test_empty_trace_dump():
    table = TerminalTable()
    grammar = build_grammar([])
    text = write_rank_dump(table, grammar, 0)
    rank, table2, main, rules = read_rank_dump(text)
    assert rank == 0 and len(table2) == 0 and main == [] and rules == {}
