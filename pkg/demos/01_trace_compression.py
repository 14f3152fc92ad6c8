"""From a raw event trace to a compact grammar.

Walks one rank's trace through canonicalization (handle pools, relative
ranks, compute clustering) and grammar construction, printing what each
stage does to the data.
"""

from proxysynth import ClusterConfig, SynthSpec, PhaseSpec, generate
from proxysynth.canonical import TerminalTable, canonicalize, intern_events
from proxysynth.events import serialize_event, serialize_trace
from proxysynth.grammar import build_grammar

spec = SynthSpec(
    world_size=4,
    phases=(PhaseSpec(pattern="ring", iterations=250, volume=2048),),
    seed=42,
)
trace = generate(spec)[1]  # rank 1 of 4

print("=== raw trace (first 6 of", len(trace.events), "events) ===")
for e in trace.events[:6]:
    print("   ", serialize_event(e))

# Raw request handles are pointer-like tokens with high entropy; the
# free-number pool renumbers them from zero, reusing completed slots.
canonical = canonicalize(trace, my_rank=1, world_size=4, cfg=ClusterConfig(0.05))
print("\n=== canonical form (same events) ===")
for e in canonical.events[:6]:
    print("   ", serialize_event(e))

table = TerminalTable()
ids = intern_events(canonical, table)
print(f"\n{len(trace.events)} events intern to {len(table)} unique terminals")
print("id sequence starts:", ids[:12])

g = build_grammar(ids)
print("\n=== grammar ===")
print("main rule:", g.main_body())
for rid, body in g.rule_bodies().items():
    print(f"R{rid} ->", body)

raw_bytes = len(serialize_trace(trace).encode())
print(f"\ngrammar size {g.size()} symbols vs {len(ids)} events")
print(f"raw trace {raw_bytes} bytes; every event is still recoverable:")
assert g.expand() == ids
print("expand(grammar) == id sequence  [exact]")
