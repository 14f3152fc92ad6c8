"""Trace-to-proxy toolchain.

Converts per-rank MPI communication/computation event traces into a
compact run-length grammar and then into a standalone compilable C
proxy program: communication replays losslessly, computation spans are
synthesized block combinations matching recorded counter metrics.
"""

from .canonical import (
    ClusterConfig,
    HandlePool,
    TerminalTable,
    canonicalize,
    canonicalize_handles,
    cluster_compute_events,
    encode_relative_ranks,
    intern_events,
)
from .codegen import (
    CodegenConfig,
    CommTimeModel,
    default_models,
    fit_comm_model,
    generate_program,
    scaled_volume,
)
from .events import CommEvent, ComputeEvent, Trace, parse_trace, serialize_trace
from .grammar import Grammar, build_grammar, expand_bodies
from .merge import (
    MergedProgram,
    RankList,
    expand_for_rank,
    filter_main,
    lcs_merge_mains,
    merge_program,
    merge_terminal_tables,
)
from .solver import (
    BlockMatrix,
    ProxyCombination,
    fixture_block_matrix,
    round_combination,
    solve_qp,
    synthesize_compute_terminal,
)
from .synth import PhaseSpec, SynthSpec, generate, write_trace_files

__version__ = "0.1.0"

__all__ = [
    "BlockMatrix",
    "ClusterConfig",
    "CodegenConfig",
    "CommEvent",
    "CommTimeModel",
    "ComputeEvent",
    "Grammar",
    "HandlePool",
    "MergedProgram",
    "PhaseSpec",
    "ProxyCombination",
    "RankList",
    "SynthSpec",
    "TerminalTable",
    "Trace",
    "build_grammar",
    "canonicalize",
    "canonicalize_handles",
    "cluster_compute_events",
    "default_models",
    "encode_relative_ranks",
    "expand_bodies",
    "expand_for_rank",
    "filter_main",
    "fit_comm_model",
    "fixture_block_matrix",
    "generate",
    "generate_program",
    "intern_events",
    "lcs_merge_mains",
    "merge_program",
    "merge_terminal_tables",
    "parse_trace",
    "round_combination",
    "scaled_volume",
    "serialize_trace",
    "solve_qp",
    "synthesize_compute_terminal",
    "write_trace_files",
]
