"""Exception hierarchy shared across the toolchain.

Everything user-facing derives from ProxySynthError so the CLI can map
data problems to a distinct exit code.
"""


class ProxySynthError(Exception):
    """Base class for all expected (data/usage) failures."""


class TraceParseError(ProxySynthError):
    """Malformed trace line; carries the 1-based line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnsupportedEventError(TraceParseError):
    """Trace references an MPI function outside the supported set."""


class HandleError(ProxySynthError):
    """Request/communicator handle misuse in a trace."""


class DanglingHandleError(HandleError):
    """Completion or free references a handle that is not live."""


class DoubleFreeError(HandleError):
    """A live handle number was released twice."""


class InvalidRankError(ProxySynthError):
    """Peer rank outside [0, world_size)."""


class MalformedGrammarError(ProxySynthError):
    """Grammar violates structural assumptions (cycles, unknown ids)."""


class SolverError(ProxySynthError):
    """Non-finite or structurally invalid solver input."""


class CodegenError(ProxySynthError):
    """Program cannot be translated to C faithfully."""


class DegenerateFitError(ProxySynthError):
    """Regression input does not determine a line."""
