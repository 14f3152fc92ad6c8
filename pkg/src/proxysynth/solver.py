"""Computation-proxy search: block repetition counts from metric targets.

Each computation event carries a 6-metric target vector t.  Given the
per-iteration metric cost matrix B of the 11 predefined code blocks,
we pick non-negative repetition counts x minimizing the relative-error
objective

    f(x) = sum_i (b_i . x - t_i)^2 / max(t_i, 1)^2

subject to x >= 0 and the loop-overhead coupling x_11 >= x_1 + .. + x_9
(blocks 1-9 run inside counted loops whose per-iteration overhead is
carried by block 11).  The continuous problem is solved by accelerated
projected gradient plus an active-set polish; the result is rounded to
integers by a local floor/ceil search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import SolverError
from .events import METRICS

N_METRICS = 6
N_BLOCKS = 11
#: Indices of blocks 1-9, whose loop iterations consume overhead budget.
COUPLED = tuple(range(9))
#: Index of block 10, the parameterized busy loop.
SPIN = 9
#: Index of block 11, the loop-overhead carrier.
CARRIER = 10

_CYC_ROW = METRICS.index("CYC")


@dataclass(frozen=True)
class BlockMatrix:
    """6 x 11 per-iteration metric costs; rows follow METRICS order."""

    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.shape != (N_METRICS, N_BLOCKS):
            raise SolverError(f"block matrix must be {N_METRICS}x{N_BLOCKS}, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise SolverError("block matrix has non-finite entries")
        if np.any(b < 0):
            raise SolverError("block matrix entries must be non-negative")
        if np.any(b[_CYC_ROW] <= 0):
            raise SolverError("every block must cost cycles (CYC row > 0)")
        object.__setattr__(self, "b", b)

    @classmethod
    def from_text(cls, text: str) -> "BlockMatrix":
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(v) for v in line.split()])
        if len(rows) != N_METRICS or any(len(r) != N_BLOCKS for r in rows):
            raise SolverError(
                f"block matrix file must hold {N_METRICS} rows of {N_BLOCKS} values"
            )
        return cls(np.array(rows))

    @classmethod
    def load(cls, path) -> "BlockMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def save(self, path, comment: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if comment:
                for line in comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write("# rows: " + " ".join(METRICS) + "; columns: block 1..11\n")
            for row in self.b:
                fh.write(" ".join(f"{v:.10g}" for v in row) + "\n")


def fixture_block_matrix() -> BlockMatrix:
    """Synthetic well-conditioned test matrix shipped with the package.

    Not measured hardware truth; the calibration tool produces real ones.
    """
    text = resources.files("proxysynth.data").joinpath("block_matrix_fixture.txt").read_text()
    return BlockMatrix.from_text(text)


@dataclass(frozen=True)
class ProxyCombination:
    """Integer block repetition counts plus achieved error."""

    x: tuple[int, ...]
    residual: float
    relative_errors: tuple[float, ...]

    def __post_init__(self):
        if len(self.x) != N_BLOCKS or any(v < 0 for v in self.x):
            raise SolverError("combination must hold 11 non-negative counts")
        if self.x[CARRIER] < sum(self.x[j] for j in COUPLED):
            raise SolverError("coupling violated: x11 < sum(x1..x9)")


def _weights(t: np.ndarray) -> np.ndarray:
    # 1/t_i^2 relative weighting; clamped at 1 so zero counts stay finite
    return 1.0 / np.maximum(t, 1.0) ** 2


def objective(B: BlockMatrix, t, x) -> float:
    b = B.b if isinstance(B, BlockMatrix) else np.asarray(B, float)
    t = np.asarray(t, float)
    x = np.asarray(x, float)
    r = b @ x - t
    return float(np.dot(_weights(t), r * r))


def project_feasible(y) -> np.ndarray:
    """Exact Euclidean projection onto {x >= 0, sum(x[0:9]) <= x[10]}.

    The polyhedron admits a closed-form projection: clip, and when the
    coupling is violated shift the coupled block by a scalar found among
    O(m) breakpoints.
    """
    y = np.asarray(y, dtype=float)
    x = np.maximum(y, 0.0)
    if x[list(COUPLED)].sum() <= x[CARRIER]:
        return x
    yg = y[list(COUPLED)]
    yc = y[CARRIER]
    ys = np.sort(yg)[::-1]
    cum = np.cumsum(ys)

    def g(lam: float) -> float:
        return float(np.maximum(yg - lam, 0.0).sum() - (yc + lam))

    best_lam = -yc  # k = 0: every coupled coordinate clipped to zero
    best_g = abs(g(best_lam))
    for k in range(1, len(ys) + 1):
        lam = (cum[k - 1] - yc) / (k + 1)
        gk = abs(g(lam))
        if gk < best_g:
            best_g, best_lam = gk, lam
    lam = best_lam
    out = np.empty(N_BLOCKS)
    out[list(COUPLED)] = np.maximum(yg - lam, 0.0)
    out[SPIN] = max(y[SPIN], 0.0)
    out[CARRIER] = max(yc + lam, out[list(COUPLED)].sum())
    return out


def _constraint_dir() -> np.ndarray:
    h = np.zeros(N_BLOCKS)
    h[list(COUPLED)] = 1.0
    h[CARRIER] = -1.0
    return h


_H_DIR = None


def _coupling_vector() -> np.ndarray:
    global _H_DIR
    if _H_DIR is None:
        _H_DIR = _constraint_dir()
    return _H_DIR


def _eq_solve(A: np.ndarray, y: np.ndarray, zero: set[int], coupled: bool) -> np.ndarray:
    """Minimize ||Ax - y|| with x_j = 0 (j in zero) and, when coupled,
    sum(x[COUPLED]) = x[CARRIER]; minimum-norm solution on ties."""
    x = np.zeros(N_BLOCKS)
    if coupled and CARRIER in zero:
        zero = zero | set(COUPLED)
        coupled = False
    free = [j for j in range(N_BLOCKS) if j not in zero]
    if coupled:
        free = [j for j in free if j != CARRIER]
        if not free:
            return x
        cols = []
        for j in free:
            col = A[:, j].copy()
            if j in COUPLED:
                col += A[:, CARRIER]
            cols.append(col)
        M = np.stack(cols, axis=1)
        sol, *_ = np.linalg.lstsq(M, y, rcond=None)
        for j, v in zip(free, sol):
            x[j] = v
        x[CARRIER] = x[list(COUPLED)].sum()
    else:
        if not free:
            return x
        sol, *_ = np.linalg.lstsq(A[:, free], y, rcond=None)
        for j, v in zip(free, sol):
            x[j] = v
    return x


def _gradient(A: np.ndarray, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    return 2.0 * (A.T @ (A @ x - y))


def _kkt_parts(A, y, x, eps):
    """(stationarity residual, dual violation, primal violation), unscaled."""
    g = _gradient(A, y, x)
    h = _coupling_vector()
    xs = 1.0 + float(np.abs(x).max(initial=0.0))
    at_zero = x <= eps * xs
    slack = x[list(COUPLED)].sum() - x[CARRIER]
    coupling_active = slack >= -eps * xs

    mu = 0.0
    if coupling_active and not at_zero[CARRIER]:
        mu = float(g[CARRIER])  # stationarity in the carrier coordinate
    dual_viol = max(0.0, -mu)
    mu = max(mu, 0.0)

    stat = 0.0
    for j in range(N_BLOCKS):
        gj = g[j] + mu * h[j]
        if at_zero[j]:
            dual_viol = max(dual_viol, -gj)  # bound multiplier must be >= 0
        else:
            stat = max(stat, abs(gj))
    primal = max(0.0, slack) + max(0.0, float(-x.min(initial=0.0)))
    return stat, dual_viol, primal


def kkt_residual(B, t, x, eps: float = 1e-9) -> float:
    """Scaled first-order optimality residual at x (0 = exact optimum)."""
    b = B.b if isinstance(B, BlockMatrix) else np.asarray(B, float)
    t = np.asarray(t, float)
    sw = np.sqrt(_weights(t))
    A = b * sw[:, None]
    y = t * sw
    stat, dual, primal = _kkt_parts(A, y, np.asarray(x, float), eps)
    gscale = 1.0 + float(np.abs(2.0 * (A.T @ y)).max())
    return max(stat / gscale, dual / gscale, primal / (1.0 + float(np.abs(x).max())))


def _fista(A, y, x, iters: int) -> np.ndarray:
    H = 2.0 * A.T @ A
    q = 2.0 * A.T @ y
    lam_max = float(np.linalg.eigvalsh(H)[-1])
    if lam_max <= 0.0:
        return x
    step = 1.0 / lam_max
    z = x.copy()
    tk = 1.0
    for _ in range(iters):
        xn = project_feasible(z - step * (H @ z - q))
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        z = xn + ((tk - 1.0) / tn) * (xn - x)
        x, tk = xn, tn
    return x


def _active_set(A, y, x, max_iters: int = 60):
    """Primal active-set refinement from a feasible x."""
    xs = 1.0 + float(np.abs(x).max(initial=0.0))
    eps = 1e-12 * xs
    zero = {j for j in range(N_BLOCKS) if x[j] <= eps}
    slack = x[list(COUPLED)].sum() - x[CARRIER]
    coupled = slack >= -eps
    h = _coupling_vector()

    for _ in range(max_iters):
        xeq = _eq_solve(A, y, zero, coupled)
        free = [j for j in range(N_BLOCKS) if j not in zero]
        lo_ok = all(xeq[j] >= -1e-11 * xs for j in free)
        sl = xeq[list(COUPLED)].sum() - xeq[CARRIER]
        cp_ok = coupled or sl <= 1e-11 * xs
        if lo_ok and cp_ok:
            x = np.maximum(xeq, 0.0)
            if coupled:
                x[CARRIER] = max(x[CARRIER], x[list(COUPLED)].sum())
            # multiplier signs decide optimality
            g = _gradient(A, y, x)
            mu = 0.0
            if coupled and CARRIER not in zero:
                mu = float(g[CARRIER])
            worst_j, worst_v = None, -1e-9 * (1.0 + float(np.abs(g).max()))
            for j in sorted(zero):
                nu = g[j] + mu * h[j]
                if nu < worst_v:
                    worst_v, worst_j = nu, j
            if coupled and mu < worst_v:
                worst_v, worst_j = mu, "coupling"
            if worst_j is None:
                return x
            if worst_j == "coupling":
                coupled = False
            else:
                zero.discard(worst_j)
            continue
        # step toward xeq until the first blocking constraint
        d = xeq - x
        alpha = 1.0
        blocker = None
        for j in free:
            if d[j] < -1e-300 and xeq[j] < 0.0:
                a = x[j] / -d[j] if d[j] != 0 else 1.0
                if a < alpha:
                    alpha, blocker = a, j
        if not coupled:
            dh = float(h @ d)
            if dh > 1e-300:
                a = -float(h @ x) / dh
                if 0.0 <= a < alpha:
                    alpha, blocker = a, "coupling"
        if blocker is None or alpha >= 1.0:
            x = project_feasible(xeq)
        else:
            x = np.maximum(x + alpha * d, 0.0)
            if blocker == "coupling":
                coupled = True
            else:
                zero.add(blocker)
        xs = 1.0 + float(np.abs(x).max(initial=0.0))
    return x


def solve_qp(B, t, tol: float = 1e-8) -> np.ndarray:
    """Continuous minimizer of the weighted relative-error objective.

    Returns real-valued counts (round separately).  The result satisfies
    the KKT conditions to roughly 1e-8 relative; exactness on zero-residual
    targets comes from the equality solves in the active-set polish.
    """
    b = B.b if isinstance(B, BlockMatrix) else np.asarray(B, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape != (N_METRICS,):
        raise SolverError(f"target must have {N_METRICS} entries")
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(b)):
        raise SolverError("non-finite solver input")
    if np.any(t < 0):
        raise SolverError("metric targets must be non-negative")

    sw = np.sqrt(_weights(t))
    A = b * sw[:, None]
    y = t * sw

    x0, *_ = np.linalg.lstsq(A, y, rcond=None)
    x = project_feasible(x0)
    best = x
    best_r = kkt_residual(b, t, x)
    for fista_iters in (0, 150, 500):
        if fista_iters:
            x = _fista(A, y, x, fista_iters)
        x = _active_set(A, y, x)
        r = kkt_residual(b, t, x)
        if r < best_r:
            best, best_r = x, r
        if best_r <= tol:
            break
    # exact feasibility: lift the overhead budget clear of float round-off
    # (summation-order differences can shave a few ulps off either side)
    best = np.maximum(best, 0.0)
    coupled_sum = math.fsum(best[j] for j in COUPLED)
    best[CARRIER] = max(best[CARRIER], coupled_sum * (1.0 + 1e-14))
    return best


def _descend_integer(x, fx: float, f_of, b: np.ndarray, t: np.ndarray, max_rounds: int = 40):
    """Lattice descent from the rounded point.

    Floor/ceil enumeration lands near the continuous optimum, but on
    small counts a better lattice point can sit several units away along
    a shallow direction.  Each sweep minimizes every coordinate exactly
    (the objective is quadratic, so the best integer step has a closed
    form) and then tries +-1 swap pairs between blocks.  Deterministic
    scan order keeps output stable."""
    x = list(x)
    w = _weights(t)
    colw = (w[:, None] * b * b).sum(axis=0)  # sum_i w_i b_ij^2

    def try_cand(cand):
        nonlocal x, fx
        if any(v < 0 for v in cand):
            return False
        need = sum(cand[k] for k in COUPLED)
        if cand[CARRIER] < need:
            cand[CARRIER] = need
        fc = f_of(cand)
        if fc < fx - 1e-15:
            x, fx = cand, fc
            return True
        return False

    for _ in range(max_rounds):
        improved = False
        for j in range(N_BLOCKS):
            if colw[j] <= 0:
                continue
            r = b @ np.array(x, dtype=float) - t
            step = -float((w * r * b[:, j]).sum()) / float(colw[j])
            for d in {math.floor(step), math.ceil(step)}:
                if d != 0:
                    cand = list(x)
                    cand[j] += d
                    if try_cand(cand):
                        improved = True
        for j in range(N_BLOCKS):
            for k in range(N_BLOCKS):
                if j != k:
                    cand = list(x)
                    cand[j] += 1
                    cand[k] -= 1
                    if try_cand(cand):
                        improved = True
        if not improved:
            break
    return tuple(x), fx


def round_combination(x_real, B, t) -> ProxyCombination:
    """Integer rounding by local floor/ceil search with coupling repair.

    Coordinates with a fractional part in (0.01, 0.99) are enumerated
    both ways (capped at the 12 most ambiguous); the feasible candidate
    with the smallest objective wins, ties broken lexicographically.
    """
    xr = np.maximum(np.asarray(x_real, dtype=float), 0.0)
    if xr.shape != (N_BLOCKS,):
        raise SolverError(f"need {N_BLOCKS} counts")
    t = np.asarray(t, dtype=float)
    b = B.b if isinstance(B, BlockMatrix) else np.asarray(B, float)

    frac = xr - np.floor(xr)
    ambiguous = [j for j in range(N_BLOCKS) if 0.01 < frac[j] < 0.99]
    if len(ambiguous) > 12:
        ambiguous.sort(key=lambda j: abs(frac[j] - 0.5))
        ambiguous = sorted(ambiguous[:12])
    base = [int(round(v)) for v in xr]
    for j in ambiguous:
        base[j] = int(math.floor(xr[j]))

    w = _weights(t)

    def f_of(xi: list[int]) -> float:
        r = b @ np.array(xi, dtype=float) - t
        return float(np.dot(w, r * r))

    best_x: tuple[int, ...] | None = None
    best_f = math.inf
    for mask in range(1 << len(ambiguous)):
        cand = list(base)
        for bit, j in enumerate(ambiguous):
            if mask >> bit & 1:
                cand[j] += 1
        need = sum(cand[j] for j in COUPLED)
        if cand[CARRIER] < need:
            cand[CARRIER] = need  # repair the overhead budget upward
        fx = f_of(cand)
        key = tuple(cand)
        if fx < best_f - 1e-15 or (abs(fx - best_f) <= 1e-15 and (best_x is None or key < best_x)):
            best_f, best_x = fx, key

    best_x, best_f = _descend_integer(best_x, best_f, f_of, b, t)

    rel = tuple(
        float(abs(v - ti) / max(ti, 1.0))
        for v, ti in zip(b @ np.array(best_x, dtype=float), t)
    )
    return ProxyCombination(x=best_x, residual=best_f, relative_errors=rel)


def synthesize_compute_terminal(t, B, scale: float = 1.0) -> ProxyCombination:
    """Solve and round against the scaled-down target t / scale."""
    if scale < 1.0:
        raise SolverError("scaling factor must be >= 1")
    t = np.asarray(t, dtype=float)
    target = t / scale
    x = solve_qp(B, target)
    return round_combination(x, B, target)
