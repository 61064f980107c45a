"""Dense two-phase primal simplex and margin separation.

Small and deterministic by construction: Bland's rule on both the entering
and leaving choices, dense float64 tableau, reduced costs recomputed every
iteration. Problem sizes here are tens of variables, so clarity wins over
sparse cleverness. Phase 1 minimizes artificial mass, phase 2 the real
cost; a pivot candidate below PIVOT_TOL raises instead of silently
dividing by near-zero.

l1_separation fits one affine classifier coordinate: find (B_i, b_i) with
the smallest L1 coefficient norm whose value at every training point lands
in [epsilon, delta] for label 1 and [-delta, -epsilon] for label 0.
Single-label inputs short-circuit to the zero classifier with offset
plus or minus epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLPError, DomainError, StructuralError

PIVOT_TOL = 1e-11
RC_TOL = 1e-10
FEAS_TOL = 1e-9
MAX_ITERS = 200_000


@dataclass
class StandardLP:
    """min c.x  s.t.  A x (senses) b,  lo <= x <= hi (lo finite, default 0)."""

    c: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.b = np.asarray(self.b, dtype=np.float64)
        n = self.c.size
        m = self.b.size
        if self.A.shape != (m, n):
            raise StructuralError(f"A is {self.A.shape}, expected {(m, n)}")
        if len(self.senses) != m:
            raise StructuralError("one sense per row required")
        for s in self.senses:
            if s not in ("<=", ">=", "="):
                raise StructuralError(f"bad sense {s!r}")
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=np.float64)
        self.hi = np.full(n, math.inf) if self.hi is None else np.asarray(self.hi, dtype=np.float64)
        if not np.isfinite(self.lo).all():
            raise DomainError("lower bounds must be finite (split free variables)")
        if np.any(self.hi < self.lo):
            raise DomainError("upper bound below lower bound")


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int = 0


def _pivot(tab, basis, row, col):
    piv = tab[row, col]
    if abs(piv) < PIVOT_TOL:
        raise DegenerateLPError(
            f"pivot {piv!r} below {PIVOT_TOL} at row {row}, col {col}"
        )
    tab[row] /= piv
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]
    basis[row] = col


def _iterate(tab, basis, cost, allowed, iters):
    """Run simplex to optimality of cost over the current tableau.

    Returns (status, iters). Bland: entering is the lowest-index allowed
    column with negative reduced cost, leaving breaks ratio ties by lowest
    basis index.
    """
    m = tab.shape[0]
    while True:
        if iters > MAX_ITERS:
            raise DegenerateLPError("iteration cap exceeded")
        rc = cost.copy()
        for r in range(m):
            if cost[basis[r]] != 0.0:
                rc -= cost[basis[r]] * tab[r, :-1]
        entering = -1
        for j in range(rc.size):
            if allowed[j] and rc[j] < -RC_TOL:
                entering = j
                break
        if entering < 0:
            return iters
        col = tab[:, entering]
        best_row = -1
        best_ratio = math.inf
        seen_positive = False
        for r in range(m):
            if col[r] > 0.0:
                seen_positive = True
            if col[r] > PIVOT_TOL:
                ratio = tab[r, -1] / col[r]
                if ratio < best_ratio - 0.0 or (
                    ratio == best_ratio and best_row >= 0 and basis[r] < basis[best_row]
                ):
                    best_ratio = ratio
                    best_row = r
        if best_row < 0:
            if seen_positive:
                raise DegenerateLPError(
                    f"all pivot candidates in column {entering} below {PIVOT_TOL}"
                )
            return -1  # unbounded
        _pivot(tab, basis, best_row, entering)
        iters += 1


def solve_lp(lp: StandardLP) -> LPResult:
    n = lp.c.size
    # shift out lower bounds, turn finite upper bounds into rows
    A = lp.A.copy()
    b = lp.b - A @ lp.lo
    senses = list(lp.senses)
    const = float(lp.c @ lp.lo)
    extra = [j for j in range(n) if math.isfinite(lp.hi[j])]
    if extra:
        rows = np.zeros((len(extra), n))
        for k, j in enumerate(extra):
            rows[k, j] = 1.0
        A = np.vstack([A, rows])
        b = np.concatenate([b, [lp.hi[j] - lp.lo[j] for j in extra]])
        senses += ["<="] * len(extra)
    m = b.size
    flip = b < 0.0
    A[flip] *= -1.0
    b = b.copy()
    b[flip] *= -1.0
    senses = [
        {"<=": ">=", ">=": "<=", "=": "="}[s] if f else s
        for s, f in zip(senses, flip)
    ]

    n_slack = sum(1 for s in senses if s == "<=")
    n_surp = sum(1 for s in senses if s == ">=")
    n_art = sum(1 for s in senses if s in (">=", "="))
    N = n + n_slack + n_surp + n_art
    tab = np.zeros((m, N + 1))
    tab[:, :n] = A
    tab[:, -1] = b
    basis = np.full(m, -1, dtype=np.int64)
    s_at = n
    a_at = n + n_slack + n_surp
    art_cols = []
    for r in range(m):
        if senses[r] == "<=":
            tab[r, s_at] = 1.0
            basis[r] = s_at
            s_at += 1
        elif senses[r] == ">=":
            tab[r, s_at] = -1.0
            s_at += 1
            tab[r, a_at] = 1.0
            basis[r] = a_at
            art_cols.append(a_at)
            a_at += 1
        else:
            tab[r, a_at] = 1.0
            basis[r] = a_at
            art_cols.append(a_at)
            a_at += 1
    is_art = np.zeros(N, dtype=bool)
    is_art[art_cols] = True

    iters = 0
    if art_cols:
        cost1 = np.zeros(N)
        cost1[art_cols] = 1.0
        allowed = np.ones(N, dtype=bool)
        iters = _iterate(tab, basis, cost1, allowed, iters)
        if iters < 0:
            raise DegenerateLPError("phase 1 reported unbounded")
        p1 = float(cost1[basis] @ tab[:, -1])
        if p1 > FEAS_TOL:
            return LPResult("infeasible", None, None, iters)
        # force artificials out of the basis or drop redundant rows
        drop = []
        for r in range(m):
            if is_art[basis[r]]:
                target = -1
                for j in range(N):
                    if not is_art[j] and abs(tab[r, j]) > PIVOT_TOL:
                        target = j
                        break
                if target >= 0:
                    _pivot(tab, basis, r, target)
                else:
                    drop.append(r)
        if drop:
            keep = [r for r in range(m) if r not in drop]
            tab = tab[keep]
            basis = basis[keep]
            m = len(keep)

    cost2 = np.zeros(N)
    cost2[:n] = lp.c
    allowed = ~is_art
    iters = _iterate(tab, basis, cost2, allowed, iters)
    if iters < 0:
        return LPResult("unbounded", None, None, 0)
    z = np.zeros(N)
    z[basis] = tab[:, -1]
    x = z[:n] + lp.lo
    return LPResult("optimal", x, float(lp.c @ z[:n]) + const, iters)


# ----------------------------------------------------------------------
# margin separation

@dataclass
class SeparationResult:
    B: np.ndarray | None
    offset: float | None
    status: str
    l1_norm: float


def l1_separation(points, labels, epsilon: float, delta: float) -> SeparationResult:
    """L1-minimal affine row separating labeled points into the margin band."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    s, r = points.shape
    if labels.shape != (s,):
        raise StructuralError("one label per point required")
    if not np.isin(labels, (0, 1)).all():
        raise DomainError("labels must be binary")
    if not epsilon > 0.0 or not delta > epsilon:
        raise DomainError("need 0 < epsilon < delta")
    if math.isinf(delta):
        raise DomainError("separation needs a finite delta")
    if labels.min() == labels.max():
        # single label: the zero row with offset on the right side
        off = epsilon if labels[0] == 1 else -epsilon
        return SeparationResult(np.zeros(r), off, "optimal", 0.0)
    # variables: Bp (r), Bn (r), bp, bn, all >= 0
    n = 2 * r + 2
    c = np.concatenate([np.ones(2 * r), np.zeros(2)])
    rows = []
    senses = []
    rhs = []
    for k in range(s):
        row = np.concatenate([points[k], -points[k], [1.0, -1.0]])
        if labels[k] == 1:
            rows.append(row)
            senses.append(">=")
            rhs.append(epsilon)
            rows.append(row)
            senses.append("<=")
            rhs.append(delta)
        else:
            rows.append(row)
            senses.append("<=")
            rhs.append(-epsilon)
            rows.append(row)
            senses.append(">=")
            rhs.append(-delta)
    res = solve_lp(StandardLP(c, np.array(rows), senses, np.array(rhs)))
    if res.status != "optimal":
        return SeparationResult(None, None, "infeasible", math.inf)
    x = res.x
    B = x[:r] - x[r : 2 * r]
    offset = float(x[2 * r] - x[2 * r + 1])
    return SeparationResult(B, offset, "optimal", float(np.abs(B).sum()))
