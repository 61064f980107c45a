"""Moving-target search on a grid, with parameterized scenario weights.

A searcher occupies one cell per period. Targets move according to
pre-drawn scenario trajectories; scenario i is detected-free with
probability exp(-alpha * d_i) where d_i counts the periods the searcher
shares the target's cell. The objective is the weighted nondetection
probability sum_i q_i(xi) exp(-alpha(xi) d_i).

Two parameterizations are supported. Mode A carries the detection rate in
the first coordinate of xi and renormalizes clipped scenario weights, so
xi has one more coordinate than there are scenarios. Mode B keeps the
detection rate fixed and shifts scenario weights directly on the
probability simplex, so xi has exactly one coordinate per scenario.

Cells are numbered row-major from the upper-left, starting at 0. Decision
matrices have shape (T, C), one row per period.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DomainError, StructuralError

SIMPLEX_TOL = 1e-9

# Glimpse-rate defaults: a single co-located period is detected with
# probability 1 - exp(-alpha_bar), which these pin at 0.936 and 0.4.
DEFAULT_ALPHA_BAR = {"A": 2.74887, "B": 0.510826}


def fixed_rng(seed: int) -> np.random.Generator:
    """The one RNG used everywhere: PCG64 under numpy's Generator API."""
    return np.random.Generator(np.random.PCG64(seed))


class Grid:
    """Rectangular cell grid with 4-neighborhoods that include the cell itself."""

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise DomainError(f"grid must be at least 1x1, got {rows}x{cols}")
        self.rows = rows
        self.cols = cols
        self.n_cells = rows * cols
        self._build_neighborhoods()

    def _build_neighborhoods(self):
        nbrs = []
        adj = []
        for c in range(self.n_cells):
            r, k = divmod(c, self.cols)
            around = []
            if r > 0:
                around.append(c - self.cols)
            if k > 0:
                around.append(c - 1)
            if k < self.cols - 1:
                around.append(c + 1)
            if r < self.rows - 1:
                around.append(c + self.cols)
            adj.append(sorted(around))
            nbrs.append(sorted(around + [c]))
        self._nbrs = nbrs
        self._adj = adj
        # CSR copies for the solver kernels
        self.nbr_indptr = np.zeros(self.n_cells + 1, dtype=np.int64)
        self.nbr_indices = np.empty(sum(len(n) for n in nbrs), dtype=np.int64)
        pos = 0
        for c, n in enumerate(nbrs):
            self.nbr_indices[pos : pos + len(n)] = n
            pos += len(n)
            self.nbr_indptr[c + 1] = pos

    def neighbors(self, c: int) -> list[int]:
        """Cells reachable in one step from c, including c."""
        return list(self._nbrs[c])

    def adjacent(self, c: int) -> list[int]:
        """Neighbors of c excluding c itself."""
        return list(self._adj[c])

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.rows == other.rows
            and self.cols == other.cols
        )


def gen_scenarios(grid: Grid, T: int, count: int, start, stay_prob: float, rng):
    """Draw count Markov trajectories of length T.

    start is a cell or a list of cells; with a list, each trajectory picks
    its first cell uniformly from it. Each period the target stays put with
    probability stay_prob and otherwise moves to a uniformly chosen
    adjacent cell. A cell with no adjacent cells forces a stay.
    """
    if T < 1:
        raise DomainError("need at least one period")
    if not 0.0 <= stay_prob <= 1.0:
        raise DomainError(f"stay probability {stay_prob!r} outside [0, 1]")
    starts = [start] if np.isscalar(start) else list(start)
    for s in starts:
        if not 0 <= s < grid.n_cells:
            raise StructuralError(f"start cell {s} outside grid")
    cells = np.empty((count, T), dtype=np.int64)
    for i in range(count):
        if len(starts) == 1:
            c = starts[0]
        else:
            c = starts[int(rng.integers(len(starts)))]
        cells[i, 0] = c
        for t in range(1, T):
            adj = grid._adj[c]
            if adj and rng.random() >= stay_prob:
                c = adj[int(rng.integers(len(adj)))]
            cells[i, t] = c
    return cells


class SearchInstance:
    """Grid, horizon, per-target scenario trajectories, and parameterization."""

    def __init__(self, grid: Grid, T: int, targets, mode: str, alpha_bar=None, tau=None):
        if mode not in ("A", "B"):
            raise DomainError(f"mode must be 'A' or 'B', got {mode!r}")
        targets = np.asarray(targets, dtype=np.int64)
        if targets.ndim != 3:
            raise StructuralError("targets must have shape (n_targets, I, T)")
        if targets.shape[0] not in (1, 2):
            raise StructuralError("supported target counts are 1 and 2")
        if targets.shape[2] != T:
            raise StructuralError(
                f"trajectories cover {targets.shape[2]} periods, horizon is {T}"
            )
        if targets.min() < 0 or targets.max() >= grid.n_cells:
            raise StructuralError("trajectory cell outside grid")
        self.grid = grid
        self.T = T
        self.targets = targets
        self.mode = mode
        self.alpha_bar = float(
            DEFAULT_ALPHA_BAR[mode] if alpha_bar is None else alpha_bar
        )
        if self.alpha_bar <= 0.0:
            raise DomainError("alpha_bar must be positive")
        self.tau = None if tau is None else float(tau)

    @property
    def n_targets(self):
        return self.targets.shape[0]

    @property
    def I(self):
        return self.targets.shape[1]

    @property
    def r(self):
        """Parameter dimension: mode A adds a rate coordinate in front."""
        return self.I + 1 if self.mode == "A" else self.I

    @property
    def m(self):
        """Decision-vector length, one coordinate per (period, cell)."""
        return self.T * self.grid.n_cells


def check_parameter(instance: SearchInstance, xi) -> np.ndarray:
    """Validate a parameter vector for the instance's mode, return it as float64."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (instance.r,):
        raise StructuralError(
            f"parameter length {xi.size}, mode {instance.mode} expects {instance.r}"
        )
    if instance.mode == "A":
        if instance.alpha_bar + xi[0] <= 0.0:
            raise DomainError("detection rate driven nonpositive")
        if np.maximum(0.0, 1.0 / instance.I + xi[1:]).sum() <= 0.0:
            raise DomainError("all scenario weights clipped to zero")
    else:
        w = 1.0 / instance.I + xi
        if np.any(w < 0.0):
            raise DomainError("mode B weight below zero")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"mode B weights sum to {w.sum()!r}")
    return xi


def detection_rate(instance: SearchInstance, xi) -> float:
    xi = check_parameter(instance, xi)
    if instance.mode == "A":
        return instance.alpha_bar + float(xi[0])
    return instance.alpha_bar


def qvec(instance: SearchInstance, xi) -> np.ndarray:
    """Scenario probability weights at xi."""
    xi = check_parameter(instance, xi)
    base = 1.0 / instance.I
    if instance.mode == "A":
        num = np.maximum(0.0, base + xi[1:])
        return num / num.sum()
    return base + xi


# ----------------------------------------------------------------------
# decisions and the objective

def path_to_y(instance: SearchInstance, cells) -> np.ndarray:
    cells = np.asarray(cells, dtype=np.int64)
    if cells.shape != (instance.T,):
        raise StructuralError(f"path length {cells.size}, horizon {instance.T}")
    y = np.zeros((instance.T, instance.grid.n_cells), dtype=np.int64)
    y[np.arange(instance.T), cells] = 1
    return y


def y_to_path(instance: SearchInstance, y) -> np.ndarray:
    y = _as_decision(instance, y)
    if not (y.sum(axis=1) == 1).all():
        raise StructuralError("decision does not occupy exactly one cell per period")
    return np.argmax(y, axis=1)


def _as_decision(instance: SearchInstance, y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim == 1:
        if y.size != instance.m:
            raise StructuralError(
                f"flat decision length {y.size}, expected {instance.m}"
            )
        y = y.reshape(instance.T, instance.grid.n_cells)
    if y.shape != (instance.T, instance.grid.n_cells):
        raise StructuralError(f"decision shape {y.shape} unsupported")
    if not np.isin(y, (0, 1)).all():
        raise DomainError("decision entries must be binary")
    return y.astype(np.int64)


def detect_counts(instance: SearchInstance, y, target: int) -> np.ndarray:
    """Per-scenario count of periods the decision covers the target's cell."""
    y = _as_decision(instance, y)
    cells = instance.targets[target]
    return y[np.arange(instance.T)[None, :], cells].sum(axis=1)


def nondetect_prob(instance: SearchInstance, xi, y, target: int) -> float:
    """Weighted nondetection probability of the given target under y."""
    q = qvec(instance, xi)
    alpha = detection_rate(instance, xi)
    d = detect_counts(instance, y, target)
    return float(np.dot(q, np.exp(-alpha * d)))


def structurally_feasible(grid: Grid, y) -> bool:
    """One cell per period and consecutive cells within a neighborhood."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] != grid.n_cells:
        return False
    if not (y.sum(axis=1) == 1).all():
        return False
    cells = np.argmax(y, axis=1)
    for t in range(1, len(cells)):
        if cells[t] not in grid._nbrs[cells[t - 1]]:
            return False
    return True


def feasible(instance: SearchInstance, xi, y, mode: str = "SP1") -> bool:
    """Structural feasibility, plus the pursuit cap on target 2 under SP2."""
    y = _as_decision(instance, y)
    if not structurally_feasible(instance.grid, y):
        return False
    if mode == "SP2":
        if instance.n_targets < 2 or instance.tau is None:
            raise StructuralError("SP2 needs a second target and a tau cap")
        return nondetect_prob(instance, xi, y, target=1) <= instance.tau
    if mode != "SP1":
        raise DomainError(f"unknown mode {mode!r}")
    return True


# ----------------------------------------------------------------------
# instance files

def save_instance(instance: SearchInstance, path):
    payload = {
        "rows": instance.grid.rows,
        "cols": instance.grid.cols,
        "T": instance.T,
        "mode": instance.mode,
        "alpha_bar": instance.alpha_bar,
        "tau": instance.tau,
        "targets": instance.targets.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_instance(path) -> SearchInstance:
    obj = json.loads(Path(path).read_text())
    try:
        grid = Grid(obj["rows"], obj["cols"])
        return SearchInstance(
            grid,
            obj["T"],
            np.asarray(obj["targets"], dtype=np.int64),
            obj["mode"],
            alpha_bar=obj.get("alpha_bar"),
            tau=obj.get("tau"),
        )
    except KeyError as missing:
        raise StructuralError(f"instance file lacks field {missing}") from None


def build_instance(
    rows,
    cols,
    T,
    I,
    mode,
    seed,
    t1_start=None,
    t2_start=None,
    stay_prob=0.6,
    tau=None,
    alpha_bar=None,
    dispersed=False,
):
    """Draw a fresh instance. Starts are 0-based cells; None centers target 1.

    With dispersed=True target 1 starts uniformly across the middle row
    instead of a single cell. A second target is drawn only when t2_start
    is given.
    """
    grid = Grid(rows, cols)
    rng = fixed_rng(seed)
    if dispersed:
        row = rows // 2
        start1 = [row * cols + k for k in range(cols)]
    elif t1_start is None:
        start1 = (rows // 2) * cols + cols // 2
    else:
        start1 = t1_start
    trajectories = [gen_scenarios(grid, T, I, start1, stay_prob, rng)]
    if t2_start is not None:
        trajectories.append(gen_scenarios(grid, T, I, t2_start, stay_prob, rng))
    return SearchInstance(
        grid, T, np.stack(trajectories), mode, alpha_bar=alpha_bar, tau=tau
    )
