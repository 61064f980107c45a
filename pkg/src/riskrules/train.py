"""Rule training by decomposition, and the training objective itself.

The training problem asks for a margin-respecting rule minimizing a risk
measure of the per-point objectives. Decomposition attacks it in three
steps. Step 1 solves each training point exactly; the risk of those
per-point optima is a lower bound L on the training problem, since no
single rule can beat pointwise minimization. Step 2 fits each rule
coordinate separately: the L1-cheapest affine row reproducing that
coordinate's optimal 0/1 labels inside the margin band. Step 3 prices the
result: the fitted rule prescribes exactly the per-point optima, so its
training objective is the risk of the per-point values plus theta times
the summed row norms, giving an upper bound U in closed form. With exact
Step-1 solves, U - L equals the regularizer term identically.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, RankDeficientError, StructuralError
from .exactsolver import SolveResult, solve_exact
from .probspace import DiscreteRV, FiniteProbSpace, RiskSpec, evaluate_risk
from .rules import AffineRule, ConstantRule, MarginSpec, TabularRule, heaviside, margin_flags
from .searchmodel import (
    SearchInstance,
    check_parameter,
    nondetect_prob,
    structurally_feasible,
)

RANK_SV_TOL = 1e-10


@dataclass
class TrainingConfig:
    risk: RiskSpec
    margin: MarginSpec
    theta: float = 0.0
    mode: str = "SP1"
    step1_tol: float = 0.0
    heuristic: bool = False
    weights: np.ndarray | None = None
    jobs: int = 1


@dataclass
class DecompResult:
    per_omega: list
    decisions: np.ndarray
    values: np.ndarray
    lower_bounds: np.ndarray
    L: float
    U: float
    gap: float
    reg: float
    rule: AffineRule
    partial: bool
    failed_coords: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


def _prob_space(S: int, weights) -> FiniteProbSpace:
    if weights is None:
        return FiniteProbSpace.uniform(S)
    return FiniteProbSpace(weights)


def _check_points(instance: SearchInstance, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != instance.r:
        raise StructuralError(
            f"points have dimension {pts.shape[1]}, instance expects {instance.r}"
        )
    for xi in pts:
        check_parameter(instance, xi)
    return pts


def _require_separable(points: np.ndarray):
    # exact per-coordinate separation needs the augmented point matrix to
    # have full row rank; raw linear independence would wrongly reject
    # sum-zero simplex perturbations
    S = points.shape[0]
    aug = np.hstack([points, np.ones((S, 1))])
    sv = np.linalg.svd(aug, compute_uv=False)
    rank = int((sv > RANK_SV_TOL).sum())
    if rank < S:
        raise RankDeficientError(
            f"augmented training matrix has rank {rank} for {S} points"
        )


def _flat_decision(instance: SearchInstance, path) -> np.ndarray:
    y = np.zeros(instance.m, dtype=np.int64)
    C = instance.grid.n_cells
    for t, c in enumerate(path):
        y[t * C + int(c)] = 1
    return y


def _step1(instance, points, config) -> list[SolveResult]:
    mode, tol = config.mode, config.step1_tol
    S = points.shape[0]
    if config.jobs > 1:
        results: list = [None] * S
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = {
                pool.submit(solve_exact, instance, points[s], mode, tol): s
                for s in range(S)
            }
            for fut, s in futures.items():
                results[s] = fut.result()
    else:
        results = []
        warm = None
        for s in range(S):
            res = solve_exact(instance, points[s], mode, tol, warm_path=warm)
            warm = res.path if res.status == "optimal" else None
            results.append(res)
    for s, res in enumerate(results):
        if res.status != "optimal":
            raise InfeasibleError(f"training point {s} admits no feasible path")
    return results


def _fit_coordinate(points, labels, margin):
    from .simplex import l1_separation

    return l1_separation(points, labels, margin.epsilon, margin.delta)


def _offset_interval(points, labels, margin, B_row):
    """Offsets keeping every point's gap value inside its labeled band."""
    v = points @ B_row
    ones = labels == 1
    lo = -math.inf
    hi = math.inf
    if ones.any():
        lo = max(lo, float((margin.epsilon - v[ones]).max()))
        hi = min(hi, float((margin.delta - v[ones]).min()))
    if (~ones).any():
        lo = max(lo, float((-margin.delta - v[~ones]).max()))
        hi = min(hi, float((-margin.epsilon - v[~ones]).min()))
    return lo, hi


def _row_verifies(points, labels, margin, B_row, offset):
    """Strict float-level check that every point lands in its band half."""
    g = points @ B_row + offset
    ones = labels == 1
    ok1 = (g[ones] >= margin.epsilon) & (g[ones] <= margin.delta)
    ok0 = (g[~ones] <= -margin.epsilon) & (g[~ones] >= -margin.delta)
    return bool(ok1.all() and ok0.all())


def _robustify_row(points, labels, margin, B_row, fallback_offset):
    """Pick an offset whose evaluated gaps verify in float arithmetic.

    A tight separation can leave the feasible offset interval with zero
    width, where rounding in B @ xi leaks one ulp past epsilon. The
    offset costs nothing and the row scale only has to grow by ulps to
    open the interval, so bump through tiny factors until the explicit
    check passes.
    """
    for bump in (1.0, 1.0 + 2.0**-50, 1.0 + 2.0**-42, 1.0 + 2.0**-34, 1.0 + 2.0**-26):
        row = bump * B_row
        lo, hi = _offset_interval(points, labels, margin, row)
        if lo > hi:
            continue
        off = 0.5 * (lo + hi)
        if _row_verifies(points, labels, margin, row, off):
            return row, off
    return B_row, fallback_offset


def _shrink_row(points, labels, margin, B_row, offset):
    """Regularizer-only descent: scale the row toward zero while every
    point keeps its label and margin. Returns a no-worse (B, b, l1)."""
    base = float(np.abs(B_row).sum())
    if base == 0.0:
        return B_row, offset, 0.0

    def feasible_offset(scale):
        lo, hi = _offset_interval(points, labels, margin, scale * B_row)
        return (lo, hi) if lo <= hi else None

    best_scale = 1.0
    lo_s, hi_s = 0.0, 1.0
    if feasible_offset(0.0) is not None:
        best_scale = 0.0
    else:
        for _ in range(60):
            mid = 0.5 * (lo_s + hi_s)
            if feasible_offset(mid) is not None:
                hi_s = mid
            else:
                lo_s = mid
        best_scale = hi_s
    if best_scale >= 1.0:
        return B_row, offset, base
    band = feasible_offset(best_scale)
    if band is None:
        return B_row, offset, base
    new_B = best_scale * B_row
    new_off = 0.5 * (band[0] + band[1])
    return new_B, new_off, float(np.abs(new_B).sum())


def decompose(instance: SearchInstance, points, config: TrainingConfig) -> DecompResult:
    """Three-step bound-and-rule construction for the training problem."""
    points = _check_points(instance, points)
    _require_separable(points)
    S = points.shape[0]
    space = _prob_space(S, config.weights)
    timings = {}

    t0 = time.perf_counter()
    per_omega = _step1(instance, points, config)
    timings["step1"] = time.perf_counter() - t0

    values = np.array([res.value for res in per_omega])
    lower_bounds = np.array([res.lower_bound for res in per_omega])
    decisions = np.stack(
        [_flat_decision(instance, res.path) for res in per_omega]
    )
    L = evaluate_risk(config.risk, DiscreteRV(lower_bounds, space))

    t0 = time.perf_counter()
    m = instance.m
    B = np.zeros((m, instance.r))
    b = np.zeros(m)
    failed = []
    mixed = [j for j in range(m) if 0 < decisions[:, j].sum() < S]
    for j in range(m):
        labels = decisions[:, j]
        if labels.min() == labels.max():
            # single label: zero row, offset on the right side of the band
            b[j] = config.margin.epsilon if labels[0] == 1 else -config.margin.epsilon
    if config.jobs > 1 and mixed:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            fits = list(
                pool.map(
                    lambda j: _fit_coordinate(points, decisions[:, j], config.margin),
                    mixed,
                )
            )
    else:
        fits = [
            _fit_coordinate(points, decisions[:, j], config.margin) for j in mixed
        ]
    for j, fit in zip(mixed, fits):
        if fit.status != "optimal":
            failed.append(j)
            b[j] = -config.margin.epsilon
            continue
        # the offset is unpriced, so recentre it in its feasible interval;
        # a vertex solution would sit exactly on a band edge and rounding
        # in B @ xi could then leak past epsilon
        B[j], b[j] = _robustify_row(
            points, decisions[:, j], config.margin, fit.B, fit.offset
        )
    timings["step2"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fitted = [j for j in range(m) if j not in failed]
    reg = float(np.abs(B[fitted]).sum())
    if config.heuristic and not failed:
        for j in mixed:
            nb, noff, nl1 = _shrink_row(
                points, decisions[:, j], config.margin, B[j], b[j]
            )
            if nl1 < float(np.abs(B[j]).sum()) and _row_verifies(
                points, decisions[:, j], config.margin, nb, noff
            ):
                B[j] = nb
                b[j] = noff
        reg = float(np.abs(B).sum())
    U = evaluate_risk(config.risk, DiscreteRV(values, space)) + config.theta * reg
    timings["step3"] = time.perf_counter() - t0

    rule = AffineRule(B, b, config.margin)
    return DecompResult(
        per_omega=per_omega,
        decisions=decisions,
        values=values,
        lower_bounds=lower_bounds,
        L=float(L),
        U=float(U),
        gap=float((U - L) / L),
        reg=reg,
        rule=rule,
        partial=bool(failed),
        failed_coords=failed,
        timings=timings,
    )


def training_objective(rule, points, instance: SearchInstance, config: TrainingConfig):
    """Evaluate a rule on the training problem: (value, feasible, violations).

    The value is the configured risk of the per-point objectives plus the
    theta-weighted L1 norm of affine coefficients. Violations list
    (point, kind) pairs for margin, path, and cap failures.
    """
    points = _check_points(instance, points)
    S = points.shape[0]
    space = _prob_space(S, config.weights)
    violations = []
    vals = np.empty(S)
    for s in range(S):
        xi = points[s]
        if isinstance(rule, TabularRule):
            y = rule.decision(s)
            g = rule.gap(s)
        else:
            g = rule.gap(xi)
            y = heaviside(g)
        if margin_flags(g, config.margin).any():
            violations.append((s, "margin"))
        y_mat = y.reshape(instance.T, instance.grid.n_cells)
        if not structurally_feasible(instance.grid, y_mat):
            violations.append((s, "path"))
        elif config.mode == "SP2":
            if nondetect_prob(instance, xi, y_mat, target=1) > instance.tau:
                violations.append((s, "cap"))
        vals[s] = nondetect_prob(instance, xi, y_mat, target=0)
    value = evaluate_risk(config.risk, DiscreteRV(vals, space))
    if isinstance(rule, AffineRule):
        value += config.theta * float(np.abs(rule.B).sum())
    return float(value), not violations, violations


def recovery_check(
    instance: SearchInstance,
    points,
    risk: RiskSpec,
    mode: str = "SP1",
    rel_tol: float = 1e-12,
) -> bool:
    """Wrap the per-point optima in a table rule; its training objective
    must reproduce the risk of the per-point optimal values."""
    points = _check_points(instance, points)
    S = points.shape[0]
    results = [solve_exact(instance, points[s], mode) for s in range(S)]
    if any(res.status != "optimal" for res in results):
        raise InfeasibleError("a training point admits no feasible path")
    values = np.array([res.value for res in results])
    decisions = np.stack([_flat_decision(instance, res.path) for res in results])
    margin = MarginSpec(1e-3, 1.0)
    tabular = TabularRule(decisions, margin)
    config = TrainingConfig(risk=risk, margin=margin, theta=0.0, mode=mode)
    value, feas, _ = training_objective(tabular, points, instance, config)
    space = FiniteProbSpace.uniform(S)
    direct = evaluate_risk(risk, DiscreteRV(values, space))
    scale = max(1.0, abs(direct))
    return feas and abs(value - direct) <= rel_tol * scale
