"""Exact path solvers and mixed-integer model emission.

solve_exact runs depth-first branch and bound with an admissible
all-remaining-periods-detect bound; brute_force enumerates every path and
exists to certify the solver, so it never prunes. Both share one leaf
expression per backend, making their optimal values comparable exactly.

The emitters write the single-point model and the full training model as
LP text for external solvers. Integer linearization: for each scenario and
target, binary pickers w_{i,j} select the detection count j, tied to the
path by sum_j j*w_{i,j} = (periods on target) and sum_j w_{i,j} = 1; the
objective then reads the precomputed exp(-alpha j) coefficients off the
selected picker.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import DomainError, SizeError, StructuralError
from .lpformat import Constraint, LPFile, write_lp
from .searchmodel import SearchInstance, check_parameter, detection_rate, qvec


@dataclass
class SolveResult:
    path: np.ndarray | None
    value: float
    lower_bound: float
    status: str
    nodes: int


def _kernel_inputs(instance: SearchInstance, xi, mode: str):
    xi = check_parameter(instance, xi)
    q = qvec(instance, xi)
    alpha = detection_rate(instance, xi)
    expd = np.exp(-alpha * np.arange(instance.T + 1, dtype=np.float64))
    z1 = np.ascontiguousarray(instance.targets[0])
    if mode == "SP2":
        if instance.n_targets < 2 or instance.tau is None:
            raise StructuralError("SP2 needs a second target and a tau cap")
        z2 = np.ascontiguousarray(instance.targets[1])
        tau = float(instance.tau)
    elif mode == "SP1":
        z2 = np.zeros((0, instance.T), dtype=np.int64)
        tau = math.inf
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return q, alpha, expd, z1, z2, tau


def solve_exact(
    instance: SearchInstance,
    xi,
    mode: str = "SP1",
    abs_tol: float = 0.0,
    warm_path=None,
) -> SolveResult:
    """Minimize the target-1 nondetection probability over searcher paths.

    abs_tol > 0 permits early pruning; the returned value then sits within
    abs_tol of lower_bound. warm_path seeds the incumbent when it is
    feasible here, typically with an adjacent parameter's optimum.
    """
    if abs_tol < 0.0:
        raise DomainError("abs_tol must be nonnegative")
    q, _, expd, z1, z2, tau = _kernel_inputs(instance, xi, mode)
    k = backend.kernels()
    grid = instance.grid
    T, C = instance.T, grid.n_cells

    init_path = np.zeros(T, dtype=np.int64)
    init_value = math.inf
    seeds = [k.greedy_path(grid.nbr_indptr, grid.nbr_indices, z1, q, T, C)]
    if warm_path is not None:
        seeds.append(np.asarray(warm_path, dtype=np.int64))
    for cand in seeds:
        if z2.shape[0] > 0 and k.path_objective(z2, q, expd, cand) > tau:
            continue
        val = k.path_objective(z1, q, expd, cand)
        if val < init_value:
            init_value = val
            init_path = cand
    res_path, value, lower, nodes, found = k.bnb_search(
        grid.nbr_indptr,
        grid.nbr_indices,
        z1,
        z2,
        q,
        expd,
        np.int64(T),
        np.int64(C),
        np.float64(tau),
        np.float64(abs_tol),
        init_path,
        np.float64(init_value),
    )
    if not found:
        return SolveResult(None, math.inf, math.inf, "infeasible", int(nodes))
    return SolveResult(
        np.asarray(res_path, dtype=np.int64).copy(),
        float(value),
        float(lower),
        "optimal",
        int(nodes),
    )


def count_paths(grid, T: int) -> int:
    """Exact number of structural paths, in exact integer arithmetic."""
    ways = [1] * grid.n_cells
    for _ in range(1, T):
        ways = [sum(ways[c2] for c2 in grid.neighbors(c)) for c in range(grid.n_cells)]
    return sum(ways)


def brute_force(
    instance: SearchInstance, xi, mode: str = "SP1", cap: int = 1_000_000
) -> SolveResult:
    """Enumerate all paths and return the best feasible one.

    Refuses instances whose exact path count exceeds cap. Used as the
    independent optimality oracle for solve_exact.
    """
    total = count_paths(instance.grid, instance.T)
    if total > cap:
        raise SizeError(f"{total} paths exceed the enumeration cap {cap}")
    q, _, expd, z1, z2, tau = _kernel_inputs(instance, xi, mode)
    k = backend.kernels()
    grid = instance.grid
    res_path, value, n_paths, found = k.enumerate_paths(
        grid.nbr_indptr,
        grid.nbr_indices,
        z1,
        z2,
        q,
        expd,
        np.int64(instance.T),
        np.int64(grid.n_cells),
        np.float64(tau),
    )
    if not found:
        return SolveResult(None, math.inf, math.inf, "infeasible", int(n_paths))
    return SolveResult(
        np.asarray(res_path, dtype=np.int64).copy(),
        float(value),
        float(value),
        "optimal",
        int(n_paths),
    )


# ----------------------------------------------------------------------
# single-point model emission

def _yname(c, t):
    return f"y_c{c}_t{t}"


def _wname(i, j, k):
    return f"w_i{i}_j{j}_k{k}"


def _structural_rows(grid, T, suffix=""):
    rows = []
    C = grid.n_cells
    for t in range(T):
        rows.append(
            Constraint(
                f"occ_t{t}{suffix}",
                {f"y_c{c}_t{t}{suffix}": 1.0 for c in range(C)},
                "=",
                1.0,
            )
        )
    for t in range(1, T):
        for c in range(C):
            coefs = {f"y_c{c2}_t{t - 1}{suffix}": 1.0 for c2 in grid.neighbors(c)}
            coefs[f"y_c{c}_t{t}{suffix}"] = -1.0
            rows.append(Constraint(f"move_c{c}_t{t}{suffix}", coefs, ">=", 0.0))
    return rows


def _linearization_rows(instance, k, suffix=""):
    rows = []
    T = instance.T
    cells = instance.targets[k]
    for i in range(instance.I):
        link = {}
        for j in range(1, T + 1):
            link[f"w_i{i}_j{j}_k{k}{suffix}"] = float(j)
        for t in range(T):
            name = f"y_c{cells[i, t]}_t{t}{suffix}"
            link[name] = link.get(name, 0.0) - 1.0
        rows.append(Constraint(f"link_i{i}_k{k}{suffix}", link, "=", 0.0))
        rows.append(
            Constraint(
                f"one_i{i}_k{k}{suffix}",
                {f"w_i{i}_j{j}_k{k}{suffix}": 1.0 for j in range(T + 1)},
                "=",
                1.0,
            )
        )
    return rows


def milp_filename(base: str, mode: str, xi) -> str:
    digest = hashlib.sha256(np.asarray(xi, dtype=np.float64).tobytes()).hexdigest()
    return f"{base}_{mode}_{digest[:12]}.lp"


def emit_milp(instance: SearchInstance, xi, mode: str = "SP1") -> str:
    """LP text for the single-parameter path problem at xi."""
    q, alpha, expd, _, _, tau = _kernel_inputs(instance, xi, mode)
    T, C = instance.T, instance.grid.n_cells
    n_targets = 2 if mode == "SP2" else 1
    lp = LPFile()
    for i in range(instance.I):
        for j in range(T + 1):
            lp.objective[_wname(i, j, 0)] = q[i] * expd[j]
    lp.constraints.extend(_structural_rows(instance.grid, T))
    for k in range(n_targets):
        lp.constraints.extend(_linearization_rows(instance, k))
    if mode == "SP2":
        cap = {
            _wname(i, j, 1): q[i] * expd[j]
            for i in range(instance.I)
            for j in range(T + 1)
        }
        lp.constraints.append(Constraint("cap", cap, "<=", tau))
    for t in range(T):
        for c in range(C):
            lp.binaries.add(_yname(c, t))
    for k in range(n_targets):
        for i in range(instance.I):
            for j in range(T + 1):
                lp.binaries.add(_wname(i, j, k))
    comment = (
        f"path search model, mode {mode}, grid {instance.grid.rows}x{instance.grid.cols}, "
        f"T={T}, scenarios={instance.I}, rate={alpha!r}"
    )
    return write_lp(lp, comment)


def milp_assignment(instance: SearchInstance, xi, path, mode: str = "SP1") -> dict:
    """Variable values induced by a path, matching emit_milp's naming."""
    from .searchmodel import detect_counts, path_to_y

    path = np.asarray(path, dtype=np.int64)
    y = path_to_y(instance, path)
    out = {}
    for t in range(instance.T):
        out[_yname(path[t], t)] = 1.0
    n_targets = 2 if mode == "SP2" else 1
    for k in range(n_targets):
        counts = detect_counts(instance, y, k)
        for i in range(instance.I):
            out[_wname(i, int(counts[i]), k)] = 1.0
    return out


# ----------------------------------------------------------------------
# training model emission

def emit_training_milp(instance: SearchInstance, points, config) -> str:
    """LP text for the joint rule-training problem over all training points.

    config duck-types TrainingConfig: risk, margin, theta, mode, weights.
    Binary y/w blocks repeat per training point; affine rule coefficients
    enter through the big-M margin rows. theta > 0 splits each coefficient
    into a positive and negative part and prices both in the objective;
    theta = 0 keeps plain free coefficients and no regularizer columns.
    """
    risk = config.risk
    margin = config.margin
    theta = float(config.theta)
    mode = config.mode
    if math.isinf(margin.delta):
        raise DomainError("training model needs a finite delta")
    if risk.kind not in ("expectation", "worst_case", "superquantile"):
        raise DomainError(f"risk kind {risk.kind!r} has no training formulation")
    points = [check_parameter(instance, xi) for xi in points]
    S = len(points)
    if S == 0:
        raise StructuralError("no training points")
    weights = getattr(config, "weights", None)
    P = (
        np.full(S, 1.0 / S)
        if weights is None
        else np.asarray(weights, dtype=np.float64)
    )
    if P.shape != (S,):
        raise StructuralError("weights length mismatch")
    T, C = instance.T, instance.grid.n_cells
    n_targets = 2 if mode == "SP2" else 1
    r = instance.r
    span = margin.delta + margin.epsilon
    lp = LPFile()

    def bterm(c, t, l):
        # contribution of rule coefficient (c,t,l) as {name: sign}
        if theta > 0.0:
            return ((f"Bp_c{c}_t{t}_l{l}", 1.0), (f"Bn_c{c}_t{t}_l{l}", -1.0))
        return ((f"Bf_c{c}_t{t}_l{l}", 1.0),)

    # objective, risk part
    per_point_obj = []
    for s, xi in enumerate(points):
        q, _, expd, _, _, tau = _kernel_inputs(instance, xi, mode)
        obj_s = {
            f"w_i{i}_j{j}_k0_s{s}": q[i] * expd[j]
            for i in range(instance.I)
            for j in range(T + 1)
        }
        per_point_obj.append((obj_s, q, expd, tau))
    if risk.kind == "expectation":
        for s, (obj_s, _, _, _) in enumerate(per_point_obj):
            for name, coef in obj_s.items():
                lp.objective[name] = P[s] * coef
    elif risk.kind == "worst_case":
        lp.objective["gam"] = 1.0
        lp.free.add("gam")
        for s, (obj_s, _, _, _) in enumerate(per_point_obj):
            coefs = dict(obj_s)
            coefs["gam"] = -1.0
            lp.constraints.append(Constraint(f"wc_s{s}", coefs, "<=", 0.0))
    else:
        if not 0.0 <= risk.alpha < 1.0:
            raise DomainError("superquantile level must be in [0, 1)")
        lp.objective["gam"] = 1.0
        lp.free.add("gam")
        for s, (obj_s, _, _, _) in enumerate(per_point_obj):
            lp.objective[f"u_s{s}"] = P[s] / (1.0 - risk.alpha)
            coefs = dict(obj_s)
            coefs["gam"] = -1.0
            coefs[f"u_s{s}"] = -1.0
            lp.constraints.append(Constraint(f"sq_s{s}", coefs, "<=", 0.0))

    # objective, regularizer columns
    if theta > 0.0:
        for t in range(T):
            for c in range(C):
                for l in range(r):
                    lp.objective[f"Bp_c{c}_t{t}_l{l}"] = theta
                    lp.objective[f"Bn_c{c}_t{t}_l{l}"] = theta

    # per-point structure, linearization, and pursuit cap
    for s, xi in enumerate(points):
        suffix = f"_s{s}"
        lp.constraints.extend(_structural_rows(instance.grid, T, suffix))
        for k in range(n_targets):
            lp.constraints.extend(_linearization_rows(instance, k, suffix))
        if mode == "SP2":
            _, q, expd, tau = per_point_obj[s]
            cap = {
                f"w_i{i}_j{j}_k1_s{s}": q[i] * expd[j]
                for i in range(instance.I)
                for j in range(T + 1)
            }
            lp.constraints.append(Constraint(f"cap_s{s}", cap, "<=", tau))

    # big-M margin rows tie decisions to the rule
    for s, xi in enumerate(points):
        for t in range(T):
            for c in range(C):
                coefs = {}
                for l in range(r):
                    if xi[l] == 0.0:
                        continue
                    for name, sign in bterm(c, t, l):
                        coefs[name] = sign * xi[l]
                coefs[f"bo_c{c}_t{t}"] = 1.0
                coefs[f"y_c{c}_t{t}_s{s}"] = -span
                lp.constraints.append(
                    Constraint(f"mglo_c{c}_t{t}_s{s}", dict(coefs), ">=", -margin.delta)
                )
                lp.constraints.append(
                    Constraint(f"mghi_c{c}_t{t}_s{s}", coefs, "<=", -margin.epsilon)
                )

    for t in range(T):
        for c in range(C):
            lp.free.add(f"bo_c{c}_t{t}")
            if theta == 0.0:
                for l in range(r):
                    lp.free.add(f"Bf_c{c}_t{t}_l{l}")
    for s in range(S):
        for t in range(T):
            for c in range(C):
                lp.binaries.add(f"y_c{c}_t{t}_s{s}")
        for k in range(n_targets):
            for i in range(instance.I):
                for j in range(T + 1):
                    lp.binaries.add(f"w_i{i}_j{j}_k{k}_s{s}")
    comment = (
        f"rule training model, mode {mode}, risk {risk.kind}, "
        f"points={S}, theta={theta!r}, epsilon={margin.epsilon!r}, delta={margin.delta!r}"
    )
    return write_lp(lp, comment)
