"""Binary decision rules built from sign patterns of affine functions.

A rule maps a parameter vector to a binary decision vector by thresholding
a gap vector g at zero (componentwise Heaviside, with g_i <= 0 mapping to
0). Margins keep the gap away from the threshold: a gap is admissible when
every component lies in [-delta, -epsilon] or [epsilon, delta]. The big-M
inequalities used by the mixed-integer training formulations are exactly
equivalent to "Heaviside of the gap equals y and the gap is admissible",
and bigM_equivalence_check exposes both sides so tests can fuzz that.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError, StructuralError
from . import searchmodel


@dataclass(frozen=True)
class MarginSpec:
    """Margin band [epsilon, delta] on the absolute gap, delta may be inf."""

    epsilon: float
    delta: float = math.inf

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.delta > self.epsilon:
            raise DomainError(
                f"delta ({self.delta!r}) must exceed epsilon ({self.epsilon!r})"
            )


def heaviside(g) -> np.ndarray:
    """Componentwise step: g_i <= 0 maps to 0, g_i > 0 maps to 1."""
    g = np.asarray(g, dtype=np.float64)
    return (g > 0.0).astype(np.int64)


def in_margin_set(g, margin: MarginSpec) -> bool:
    return not margin_flags(g, margin).any()


def margin_flags(g, margin: MarginSpec) -> np.ndarray:
    """True where a component leaves the admissible band."""
    a = np.abs(np.asarray(g, dtype=np.float64))
    return (a < margin.epsilon) | (a > margin.delta)


def bigM_equivalence_check(g, y, margin: MarginSpec):
    """Evaluate both sides of the big-M equivalence for a gap/decision pair.

    Returns (inequalities_hold, heaviside_and_margin_hold). The two booleans
    must agree for every binary y; tests fuzz exactly that.
    """
    if math.isinf(margin.delta):
        raise DomainError("big-M inequalities need a finite delta")
    g = np.asarray(g, dtype=np.float64)
    y = np.asarray(y)
    if g.shape != y.shape:
        raise StructuralError(f"gap shape {g.shape} != decision shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise DomainError("decision vector must be binary")
    span = margin.delta + margin.epsilon
    lo = -margin.delta + span * y
    hi = -margin.epsilon + span * y
    ineq = bool(np.all(lo <= g) and np.all(g <= hi))
    direct = bool(np.array_equal(heaviside(g), y) and in_margin_set(g, margin))
    return ineq, direct


# ----------------------------------------------------------------------
# rule families


class AffineRule:
    """Decision rule y = heaviside(B xi + b) with an attached margin."""

    kind = "affine"

    def __init__(self, B, b, margin: MarginSpec):
        B = np.asarray(B, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if B.ndim != 2 or b.ndim != 1 or B.shape[0] != b.size:
            raise StructuralError(
                f"B shape {B.shape} incompatible with offset length {b.size}"
            )
        self.B = B
        self.b = b
        self.margin = margin

    @property
    def m(self):
        return self.b.size

    @property
    def r(self):
        return self.B.shape[1]

    def gap(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.float64)
        if xi.shape != (self.r,):
            raise StructuralError(f"parameter length {xi.size}, rule expects {self.r}")
        return self.B @ xi + self.b

    def apply(self, xi) -> np.ndarray:
        return heaviside(self.gap(xi))

    def row_l1(self) -> np.ndarray:
        return np.abs(self.B).sum(axis=1)


class ConstantRule:
    """Fixed gap vector, so the same decision at every parameter."""

    kind = "constant"

    def __init__(self, g, margin: MarginSpec):
        g = np.asarray(g, dtype=np.float64)
        if g.ndim != 1:
            raise StructuralError("gap must be 1-d")
        self.g = g
        self.margin = margin

    @property
    def m(self):
        return self.g.size

    def gap(self, xi=None) -> np.ndarray:
        return self.g.copy()

    def apply(self, xi=None) -> np.ndarray:
        return heaviside(self.g)


class TabularRule:
    """Per-training-point decisions, with the synthetic gap epsilon*(2y - 1)."""

    kind = "tabular"

    def __init__(self, decisions, margin: MarginSpec):
        d = np.asarray(decisions, dtype=np.int64)
        if d.ndim != 2:
            raise StructuralError("decisions must be (points, m)")
        if not np.isin(d, (0, 1)).all():
            raise DomainError("tabular decisions must be binary")
        self.decisions = d
        self.margin = margin

    @property
    def m(self):
        return self.decisions.shape[1]

    def decision(self, omega: int) -> np.ndarray:
        return self.decisions[omega]

    def gap(self, omega: int) -> np.ndarray:
        return self.margin.epsilon * (2.0 * self.decisions[omega] - 1.0)


# ----------------------------------------------------------------------
# rule selection over training candidates

def _candidate_decisions(rule, training_points):
    if isinstance(rule, TabularRule):
        if rule.decisions.shape[0] != len(training_points):
            raise StructuralError(
                f"tabular rule holds {rule.decisions.shape[0]} decisions "
                f"for {len(training_points)} training points"
            )
        return [rule.decision(i) for i in range(len(training_points))]
    return [rule.apply(xi) for xi in training_points]


def _feasible_candidates(instance, training_points, decisions):
    keep = []
    for idx, y in enumerate(decisions):
        y_mat = np.asarray(y).reshape(instance.T, instance.grid.n_cells)
        if searchmodel.structurally_feasible(instance.grid, y_mat):
            keep.append(idx)
    if not keep:
        raise InfeasibleError("no training-point decision is a feasible path")
    return keep


def mdr(rule, training_points, instance, objective=None):
    """Pick the training decision with the smallest training-point objective.

    The winner is used at every query parameter. Returns (decision, index).
    Ties resolve to the lowest training index.
    """
    if objective is None:
        objective = lambda xi, y: searchmodel.nondetect_prob(instance, xi, y, target=0)
    decisions = _candidate_decisions(rule, training_points)
    keep = _feasible_candidates(instance, training_points, decisions)
    best_idx = keep[0]
    best_val = objective(training_points[best_idx], decisions[best_idx])
    for idx in keep[1:]:
        val = objective(training_points[idx], decisions[idx])
        if val < best_val:
            best_val, best_idx = val, idx
    return decisions[best_idx], best_idx


def amdr(rule, training_points, instance, xi, objective=None):
    """Re-rank the training decisions at the query parameter itself.

    Each candidate is scored by the true objective at xi and the minimizer
    is returned as (decision, index), ties to the lowest training index.
    """
    if objective is None:
        objective = lambda q, y: searchmodel.nondetect_prob(instance, q, y, target=0)
    decisions = _candidate_decisions(rule, training_points)
    keep = _feasible_candidates(instance, training_points, decisions)
    best_idx = keep[0]
    best_val = objective(xi, decisions[best_idx])
    for idx in keep[1:]:
        val = objective(xi, decisions[idx])
        if val < best_val:
            best_val, best_idx = val, idx
    return decisions[best_idx], best_idx


# ----------------------------------------------------------------------
# serialization

def _margin_to_json(margin: MarginSpec):
    return {
        "epsilon": margin.epsilon,
        "delta": None if math.isinf(margin.delta) else margin.delta,
    }


def _margin_from_json(obj) -> MarginSpec:
    delta = obj["delta"]
    return MarginSpec(obj["epsilon"], math.inf if delta is None else delta)


def rule_to_json(rule) -> str:
    if isinstance(rule, AffineRule):
        payload = {
            "kind": "affine",
            "m": rule.m,
            "r": rule.r,
            "B": rule.B.ravel().tolist(),
            "b": rule.b.tolist(),
        }
    elif isinstance(rule, ConstantRule):
        payload = {"kind": "constant", "g": rule.g.tolist()}
    elif isinstance(rule, TabularRule):
        payload = {"kind": "tabular", "decisions": rule.decisions.tolist()}
    else:
        raise StructuralError(f"cannot serialize rule of type {type(rule).__name__}")
    payload.update(_margin_to_json(rule.margin))
    return json.dumps(payload, indent=1)


def rule_from_json(text: str):
    obj = json.loads(text)
    margin = _margin_from_json(obj)
    kind = obj.get("kind")
    if kind == "affine":
        B = np.asarray(obj["B"], dtype=np.float64).reshape(obj["m"], obj["r"])
        return AffineRule(B, np.asarray(obj["b"], dtype=np.float64), margin)
    if kind == "constant":
        return ConstantRule(np.asarray(obj["g"], dtype=np.float64), margin)
    if kind == "tabular":
        return TabularRule(np.asarray(obj["decisions"], dtype=np.int64), margin)
    raise StructuralError(f"unknown rule kind {kind!r}")
