"""Risk measures for random variables on finite probability spaces.

Everything here works on plain float arrays. A random variable is a vector
of outcome values paired with a vector of positive probability weights that
sum to one. Four measures of risk are supported: expectation, worst case,
quantile, and superquantile. The quantile uses the left-continuous
convention, the smallest value z whose cumulative probability reaches the
level. The superquantile is the quantile plus the probability-weighted
average overshoot above it, rescaled by one minus the level, which makes it
coincide with the expectation at level zero and approach the worst case as
the level approaches one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StructuralError

WEIGHT_TOL = 1e-12

RISK_KINDS = ("expectation", "worst_case", "quantile", "superquantile")


class FiniteProbSpace:
    """Finite sample space carrying strictly positive weights that sum to 1."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise StructuralError("weights must be a nonempty 1-d array")
        if np.any(w <= 0.0):
            raise DomainError("probability weights must be strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights sum to {w.sum()!r}, expected 1 within {WEIGHT_TOL}")
        self.weights = w

    def __len__(self):
        return self.weights.size

    @classmethod
    def uniform(cls, n):
        if n <= 0:
            raise DomainError("need at least one outcome")
        return cls(np.full(n, 1.0 / n))


class DiscreteRV:
    """Outcome values attached to a finite probability space."""

    __slots__ = ("values", "space")

    def __init__(self, values, space):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 1:
            raise StructuralError("values must be 1-d")
        if v.size != len(space):
            raise StructuralError(
                f"{v.size} values for a space with {len(space)} outcomes"
            )
        self.values = v
        self.space = space

    @classmethod
    def uniform(cls, values):
        v = np.asarray(values, dtype=np.float64)
        return cls(v, FiniteProbSpace.uniform(v.size))


@dataclass(frozen=True)
class RiskSpec:
    """Which risk measure to apply, and at which level where that matters."""

    kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in RISK_KINDS:
            raise DomainError(f"unknown risk kind {self.kind!r}")


def expectation(rv: DiscreteRV) -> float:
    return float(np.dot(rv.space.weights, rv.values))


def worst_case(rv: DiscreteRV) -> float:
    return float(rv.values.max())


def quantile(rv: DiscreteRV, alpha: float) -> float:
    """Left-continuous quantile: min{z : prob(rv <= z) >= alpha}.

    alpha must lie in (0, 1]. At alpha = 1 this is the worst case.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"quantile level must be in (0, 1], got {alpha!r}")
    order = np.argsort(rv.values, kind="stable")
    cum = np.cumsum(rv.space.weights[order])
    idx = int(np.searchsorted(cum, alpha, side="left"))
    # cumulative weight can fall a few ulps short of 1 at the top
    idx = min(idx, rv.values.size - 1)
    return float(rv.values[order[idx]])


def superquantile(rv: DiscreteRV, alpha: float) -> float:
    """Quantile plus the rescaled mean overshoot above it.

    alpha must lie in [0, 1). At alpha = 0 this equals the expectation.
    """
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"superquantile level must be in [0, 1), got {alpha!r}")
    if alpha == 0.0:
        q = float(rv.values.min())
    else:
        q = quantile(rv, alpha)
    excess = np.maximum(rv.values - q, 0.0)
    return q + float(np.dot(rv.space.weights, excess)) / (1.0 - alpha)


def evaluate_risk(spec: RiskSpec, rv: DiscreteRV) -> float:
    if spec.kind == "expectation":
        return expectation(rv)
    if spec.kind == "worst_case":
        return worst_case(rv)
    if spec.kind == "quantile":
        return quantile(rv, spec.alpha)
    if spec.kind == "superquantile":
        return superquantile(rv, spec.alpha)
    raise DomainError(f"unknown risk kind {spec.kind!r}")
