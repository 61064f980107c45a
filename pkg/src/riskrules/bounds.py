"""Certified suboptimality and lower-bound reports.

The training data's spread enters every certificate through the same two
quantities: the Lipschitz modulus of the objective in the parameter
(kappa0, only available in mode B where it is sqrt of the scenario count)
and the diameter of the parameter set, taken literally as the largest
pairwise distance among the points supplied. Certificates never
extrapolate beyond what those two numbers support.

Two bound families: a fixed training decision re-used across the set is
off by at most 2*sigma + tau + 2*kappa0*diam, and a direct affine rule by
at most 2*sigma + tau + (kappa0 + kappa0'*sqrt(1+lambda^2))*diam. The
lower-bound certificate goes the other way: the decomposition's L, minus
the solver slack sigma and one Lipschitz sweep kappa0*diam, must sit
below the exact optimum at every parameter in the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .exactsolver import solve_exact
from .rules import AffineRule
from .searchmodel import SearchInstance


def kappa0(instance: SearchInstance) -> float:
    """Parameter-Lipschitz modulus of the objective, mode B only."""
    if instance.mode != "B":
        raise DomainError(
            "no certified modulus for mode A; rate perturbations enter "
            "through an exponential with decision-dependent slope"
        )
    return math.sqrt(instance.I)


def diameter(points) -> float:
    """Largest pairwise euclidean distance, by literal scan."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    best = 0.0
    for i in range(pts.shape[0]):
        d = np.sqrt(((pts[i + 1 :] - pts[i]) ** 2).sum(axis=1))
        if d.size and float(d.max()) > best:
            best = float(d.max())
    return best


@dataclass(frozen=True)
class BoundInputs:
    sigma: float
    tau: float
    kappa0: float
    diam: float
    kappa0_prime: float = 0.0
    lam: float = 0.0


def mdr_amdr_bound(inputs: BoundInputs) -> float:
    """Suboptimality cap for rules that replay a training decision."""
    return 2 * inputs.sigma + inputs.tau + 2 * inputs.kappa0 * inputs.diam


def direct_rule_bound(inputs: BoundInputs) -> float:
    """Suboptimality cap for the affine rule evaluated directly."""
    slope = inputs.kappa0 + inputs.kappa0_prime * math.sqrt(1.0 + inputs.lam**2)
    return 2 * inputs.sigma + inputs.tau + slope * inputs.diam


@dataclass
class LowerBoundRow:
    point_id: int
    optimum: float
    floor: float
    margin: float


@dataclass
class LowerBoundReport:
    floor: float
    rows: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(row.margin >= 0.0 for row in self.rows)


def lower_bound_certificate(
    instance: SearchInstance,
    test_points,
    L: float,
    sigma: float,
    kappa0_val: float,
    diam: float,
) -> LowerBoundReport:
    """Check L - sigma - kappa0*diam against the exact optimum pointwise.

    Only the unconstrained problem is certified, so solves run SP1.
    Margins carry no tolerance; a negative margin means the certificate
    failed outright.
    """
    floor = L - sigma - kappa0_val * diam
    report = LowerBoundReport(floor=floor)
    pts = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    for idx in range(pts.shape[0]):
        res = solve_exact(instance, pts[idx], mode="SP1")
        report.rows.append(
            LowerBoundRow(idx, res.value, floor, res.value - floor)
        )
    return report


def constant_pattern_condition(rule: AffineRule, diam: float):
    """Whether the rule provably cannot flip any coordinate across the set.

    Returns (holds, kappa_G) with kappa_G the largest row 2-norm. When
    kappa_G * diam < 2*epsilon and the rule respects margins at one point
    of the set, the decision pattern is constant across the whole set.
    """
    kappa_G = float(np.sqrt((rule.B**2).sum(axis=1)).max()) if rule.m else 0.0
    return kappa_G * diam < 2.0 * rule.margin.epsilon, kappa_G
