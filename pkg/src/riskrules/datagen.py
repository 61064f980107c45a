"""Training and test point generators.

Three families, all driven by the package's fixed PCG64 generator so a
seed pins the output bitwise:

- shrinking_uniform: box samples whose width shrinks linearly in the
  stage index nu, one wide coordinate for the detection-rate shift and
  narrow coordinates for the scenario-weight shifts.
- simplex_uniform: normalize r uniform draws to sum one, subtract 1/r,
  keep the result when its euclidean norm fits the radius.
- simplex_beta: same recipe with Beta-distributed draws. Beta sampling
  goes through the inverse regularized incomplete beta on uniforms from
  the same generator, so no platform library variance sneaks in.

Rejection runs in fixed-size batches; the batch layout is part of the
algorithm, which keeps outputs reproducible across machines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv

from .errors import DomainError, GenerationStallError, StructuralError
from .searchmodel import fixed_rng

REJECTION_CAP = 10_000_000
STALL_WINDOW = 1_000_000
BATCH = 4096


@dataclass(frozen=True)
class DataSpec:
    kind: str
    count: int
    seed: int
    r: int
    nu: int | None = None
    radius: float | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind not in ("shrinking_uniform", "simplex_uniform", "simplex_beta"):
            raise DomainError(f"unknown data kind {self.kind!r}")
        if self.count < 1:
            raise DomainError("count must be positive")
        if self.r < 2:
            raise DomainError("need at least two coordinates")


def shrinking_uniform(nu: int, count: int, seed: int, r: int = 101) -> np.ndarray:
    """Stage-nu box samples in R^r; the box collapses as nu grows."""
    if not (isinstance(nu, (int, np.integer)) and 1 <= nu <= 8):
        raise DomainError(f"stage must be an integer in 1..8, got {nu!r}")
    if r < 2:
        raise DomainError("need at least two coordinates")
    half0 = 0.18 - 0.02 * nu
    half = 0.009 - 0.001 * nu
    rng = fixed_rng(seed)
    pts = np.empty((count, r))
    pts[:, 0] = rng.uniform(-half0, half0, count)
    pts[:, 1:] = rng.uniform(-half, half, (count, r - 1))
    return pts


def _rejection(draw, count: int, radius: float, r: int) -> np.ndarray:
    if radius <= 0.0:
        raise DomainError("radius must be positive")
    kept = []
    have = 0
    attempts = 0
    window_attempts = 0
    window_kept = 0
    while have < count:
        if attempts >= REJECTION_CAP:
            raise GenerationStallError(
                f"rejection cap {REJECTION_CAP} hit with {have}/{count} accepted"
            )
        if window_attempts >= STALL_WINDOW and window_kept == 0:
            raise GenerationStallError(
                f"acceptance rate below 1e-6 over the last {STALL_WINDOW} draws"
            )
        raw = draw(BATCH)
        sums = raw.sum(axis=1)
        good = sums > 0.0
        pts = raw[good] / sums[good, None] - 1.0 / r
        norms = np.sqrt((pts * pts).sum(axis=1))
        acc = pts[norms <= radius]
        kept.append(acc)
        have += acc.shape[0]
        attempts += BATCH
        window_attempts += BATCH
        window_kept += acc.shape[0]
        if window_attempts >= STALL_WINDOW and window_kept > 0:
            window_attempts = 0
            window_kept = 0
    return np.vstack(kept)[:count]


def simplex_uniform(radius: float, count: int, seed: int, r: int = 100) -> np.ndarray:
    """Normalized-uniform simplex perturbations inside the radius."""
    rng = fixed_rng(seed)
    return _rejection(lambda n: rng.random((n, r)), count, radius, r)


def simplex_beta(
    a: float, b: float, radius: float, count: int, seed: int, r: int = 100
) -> np.ndarray:
    """Normalized-Beta simplex perturbations inside the radius."""
    if a <= 0.0 or b <= 0.0:
        raise DomainError("beta shape parameters must be positive")
    rng = fixed_rng(seed)
    return _rejection(
        lambda n: betaincinv(a, b, rng.random((n, r))), count, radius, r
    )


def generate(spec: DataSpec) -> np.ndarray:
    if spec.kind == "shrinking_uniform":
        if spec.nu is None:
            raise DomainError("shrinking_uniform needs nu")
        return shrinking_uniform(spec.nu, spec.count, spec.seed, spec.r)
    if spec.kind == "simplex_uniform":
        if spec.radius is None:
            raise DomainError("simplex_uniform needs a radius")
        return simplex_uniform(spec.radius, spec.count, spec.seed, spec.r)
    if spec.a is None or spec.b is None or spec.radius is None:
        raise DomainError("simplex_beta needs a, b, and a radius")
    return simplex_beta(spec.a, spec.b, spec.radius, spec.count, spec.seed, spec.r)


# ----------------------------------------------------------------------
# point-set files

def save_points(path, points: np.ndarray, spec: DataSpec | None = None):
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lines = []
    if spec is not None:
        fields = [f"kind={spec.kind}", f"count={spec.count}", f"seed={spec.seed}", f"r={spec.r}"]
        for name in ("nu", "radius", "a", "b"):
            val = getattr(spec, name)
            if val is not None:
                fields.append(f"{name}={val!r}")
        lines.append("# " + " ".join(fields))
    for row in points:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_points(path):
    """Returns (points, meta) where meta echoes the provenance header."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for piece in line[1:].split():
                    if "=" in piece:
                        key, val = piece.split("=", 1)
                        meta[key] = val
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise StructuralError(f"no points in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise StructuralError("ragged point rows")
    return np.array(rows, dtype=np.float64), meta
