import numpy as np
import pytest

from riskrules import build_instance, fixed_rng


@pytest.fixture
def tiny_instance():
    """2x3 grid, short horizon, handy for exhaustive checks."""
    return build_instance(rows=2, cols=3, T=4, I=6, mode="B", seed=11)


@pytest.fixture
def small_sp2_instance():
    return build_instance(
        rows=3, cols=3, T=4, I=6, mode="A", seed=5, t1_start=4, t2_start=0, tau=0.45
    )


def random_instance(rng, mode="B", max_cells=6, max_T=5, max_I=10, tau=None,
                    two_targets=False):
    """Instance drawn small enough for brute-force enumeration."""
    while True:
        rows = int(rng.integers(1, 4))
        cols = int(rng.integers(1, 4))
        if rows * cols <= max_cells:
            break
    T = int(rng.integers(2, max_T + 1))
    I = int(rng.integers(2, max_I + 1))
    t2 = int(rng.integers(0, rows * cols)) if two_targets else None
    return build_instance(
        rows=rows,
        cols=cols,
        T=T,
        I=I,
        mode=mode,
        seed=int(rng.integers(0, 2**31)),
        t1_start=int(rng.integers(0, rows * cols)),
        t2_start=t2,
        tau=tau,
    )


def mode_b_points(instance, count, seed, radius=0.03):
    """Admissible mode-B parameter draws: nonneg weights, zero-sum shifts."""
    rng = fixed_rng(seed)
    I = instance.I
    pts = rng.uniform(-radius, radius, size=(count, I))
    pts -= pts.mean(axis=1, keepdims=True)
    low = pts.min()
    if 1.0 / I + low < 0:  # keep q nonnegative on tiny I
        pts *= (1.0 / I) / (-low) * 0.9
    return pts


def mode_a_points(instance, count, seed, half=0.05):
    rng = fixed_rng(seed)
    pts = rng.uniform(-half, half, size=(count, instance.r))
    return pts
