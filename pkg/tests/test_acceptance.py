"""End-to-end acceptance gate.

One test per shipped guarantee, ordered roughly bottom-up: risk measures,
exact solver, decomposition, separation, the two certificate families,
shrinking-set convergence, tabular recovery, model-file round-trips, and
the parameter Lipschitz property. Each test prints a single verdict line
(visible under -s or on failure); tolerances and runtime budgets are
pinned here and nowhere else.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import mode_a_points, mode_b_points, random_instance
from oracles import l1_oracle, ru_objective, superquantile_scan
from riskrules import (
    BoundInputs,
    DiscreteRV,
    FiniteProbSpace,
    MarginSpec,
    RiskSpec,
    TrainingConfig,
    amdr,
    brute_force,
    build_instance,
    constraint_violations,
    decompose,
    diameter,
    emit_milp,
    emit_training_milp,
    evaluate_objective,
    expectation,
    feasible,
    fixed_rng,
    heaviside,
    in_margin_set,
    kappa0,
    l1_separation,
    lower_bound_certificate,
    mdr,
    mdr_amdr_bound,
    milp_assignment,
    nondetect_prob,
    parse_lp,
    path_to_y,
    quantile,
    recovery_check,
    shrinking_uniform,
    simplex_uniform,
    solve_exact,
    superquantile,
    worst_case,
)


@contextmanager
def verdict(label, budget=None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"FAIL  {label}")
        raise
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed >= budget:
        print(f"FAIL  {label} (over budget: {elapsed:.1f}s >= {budget}s)")
        raise AssertionError(f"{label}: {elapsed:.1f}s exceeded {budget}s budget")
    print(f"PASS  {label} ({elapsed:.1f}s)")


@pytest.fixture(scope="module")
def certified_setup():
    """4x4 trained rule shared by the two certificate tests."""
    inst = build_instance(rows=4, cols=4, T=5, I=20, mode="B", seed=17)
    train = simplex_uniform(0.05, 20, seed=101, r=inst.I)
    test = simplex_uniform(0.05, 20, seed=202, r=inst.I)
    config = TrainingConfig(
        risk=RiskSpec("expectation"),
        margin=MarginSpec(1e-3, 1.0),
        theta=1e-3,
        mode="SP1",
    )
    res = decompose(inst, train, config)
    assert not res.partial
    return inst, train, test, res


def test_01_risk_measure_properties():
    with verdict("risk-measure suite: 1000 random rvs, 5 properties", budget=5.0):
        rng = fixed_rng(31415)
        tol = 1e-9
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            vals = rng.standard_normal(n) * float(rng.uniform(0.5, 10.0))
            w = rng.uniform(0.1, 1.0, n)
            space = FiniteProbSpace(w / w.sum())
            rv = DiscreteRV(vals, space)
            alpha = float(rng.uniform(0.0, 0.999))
            c = float(rng.standard_normal())

            const = DiscreteRV(np.full(n, c), space)
            for f in (expectation, worst_case):
                assert abs(f(const) - c) <= tol
            assert abs(quantile(const, alpha) - c) <= tol
            assert abs(superquantile(const, alpha) - c) <= tol

            bigger = DiscreteRV(vals + np.abs(rng.standard_normal(n)), space)
            assert expectation(bigger) >= expectation(rv) - tol
            assert worst_case(bigger) >= worst_case(rv) - tol
            assert quantile(bigger, alpha) >= quantile(rv, alpha) - tol
            assert superquantile(bigger, alpha) >= superquantile(rv, alpha) - tol

            shifted = DiscreteRV(vals + c, space)
            assert abs(expectation(shifted) - (expectation(rv) + c)) <= tol
            assert abs(worst_case(shifted) - (worst_case(rv) + c)) <= tol
            assert abs(quantile(shifted, alpha) - (quantile(rv, alpha) + c)) <= tol
            assert (
                abs(superquantile(shifted, alpha) - (superquantile(rv, alpha) + c))
                <= tol
            )

            sq = superquantile(rv, alpha)
            assert expectation(rv) <= sq + tol
            assert sq <= worst_case(rv) + tol

            # the quantile minimizes the shortfall objective and the
            # minimum over all breakpoints equals the superquantile
            assert abs(ru_objective(quantile(rv, alpha), vals, space.weights, alpha) - sq) <= tol
            assert abs(superquantile_scan(vals, space.weights, alpha) - sq) <= tol

        four = DiscreteRV.uniform([1.0, 2.0, 3.0, 4.0])
        assert superquantile(four, 0.5) == 3.5
        assert superquantile(four, 0.75) == 4.0


def test_02_solver_matches_brute_force():
    with verdict("exact solver: 50 random instances vs full enumeration", budget=60.0):
        rng = fixed_rng(4242)
        for k in range(50):
            tau = float(rng.uniform(0.3, 0.95))
            inst = random_instance(rng, mode="B", two_targets=True, tau=tau)
            xi = mode_b_points(inst, 1, seed=k)[0]
            for mode in ("SP1", "SP2"):
                res = solve_exact(inst, xi, mode)
                bf = brute_force(inst, xi, mode)
                assert res.status == bf.status
                if res.status == "optimal":
                    assert res.value == bf.value  # shared leaf expression
                    assert feasible(inst, xi, path_to_y(inst, res.path), mode)


def test_03_decomposition_identities():
    with verdict("decomposition: gap identities and rule reproduction", budget=120.0):
        rng = fixed_rng(555)
        margin = MarginSpec(1e-3, 1.0)
        for _ in range(20):
            inst = random_instance(rng, mode="B", max_I=10)
            count = max(2, min(5, inst.I - 1))
            pts = mode_b_points(inst, count, seed=int(rng.integers(0, 2**31)))

            free = TrainingConfig(
                risk=RiskSpec("expectation"), margin=margin, theta=0.0, mode="SP1"
            )
            res0 = decompose(inst, pts, free)
            assert res0.U - res0.L == 0.0
            assert res0.gap == 0.0

            priced = TrainingConfig(
                risk=RiskSpec("expectation"), margin=margin, theta=1e-3, mode="SP1"
            )
            res = decompose(inst, pts, priced)
            assert abs((res.U - res.L) - priced.theta * res.reg) <= 1e-12

            for s in range(count):
                g = res.rule.gap(pts[s])
                assert in_margin_set(g, margin)
                assert (heaviside(g) == res.decisions[s]).all()


def test_04_separation_margins_and_oracle():
    with verdict("L1 separation: margins and vertex-oracle agreement"):
        rng = fixed_rng(2719)
        done = 0
        while done < 100:
            s = int(rng.integers(2, 5))
            r = int(rng.integers(1, 6))
            pts = rng.uniform(-1, 1, (s, r))
            labels = rng.integers(0, 2, s)
            if labels.min() == labels.max():
                continue
            eps = float(rng.uniform(0.01, 0.3))
            delta = eps + float(rng.uniform(0.5, 2.0))
            res = l1_separation(pts, labels, eps, delta)
            status, val = l1_oracle(pts, labels, eps, delta)
            assert res.status == status
            if status == "optimal":
                assert res.l1_norm == pytest.approx(val, abs=1e-8)
                g = pts @ res.B + res.offset
                for k, label in enumerate(labels):
                    if label == 1:
                        assert eps - 1e-9 <= g[k] <= delta + 1e-9
                    else:
                        assert -delta - 1e-9 <= g[k] <= -eps + 1e-9
            done += 1

        hand = l1_separation(
            np.array([[1.0], [-1.0]]), np.array([1, 0]), 0.5, 2.0
        )
        assert hand.l1_norm == pytest.approx(0.5, abs=1e-12)


def test_05_lower_bound_certificate(certified_setup):
    with verdict("lower-bound certificate: floor holds at all test points", budget=300.0):
        inst, train, test, res = certified_setup
        k0 = kappa0(inst)
        diam = diameter(np.vstack([train, test]))
        cert = lower_bound_certificate(inst, test, res.L, 0.0, k0, diam)
        assert len(cert.rows) == len(test)
        for row in cert.rows:
            assert row.margin >= 0.0  # no tolerance by design
        assert cert.ok


def test_06_rule_suboptimality_bounds(certified_setup):
    with verdict("replay-rule bounds: MDR and AMDR within certificate"):
        inst, train, test, res = certified_setup
        C = inst.grid.n_cells
        tau = res.U - res.L
        cap = mdr_amdr_bound(
            BoundInputs(
                sigma=0.0,
                tau=tau,
                kappa0=math.sqrt(inst.I),
                diam=diameter(np.vstack([train, test])),
            )
        )
        mdr_dec, _ = mdr(res.rule, train, inst)
        ym = np.asarray(mdr_dec).reshape(inst.T, C)
        candidates = [res.decisions[s].reshape(inst.T, C) for s in range(len(train))]
        for pt in test:
            exact = solve_exact(inst, pt, "SP1")
            vm = nondetect_prob(inst, pt, ym, 0)
            assert vm - exact.value <= cap

            am_dec, _ = amdr(res.rule, train, inst, pt)
            ya = np.asarray(am_dec).reshape(inst.T, C)
            assert feasible(inst, pt, ya, "SP1")
            va = nondetect_prob(inst, pt, ya, 0)
            assert va - exact.value <= cap
            # argmin property: no candidate beats the re-ranked pick
            vals = [
                nondetect_prob(inst, pt, y, 0)
                for y in candidates
                if feasible(inst, pt, y, "SP1")
            ]
            assert va == min(vals)

        assert "%.12g" % mdr_amdr_bound(
            BoundInputs(sigma=0.0, tau=0.02, kappa0=10.0, diam=0.05)
        ) == "1.02"


def test_07_shrinking_set_convergence():
    with verdict("shrinking training sets: stage-8 rule attains the exact optimum", budget=600.0):
        inst = build_instance(
            rows=5, cols=5, T=5, I=30, mode="A", seed=12,
            t1_start=12, t2_start=0, tau=0.55,
        )
        xi0 = np.zeros(inst.r)
        exact = solve_exact(inst, xi0, mode="SP2")
        assert exact.status == "optimal"
        opt_val = nondetect_prob(inst, xi0, path_to_y(inst, exact.path), 0)
        config = TrainingConfig(
            risk=RiskSpec("expectation"),
            margin=MarginSpec(1e-3, 1.0),
            theta=1e-3,
            mode="SP2",
        )
        matched = []
        for nu in range(1, 9):
            pts = shrinking_uniform(nu, 10, seed=100 + nu, r=inst.r)
            res = decompose(inst, pts, config)
            y0 = heaviside(res.rule.gap(xi0)).reshape(inst.T, inst.grid.n_cells)
            ok = feasible(inst, xi0, y0, mode="SP2")
            # both sides accumulate through the same sum, so the match
            # is required to be exact, not approximate
            matched.append(ok and nondetect_prob(inst, xi0, y0, 0) == opt_val)
        assert matched[-1]


def test_08_tabular_recovery():
    with verdict("tabular recovery: per-point optima attain the lower bound"):
        rng = fixed_rng(808)
        for k in range(20):
            mode = "B" if k % 2 == 0 else "A"
            inst = random_instance(rng, mode=mode)
            seed = int(rng.integers(0, 2**31))
            if mode == "B":
                pts = mode_b_points(inst, 3, seed=seed)
            else:
                pts = mode_a_points(inst, 3, seed=seed, half=0.03)
            assert recovery_check(inst, pts, RiskSpec("expectation"), mode="SP1")


def test_09_model_file_round_trip():
    with verdict("model files: re-parsed objective matches, counts as documented"):
        inst = build_instance(
            rows=3, cols=3, T=4, I=6, mode="A", seed=5,
            t1_start=4, t2_start=0, tau=0.45,
        )
        C, T, I = inst.grid.n_cells, inst.T, inst.I
        xi = mode_a_points(inst, 1, seed=3, half=0.02)[0]
        for mode, k_targets in (("SP1", 1), ("SP2", 2)):
            lp = parse_lp(emit_milp(inst, xi, mode))
            assert len(lp.binaries) == C * T + k_targets * I * (T + 1)
            res = solve_exact(inst, xi, mode)
            assign = milp_assignment(inst, xi, res.path, mode)
            direct = nondetect_prob(inst, xi, path_to_y(inst, res.path), 0)
            assert abs(evaluate_objective(lp, assign) - direct) <= 1e-9
            assert constraint_violations(lp, assign) == []

        pts = mode_a_points(inst, 3, seed=9, half=0.02)
        for mode, k_targets in (("SP1", 1), ("SP2", 2)):
            config = TrainingConfig(
                risk=RiskSpec("expectation"),
                margin=MarginSpec(1e-3, 1.0),
                theta=1e-2,
                mode=mode,
            )
            tr = parse_lp(emit_training_milp(inst, pts, config))
            assert len(tr.binaries) == len(pts) * (C * T + k_targets * I * (T + 1))


def test_10_parameter_lipschitz_bound():
    with verdict("weight-mode objective: 10000 triples within the Lipschitz cap"):
        inst = build_instance(rows=3, cols=3, T=4, I=8, mode="B", seed=23)
        C = inst.grid.n_cells
        n = 10_000
        a = simplex_uniform(0.08, n, seed=7, r=inst.I)
        b = simplex_uniform(0.08, n, seed=8, r=inst.I)
        rng = fixed_rng(9)
        grid = inst.grid
        cap = math.sqrt(inst.I)
        violations = 0
        for t in range(n):
            cell = int(rng.integers(0, C))
            path = [cell]
            for _ in range(inst.T - 1):
                nbrs = grid.neighbors(path[-1])
                path.append(int(nbrs[rng.integers(0, len(nbrs))]))
            y = path_to_y(inst, np.array(path, dtype=np.int64))
            d = nondetect_prob(inst, a[t], y, 0) - nondetect_prob(inst, b[t], y, 0)
            if abs(d) > cap * float(np.linalg.norm(a[t] - b[t])):
                violations += 1
        assert violations == 0
