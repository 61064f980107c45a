import numpy as np
import pytest

from riskrules import (
    AffineRule,
    ConstantRule,
    DomainError,
    InfeasibleError,
    MarginSpec,
    TabularRule,
    amdr,
    bigM_equivalence_check,
    heaviside,
    in_margin_set,
    margin_flags,
    mdr,
    nondetect_prob,
    path_to_y,
    rule_from_json,
    rule_to_json,
)
from conftest import mode_b_points


def test_heaviside_zero_goes_down():
    g = np.array([-2.0, -1e-300, 0.0, 1e-300, 3.0])
    assert heaviside(g).tolist() == [0, 0, 0, 1, 1]


def test_margin_spec_validation():
    with pytest.raises(DomainError):
        MarginSpec(0.0)
    with pytest.raises(DomainError):
        MarginSpec(-0.1)
    with pytest.raises(DomainError):
        MarginSpec(0.5, 0.4)
    assert MarginSpec(0.1).delta == np.inf


def test_margin_flags():
    m = MarginSpec(0.1, 1.0)
    g = np.array([0.05, -0.05, 0.1, -1.0, 1.5, 0.5])
    assert margin_flags(g, m).tolist() == [True, True, False, False, True, False]
    assert not in_margin_set(g, m)
    assert in_margin_set(np.array([0.1, -0.9]), m)


def test_bigM_equivalence_fuzz():
    """The inequality pair holds iff y is the Heaviside image and g sits
    inside the margin band, over random g and arbitrary binary y."""
    rng = np.random.default_rng(3)
    m = MarginSpec(0.05, 2.0)
    for _ in range(500):
        g = rng.uniform(-3, 3, 6)
        y = rng.integers(0, 2, 6)
        ineq, semantic = bigM_equivalence_check(g, y, m)
        assert ineq == semantic
    # directed cases: correct label but band violated
    g = np.array([0.01])
    ineq, semantic = bigM_equivalence_check(g, np.array([1]), m)
    assert not ineq and not semantic
    g = np.array([2.5])
    ineq, semantic = bigM_equivalence_check(g, np.array([1]), m)
    assert not ineq and not semantic
    g = np.array([-1.0])
    ineq, semantic = bigM_equivalence_check(g, np.array([0]), m)
    assert ineq and semantic


def test_bigM_requires_finite_delta_and_binary_y():
    m = MarginSpec(0.05)
    with pytest.raises(DomainError):
        bigM_equivalence_check(np.array([1.0]), np.array([1]), m)
    with pytest.raises(DomainError):
        bigM_equivalence_check(np.array([1.0]), np.array([2]), MarginSpec(0.05, 1.0))


def test_affine_rule_shapes_and_gap():
    m = MarginSpec(0.01, 1.0)
    B = np.array([[1.0, 0.0], [0.0, -2.0], [0.5, 0.5]])
    b = np.array([0.1, -0.1, 0.0])
    rule = AffineRule(B, b, m)
    xi = np.array([0.2, 0.3])
    assert rule.m == 3 and rule.r == 2
    np.testing.assert_allclose(rule.gap(xi), B @ xi + b)
    assert rule.apply(xi).tolist() == heaviside(B @ xi + b).tolist()
    np.testing.assert_allclose(rule.row_l1(), [1.0, 2.0, 1.0])


def test_serialization_round_trip():
    m = MarginSpec(0.01, 1.0)
    rules = [
        AffineRule(np.array([[1.0, 2.0]]), np.array([-0.5]), m),
        ConstantRule(np.array([0.25, -0.25]), MarginSpec(0.2)),
        TabularRule(np.array([[1, 0], [0, 1]]), m),
    ]
    for rule in rules:
        text = rule_to_json(rule)
        back = rule_from_json(text)
        assert type(back) is type(rule)
        assert back.margin.epsilon == rule.margin.epsilon
        assert back.margin.delta == rule.margin.delta
        if isinstance(rule, AffineRule):
            np.testing.assert_array_equal(back.B, rule.B)
            np.testing.assert_array_equal(back.b, rule.b)
        elif isinstance(rule, ConstantRule):
            np.testing.assert_array_equal(back.g, rule.g)
        else:
            np.testing.assert_array_equal(back.decisions, rule.decisions)
    # infinity survives the json trip as null
    assert '"delta": null' in rule_to_json(rules[1])


def _tabular_from_paths(instance, paths, margin):
    decisions = np.stack([path_to_y(instance, p).ravel() for p in paths])
    return TabularRule(decisions, margin)


def test_mdr_is_constant_and_amdr_adapts(tiny_instance):
    inst = tiny_instance
    pts = mode_b_points(inst, 4, seed=21)
    # four distinct feasible candidate paths
    paths = [[0, 1, 2, 5], [5, 4, 3, 0], [1, 1, 1, 1], [4, 4, 4, 4]]
    rule = _tabular_from_paths(inst, paths, MarginSpec(0.001, 1.0))

    y_mdr, idx_mdr = mdr(rule, pts, inst)
    objs = []
    for k in range(4):
        vals = [
            nondetect_prob(inst, pts[s], rule.decision(k).reshape(inst.T, -1), 0)
            for s in range(4)
        ]
        objs.append(np.mean(vals))
    assert idx_mdr == int(np.argmin(objs))
    np.testing.assert_array_equal(y_mdr, rule.decision(idx_mdr))

    for xi in mode_b_points(inst, 6, seed=22):
        y_a, idx_a = amdr(rule, pts, inst, xi)
        vals = [
            nondetect_prob(inst, xi, rule.decision(k).reshape(inst.T, -1), 0)
            for k in range(4)
        ]
        assert vals[idx_a] == min(vals)
        np.testing.assert_array_equal(y_a, rule.decision(idx_a))


def test_amdr_tie_goes_to_lowest_index(tiny_instance):
    inst = tiny_instance
    pts = mode_b_points(inst, 3, seed=5)
    # identical candidates force an exact tie
    paths = [[0, 1, 2, 5], [0, 1, 2, 5], [0, 1, 2, 5]]
    rule = _tabular_from_paths(inst, paths, MarginSpec(0.001, 1.0))
    _, idx = amdr(rule, pts, inst, pts[0])
    assert idx == 0
    _, idx = mdr(rule, pts, inst)
    assert idx == 0


def test_no_feasible_candidate_raises(tiny_instance):
    inst = tiny_instance
    pts = mode_b_points(inst, 2, seed=5)
    bad = np.zeros((2, inst.m), dtype=np.int64)  # empty rows: no cell chosen
    rule = TabularRule(bad, MarginSpec(0.001, 1.0))
    with pytest.raises(InfeasibleError):
        mdr(rule, pts, inst)
    with pytest.raises(InfeasibleError):
        amdr(rule, pts, inst, pts[0])
