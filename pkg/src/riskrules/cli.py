"""Command-line front end.

Subcommands: gen-instance, train, evaluate, bound-report, convergence.
Seeds default to the RISKRULE_SEED env var. All CSV outputs are
byte-deterministic for a fixed configuration and seed; timing data goes
to separate json files so it never perturbs the deterministic outputs.

Exit codes: 0 success, 2 bad usage or bad input data, 3 infeasible
model, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import datagen
from .errors import (
    DegenerateLPError,
    DomainError,
    GenerationStallError,
    InfeasibleError,
    RankDeficientError,
    RiskRulesError,
    SizeError,
    StructuralError,
)
from .exactsolver import emit_training_milp, solve_exact
from .probspace import RiskSpec
from .rules import MarginSpec, TabularRule, amdr, heaviside, mdr, rule_from_json, rule_to_json
from .searchmodel import (
    build_instance,
    load_instance,
    nondetect_prob,
    save_instance,
    structurally_feasible,
)
from .train import TrainingConfig, decompose

USAGE_ERRORS = (DomainError, StructuralError, RankDeficientError, SizeError)
NUMERIC_ERRORS = (DegenerateLPError, GenerationStallError)


def _default_seed() -> int:
    return int(os.environ.get("RISKRULE_SEED", "0"))


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _md_table(headers, rows) -> str:
    out = ["| " + " | ".join(headers) + " |"]
    out.append("|" + "|".join(" --- " for _ in headers) + "|")
    for row in rows:
        out.append("| " + " | ".join(str(v) for v in row) + " |")
    return "\n".join(out)


def _write_csv(path, headers, rows):
    lines = [",".join(headers)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt_float(x) -> str:
    return repr(float(x))


def _cells_label(instance, y_flat) -> str:
    """Per-period 1-based cell listing: periods joined by |, co-selected
    cells within a period by ;, empty periods shown as -."""
    C = instance.grid.n_cells
    parts = []
    for t in range(instance.T):
        chunk = y_flat[t * C : (t + 1) * C]
        cells = [str(c + 1) for c in range(C) if chunk[c]]
        parts.append(";".join(cells) if cells else "-")
    return "|".join(parts)


# ----------------------------------------------------------------------
# gen-instance

def _cmd_gen_instance(args) -> int:
    t1 = None if args.t1_start is None else args.t1_start - 1
    t2 = None if args.t2_start is None else args.t2_start - 1
    instance = build_instance(
        rows=args.rows,
        cols=args.cols,
        T=args.T,
        I=args.I,
        mode=args.mode,
        seed=args.seed,
        t1_start=t1,
        t2_start=t2,
        stay_prob=args.stay_prob,
        tau=args.tau,
        alpha_bar=args.alpha_bar,
        dispersed=args.dispersed,
    )
    save_instance(instance, args.out)
    print(f"wrote {args.out}: {args.rows}x{args.cols} grid, T={args.T}, "
          f"I={args.I}, mode {args.mode}, targets={instance.n_targets}")
    return 0


# ----------------------------------------------------------------------
# train

def _data_spec_from_args(args, r: int) -> datagen.DataSpec:
    kind = args.data
    if kind == "shrinking":
        return datagen.DataSpec(
            "shrinking_uniform", args.count, args.seed, r, nu=args.nu
        )
    if kind == "simplex-uniform":
        return datagen.DataSpec(
            "simplex_uniform", args.count, args.seed, r, radius=args.radius
        )
    if kind == "simplex-beta":
        return datagen.DataSpec(
            "simplex_beta",
            args.count,
            args.seed,
            r,
            radius=args.radius,
            a=args.a,
            b=args.b,
        )
    raise DomainError(f"unknown data family {kind!r}")


def _load_train_points(args, instance):
    if args.points:
        pts, _ = datagen.load_points(args.points)
        return pts, None
    if not args.data:
        raise DomainError("provide --points FILE or --data FAMILY")
    spec = _data_spec_from_args(args, instance.r)
    return datagen.generate(spec), spec


def _risk_from_args(args) -> RiskSpec:
    if args.risk == "superquantile":
        return RiskSpec("superquantile", args.beta)
    return RiskSpec(args.risk)


def _cmd_train(args) -> int:
    instance = load_instance(args.instance)
    points, spec = _load_train_points(args, instance)
    config = TrainingConfig(
        risk=_risk_from_args(args),
        margin=MarginSpec(args.epsilon, args.delta),
        theta=args.theta,
        mode=args.mode,
        step1_tol=args.step1_tol,
        heuristic=args.heuristic,
        jobs=args.jobs,
    )
    dec = decompose(instance, points, config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    datagen.save_points(outdir / "points.csv", points, spec)
    (outdir / "rule.json").write_text(rule_to_json(dec.rule))
    sigma = float((dec.values - dec.lower_bounds).max())
    payload = {
        "mode": config.mode,
        "risk": config.risk.kind,
        "risk_alpha": config.risk.alpha,
        "theta": config.theta,
        "epsilon": config.margin.epsilon,
        "delta": config.margin.delta,
        "L": dec.L,
        "U": dec.U,
        "gap": dec.gap,
        "reg": dec.reg,
        "sigma": sigma,
        "partial": dec.partial,
        "failed_coords": dec.failed_coords,
        "values": dec.values.tolist(),
        "lower_bounds": dec.lower_bounds.tolist(),
        "paths": [res.path.tolist() for res in dec.per_omega],
    }
    (outdir / "decomp.json").write_text(json.dumps(payload, indent=1))
    (outdir / "timings.json").write_text(json.dumps(dec.timings, indent=1))
    rows = []
    for s, res in enumerate(dec.per_omega):
        rows.append(
            [
                s,
                _fmt_float(res.value),
                _fmt_float(res.lower_bound),
                res.nodes,
                ";".join(str(c + 1) for c in res.path),
            ]
        )
    _write_csv(
        outdir / "per_omega.csv",
        ["omega", "value", "lower_bound", "nodes", "path"],
        rows,
    )
    if args.emit_milp:
        text = emit_training_milp(instance, points, config)
        (outdir / "training.lp").write_text(text)
    print(
        f"L={_fmt_float(dec.L)} U={_fmt_float(dec.U)} gap={_fmt_float(dec.gap)} "
        f"reg={_fmt_float(dec.reg)} partial={dec.partial}"
    )
    return 0


# ----------------------------------------------------------------------
# evaluate

def _load_train_dir(train_dir, instance):
    tdir = Path(train_dir)
    rule = rule_from_json((tdir / "rule.json").read_text())
    points, _ = datagen.load_points(tdir / "points.csv")
    payload = json.loads((tdir / "decomp.json").read_text())
    paths = payload["paths"]
    decisions = np.zeros((len(paths), instance.m), dtype=np.int64)
    C = instance.grid.n_cells
    for s, path in enumerate(paths):
        for t, c in enumerate(path):
            decisions[s, t * C + c] = 1
    tabular = TabularRule(decisions, rule.margin)
    return rule, points, payload, tabular


def _test_points(args, instance):
    if args.test_points:
        pts, _ = datagen.load_points(args.test_points)
        return pts
    if not args.data:
        raise DomainError("provide --test-points FILE or --data FAMILY")
    spec = _data_spec_from_args(args, instance.r)
    return datagen.generate(spec)


def _point_feasible(instance, xi, y_flat, mode) -> bool:
    y_mat = y_flat.reshape(instance.T, instance.grid.n_cells)
    if not structurally_feasible(instance.grid, y_mat):
        return False
    if mode == "SP2":
        return nondetect_prob(instance, xi, y_mat, target=1) <= instance.tau
    return True


def _cmd_evaluate(args) -> int:
    instance = load_instance(args.instance)
    rule, train_pts, payload, tabular = _load_train_dir(args.train_dir, instance)
    test_pts = _test_points(args, instance)
    mode = args.mode or payload["mode"]
    mdr_y, _ = mdr(tabular, train_pts, instance)
    optima = _pmap(
        lambda xi: solve_exact(instance, xi, mode=mode).value,
        list(test_pts),
        args.jobs,
    )
    rows = []
    stats: dict = {}
    for idx, xi in enumerate(test_pts):
        amdr_y, _ = amdr(tabular, train_pts, instance, xi)
        for name, y in (
            ("direct", heaviside(rule.gap(xi))),
            ("mdr", mdr_y),
            ("amdr", amdr_y),
        ):
            feas = _point_feasible(instance, xi, y, mode)
            val = nondetect_prob(instance, xi, y, target=0)
            sub = val - optima[idx]
            rows.append(
                [
                    name,
                    idx,
                    str(feas).lower(),
                    _fmt_float(val),
                    _fmt_float(optima[idx]),
                    _fmt_float(sub),
                ]
            )
            if feas:
                stats.setdefault(name, []).append(sub)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        outdir / "evaluation.csv",
        ["rule", "point_id", "feasible", "value", "optimum", "subopt"],
        rows,
    )
    srows = []
    for name in ("direct", "mdr", "amdr"):
        subs = stats.get(name, [])
        if subs:
            srows.append(
                [
                    name,
                    len(subs),
                    _fmt_float(min(subs)),
                    _fmt_float(sum(subs) / len(subs)),
                    _fmt_float(max(subs)),
                ]
            )
        else:
            srows.append([name, 0, "", "", ""])
    _write_csv(
        outdir / "summary.csv",
        ["rule", "count_feasible", "min", "avg", "max"],
        srows,
    )
    if args.markdown:
        print(_md_table(["rule", "count_feasible", "min", "avg", "max"], srows))
    else:
        print(f"wrote {outdir}/evaluation.csv ({len(rows)} rows)")
    return 0


# ----------------------------------------------------------------------
# bound-report

def _cmd_bound_report(args) -> int:
    if args.replay:
        sigma, tau, k0, diam = args.replay
        inputs = bounds_mod.BoundInputs(sigma=sigma, tau=tau, kappa0=k0, diam=diam)
        print("%.12g" % bounds_mod.mdr_amdr_bound(inputs))
        return 0
    if not (args.train_dir and args.instance):
        raise DomainError("bound-report needs --train-dir and --instance (or --replay)")
    instance = load_instance(args.instance)
    rule, train_pts, payload, tabular = _load_train_dir(args.train_dir, instance)
    test_pts = _test_points(args, instance)
    k0 = bounds_mod.kappa0(instance)
    if args.convention == "radius":
        if args.radius is None:
            raise DomainError("--convention radius needs --radius")
        diam = 2.0 * args.radius
    else:
        diam = bounds_mod.diameter(np.vstack([train_pts, test_pts]))
    sigma = payload["sigma"] if args.sigma is None else args.sigma
    tau_gap = payload["U"] - payload["L"]
    inputs = bounds_mod.BoundInputs(sigma=sigma, tau=tau_gap, kappa0=k0, diam=diam)
    bound = bounds_mod.mdr_amdr_bound(inputs)

    report = bounds_mod.lower_bound_certificate(
        instance, test_pts, payload["L"], sigma, k0, diam
    )
    rows41 = [
        [row.point_id, _fmt_float(row.optimum), _fmt_float(row.floor), _fmt_float(row.margin)]
        for row in report.rows
    ]
    mdr_y, _ = mdr(tabular, train_pts, instance)
    optima = _pmap(
        lambda xi: solve_exact(instance, xi, mode="SP1").value,
        list(test_pts),
        args.jobs,
    )
    rows42 = []
    for idx, xi in enumerate(test_pts):
        amdr_y, _ = amdr(tabular, train_pts, instance, xi)
        named = [("mdr", mdr_y), ("amdr", amdr_y)]
        if args.kappa0_prime is not None:
            named.append(("direct", heaviside(rule.gap(xi))))
        for name, y in named:
            val = nondetect_prob(instance, xi, y, target=0)
            sub = val - optima[idx]
            if name == "direct":
                b_inputs = bounds_mod.BoundInputs(
                    sigma=sigma,
                    tau=tau_gap,
                    kappa0=k0,
                    diam=diam,
                    kappa0_prime=args.kappa0_prime,
                    lam=args.lam,
                )
                row_bound = bounds_mod.direct_rule_bound(b_inputs)
            else:
                row_bound = bound
            rows42.append(
                [
                    idx,
                    name,
                    _fmt_float(optima[idx]),
                    _fmt_float(val),
                    _fmt_float(sub),
                    _fmt_float(row_bound),
                    _fmt_float(row_bound - sub),
                ]
            )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        outdir / "lower_bound.csv", ["point_id", "optimum", "floor", "margin"], rows41
    )
    _write_csv(
        outdir / "rule_bounds.csv",
        ["point_id", "rule", "optimum", "rule_value", "subopt", "bound", "slack"],
        rows42,
    )
    if args.markdown:
        print(_md_table(["point_id", "optimum", "floor", "margin"], rows41))
        print()
        print(
            _md_table(
                ["point_id", "rule", "optimum", "rule_value", "subopt", "bound", "slack"],
                rows42,
            )
        )
    else:
        ok = "holds" if report.ok else "FAILS"
        print(
            f"lower-bound certificate {ok}; rule bound {_fmt_float(bound)} "
            f"(sigma={_fmt_float(sigma)}, tau={_fmt_float(tau_gap)}, "
            f"kappa0={_fmt_float(k0)}, diam={_fmt_float(diam)})"
        )
    return 0


# ----------------------------------------------------------------------
# convergence

def _parse_nus(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _cmd_convergence(args) -> int:
    instance = load_instance(args.instance)
    if instance.n_targets < 2 or instance.tau is None:
        raise StructuralError("convergence study needs a two-target instance with tau")
    risk = _risk_from_args(args)
    margin = MarginSpec(args.epsilon, args.delta)
    xi0 = np.zeros(instance.r)
    exact = solve_exact(instance, xi0, mode="SP2")
    C = instance.grid.n_cells
    opt_y = np.zeros(instance.m, dtype=np.int64)
    for t, c in enumerate(exact.path):
        opt_y[t * C + c] = 1
    opt_mat = opt_y.reshape(instance.T, C)
    # score the optimum through the same accumulation as the rule rows so
    # the equality test below compares like against like
    opt_p1 = nondetect_prob(instance, xi0, opt_mat, target=0)
    rows = []
    md_rows = []
    for nu in _parse_nus(args.nus):
        pts = datagen.shrinking_uniform(nu, args.count, args.seed + nu, r=instance.r)
        config = TrainingConfig(
            risk=risk,
            margin=margin,
            theta=args.theta,
            mode="SP2",
            jobs=args.jobs,
        )
        dec = decompose(instance, pts, config)
        y0 = heaviside(dec.rule.gap(xi0))
        label = _cells_label(instance, y0)
        y_mat = y0.reshape(instance.T, instance.grid.n_cells)
        feas = structurally_feasible(instance.grid, y_mat)
        p1 = nondetect_prob(instance, xi0, y_mat, target=0)
        p2 = nondetect_prob(instance, xi0, y_mat, target=1)
        matches = bool(
            feas and p2 <= instance.tau and p1 == opt_p1
        )
        rows.append(
            [
                nu,
                label,
                _fmt_float(p1),
                _fmt_float(p2),
                _fmt_float(dec.gap),
                str(feas).lower(),
                str(matches).lower(),
            ]
        )
        md_rows.append(rows[-1])
    rows.append(
        [
            "inf",
            _cells_label(instance, opt_y),
            _fmt_float(opt_p1),
            _fmt_float(nondetect_prob(instance, xi0, opt_mat, target=1)),
            _fmt_float(0.0),
            "true",
            "true",
        ]
    )
    md_rows.append(rows[-1])
    headers = ["nu", "cells", "prob_t1", "prob_t2", "gap", "feasible", "matches_opt"]
    _write_csv(args.out, headers, rows)
    if args.markdown:
        print(_md_table(headers, md_rows))
    else:
        print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


# ----------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskrules",
        description="train, evaluate, and certify parametric search rules",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="draw a search instance")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("-T", dest="T", type=int, required=True, help="horizon")
    g.add_argument("-I", dest="I", type=int, required=True, help="scenario count")
    g.add_argument("--mode", choices=["A", "B"], default="B")
    g.add_argument("--t1-start", type=int, help="1-based start cell of target 1")
    g.add_argument("--t2-start", type=int, help="1-based start cell of target 2")
    g.add_argument("--dispersed", action="store_true",
                   help="target 1 starts across the middle row")
    g.add_argument("--stay-prob", type=float, default=0.6)
    g.add_argument("--tau", type=float, help="nondetection cap for target 2")
    g.add_argument("--alpha-bar", type=float, help="override the default glimpse rate")
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_instance)

    def add_data_flags(p):
        p.add_argument("--data", choices=["shrinking", "simplex-uniform", "simplex-beta"])
        p.add_argument("--nu", type=int, help="shrinking stage, 1..8")
        p.add_argument("--radius", type=float, help="simplex rejection radius")
        p.add_argument("--a", type=float, default=0.1, help="beta shape a")
        p.add_argument("--b", type=float, default=0.1, help="beta shape b")
        p.add_argument("--count", type=int, default=10)
        p.add_argument("--seed", type=int, default=_default_seed())

    t = sub.add_parser("train", help="decompose the training problem into bounds and a rule")
    t.add_argument("--instance", required=True)
    t.add_argument("--mode", choices=["SP1", "SP2"], default="SP1")
    t.add_argument("--risk", choices=["expectation", "worst_case", "superquantile"],
                   default="expectation")
    t.add_argument("--beta", type=float, default=0.8, help="superquantile level")
    t.add_argument("--theta", type=float, default=0.0, help="L1 regularizer weight")
    t.add_argument("--epsilon", type=float, default=0.001)
    t.add_argument("--delta", type=float, default=1.0)
    t.add_argument("--points", help="CSV of training points")
    add_data_flags(t)
    t.add_argument("--step1-tol", type=float, default=0.0)
    t.add_argument("--heuristic", action="store_true",
                   help="attempt regularizer descent after separation")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--emit-milp", action="store_true",
                   help="also write the training model as LP text")
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="score trained rules on test points")
    e.add_argument("--instance", required=True)
    e.add_argument("--train-dir", required=True)
    e.add_argument("--test-points", help="CSV of test points")
    add_data_flags(e)
    e.add_argument("--mode", choices=["SP1", "SP2"],
                   help="defaults to the training mode")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--markdown", action="store_true")
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=_cmd_evaluate)

    b = sub.add_parser("bound-report", help="emit suboptimality and lower-bound certificates")
    b.add_argument("--instance")
    b.add_argument("--train-dir")
    b.add_argument("--test-points")
    add_data_flags(b)
    b.add_argument("--convention", choices=["scan", "radius"], default="scan",
                   help="diameter from the literal point scan or 2*radius")
    b.add_argument("--sigma", type=float, help="solver slack override")
    b.add_argument("--kappa0-prime", type=float,
                   help="rule modulus for direct-rule rows")
    b.add_argument("--lam", type=float, default=0.0)
    b.add_argument("--replay", type=float, nargs=4,
                   metavar=("SIGMA", "TAU", "KAPPA0", "DIAM"),
                   help="print the rule bound for given constants and exit")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--markdown", action="store_true")
    b.add_argument("--out", default=".", help="output directory")
    b.set_defaults(func=_cmd_bound_report)

    c = sub.add_parser("convergence", help="rule stability across shrinking data stages")
    c.add_argument("--instance", required=True)
    c.add_argument("--nus", default="1:8", help="stages, e.g. 1:8 or 2,4,6")
    c.add_argument("--count", type=int, default=10)
    c.add_argument("--seed", type=int, default=_default_seed())
    c.add_argument("--risk", choices=["expectation", "worst_case", "superquantile"],
                   default="expectation")
    c.add_argument("--beta", type=float, default=0.8)
    c.add_argument("--theta", type=float, default=0.001)
    c.add_argument("--epsilon", type=float, default=0.001)
    c.add_argument("--delta", type=float, default=1.0)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--markdown", action="store_true")
    c.add_argument("--out", required=True, help="output CSV path")
    c.set_defaults(func=_cmd_convergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return 3
    except NUMERIC_ERRORS as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 4
    except USAGE_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except RiskRulesError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
