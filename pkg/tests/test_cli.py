import json
import subprocess
import sys

import numpy as np
import pytest

from riskrules import load_instance, rule_from_json
from riskrules.cli import main


def run(*argv):
    return main(list(argv))


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    assert run(
        "gen-instance", "--rows", "3", "--cols", "3", "-T", "4", "-I", "8",
        "--mode", "B", "--t1-start", "5", "--seed", "1", "--out", str(path)
    ) == 0
    return path


@pytest.fixture
def sp2_instance_file(tmp_path):
    path = tmp_path / "sp2.json"
    assert run(
        "gen-instance", "--rows", "3", "--cols", "3", "-T", "4", "-I", "6",
        "--mode", "A", "--t1-start", "5", "--t2-start", "1", "--tau", "0.45",
        "--seed", "2", "--out", str(path)
    ) == 0
    return path


def _train(instance_file, tmp_path, name="tr", **extra):
    outdir = tmp_path / name
    args = [
        "train", "--instance", str(instance_file), "--mode", "SP1",
        "--risk", "expectation", "--theta", "0.001", "--epsilon", "0.001",
        "--delta", "1.0", "--data", "simplex-uniform", "--radius", "0.05",
        "--count", "6", "--seed", "3", "--out", str(outdir),
    ]
    for k, v in extra.items():
        args.extend([k, v] if v is not None else [k])
    assert run(*args) == 0
    return outdir


def test_gen_instance_one_based_starts(instance_file):
    inst = load_instance(instance_file)
    assert (inst.targets[0][:, 0] == 4).all()  # CLI cell 5 is internal 4
    assert inst.mode == "B"
    assert inst.T == 4 and inst.I == 8


def test_train_outputs_and_determinism(instance_file, tmp_path):
    d1 = _train(instance_file, tmp_path, "t1")
    d2 = _train(instance_file, tmp_path, "t2")
    for name in ("points.csv", "rule.json", "decomp.json", "per_omega.csv"):
        assert (d1 / name).exists()
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    assert (d1 / "timings.json").exists()
    payload = json.loads((d1 / "decomp.json").read_text())
    assert payload["U"] - payload["L"] == pytest.approx(
        0.001 * payload["reg"], abs=1e-12
    )
    rule = rule_from_json((d1 / "rule.json").read_text())
    assert rule.margin.epsilon == 0.001
    header = (d1 / "per_omega.csv").read_text().splitlines()[0]
    assert header == "omega,value,lower_bound,nodes,path"


def test_train_emit_milp(instance_file, tmp_path):
    d = _train(instance_file, tmp_path, "tm", **{"--emit-milp": None})
    from riskrules import parse_lp

    lp = parse_lp((d / "training.lp").read_text())
    assert lp.constraints


def test_evaluate_column_contract(instance_file, tmp_path):
    d = _train(instance_file, tmp_path)
    ev = tmp_path / "ev"
    assert run(
        "evaluate", "--instance", str(instance_file), "--train-dir", str(d),
        "--data", "simplex-uniform", "--radius", "0.05", "--count", "4",
        "--seed", "9", "--out", str(ev),
    ) == 0
    lines = (ev / "evaluation.csv").read_text().splitlines()
    assert lines[0] == "rule,point_id,feasible,value,optimum,subopt"
    assert len(lines) == 1 + 3 * 4  # direct, mdr, amdr per point
    rules_seen = {line.split(",")[0] for line in lines[1:]}
    assert rules_seen == {"direct", "mdr", "amdr"}
    slines = (ev / "summary.csv").read_text().splitlines()
    assert slines[0] == "rule,count_feasible,min,avg,max"
    assert len(slines) == 4
    # summary aggregates only feasible rows
    for line in slines[1:]:
        name, count = line.split(",")[:2]
        feas_rows = [
            l for l in lines[1:] if l.startswith(name + ",") and ",true," in l
        ]
        assert int(count) == len(feas_rows)
    # byte determinism
    ev2 = tmp_path / "ev2"
    assert run(
        "evaluate", "--instance", str(instance_file), "--train-dir", str(d),
        "--data", "simplex-uniform", "--radius", "0.05", "--count", "4",
        "--seed", "9", "--out", str(ev2),
    ) == 0
    assert (ev / "evaluation.csv").read_bytes() == (ev2 / "evaluation.csv").read_bytes()
    assert (ev / "summary.csv").read_bytes() == (ev2 / "summary.csv").read_bytes()


def test_bound_report_replay_prints_constant(capsys):
    assert run("bound-report", "--replay", "0", "0.02", "10", "0.05") == 0
    assert capsys.readouterr().out.strip() == "1.02"


def test_bound_report_files(instance_file, tmp_path):
    d = _train(instance_file, tmp_path)
    br = tmp_path / "br"
    assert run(
        "bound-report", "--instance", str(instance_file), "--train-dir", str(d),
        "--data", "simplex-uniform", "--radius", "0.05", "--count", "4",
        "--seed", "9", "--out", str(br),
    ) == 0
    lb = (br / "lower_bound.csv").read_text().splitlines()
    assert lb[0] == "point_id,optimum,floor,margin"
    assert len(lb) == 5
    rb = (br / "rule_bounds.csv").read_text().splitlines()
    assert rb[0] == "point_id,rule,optimum,rule_value,subopt,bound,slack"
    assert len(rb) == 1 + 2 * 4  # mdr and amdr rows
    for line in rb[1:]:
        assert float(line.split(",")[-1]) >= 0.0  # bound never violated here


def test_bound_report_radius_convention_needs_radius(instance_file, tmp_path):
    d = _train(instance_file, tmp_path)
    code = run(
        "bound-report", "--instance", str(instance_file), "--train-dir", str(d),
        "--data", "simplex-uniform", "--radius", "0.05", "--count", "2",
        "--seed", "9", "--convention", "radius", "--out", str(tmp_path / "x"),
    )
    assert code == 0  # --radius doubles as the data radius here
    missing = run(
        "bound-report", "--instance", str(instance_file), "--train-dir", str(d),
        "--test-points", str(d / "points.csv"), "--convention", "radius",
        "--out", str(tmp_path / "y"),
    )
    assert missing == 2


def test_convergence_csv(sp2_instance_file, tmp_path, capsys):
    out = tmp_path / "conv.csv"
    assert run(
        "convergence", "--instance", str(sp2_instance_file), "--nus", "7,8",
        "--count", "4", "--seed", "7", "--theta", "0.001", "--out", str(out),
        "--markdown",
    ) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "nu,cells,prob_t1,prob_t2,gap,feasible,matches_opt"
    assert len(lines) == 4  # two stages plus the exact row
    assert lines[-1].startswith("inf,")
    md = capsys.readouterr().out
    assert md.startswith("| nu |")


def test_exit_code_infeasible(tmp_path):
    tight = tmp_path / "tight.json"
    run(
        "gen-instance", "--rows", "3", "--cols", "3", "-T", "4", "-I", "6",
        "--mode", "A", "--t1-start", "5", "--t2-start", "1", "--tau", "0.0001",
        "--seed", "2", "--out", str(tight)
    )
    code = run(
        "train", "--instance", str(tight), "--mode", "SP2", "--data", "shrinking",
        "--nu", "8", "--count", "3", "--seed", "1", "--out", str(tmp_path / "x"),
    )
    assert code == 3


def test_exit_code_usage_errors(instance_file, tmp_path):
    # missing generator parameter
    assert run(
        "train", "--instance", str(instance_file), "--data", "shrinking",
        "--count", "3", "--seed", "1", "--out", str(tmp_path / "x"),
    ) == 2
    # no point source at all
    assert run(
        "train", "--instance", str(instance_file), "--out", str(tmp_path / "y"),
    ) == 2
    # missing instance file
    assert run(
        "train", "--instance", str(tmp_path / "nope.json"), "--data", "shrinking",
        "--nu", "8", "--count", "3", "--out", str(tmp_path / "z"),
    ) == 2


def test_exit_code_numerical(instance_file, tmp_path):
    code = run(
        "train", "--instance", str(instance_file), "--data", "simplex-uniform",
        "--radius", "1e-9", "--count", "2", "--seed", "1",
        "--out", str(tmp_path / "x"),
    )
    assert code == 4


def test_console_script_and_seed_env(tmp_path):
    env_out = {}
    for tag, seed_env in (("a", "5"), ("b", "5"), ("c", "6")):
        out = tmp_path / f"{tag}.json"
        proc = subprocess.run(
            [
                sys.executable, "-m", "riskrules.cli", "gen-instance",
                "--rows", "2", "--cols", "2", "-T", "3", "-I", "4",
                "--mode", "B", "--out", str(out),
            ],
            capture_output=True,
            text=True,
            env={"PATH": "/usr/bin:/bin", "RISKRULE_SEED": seed_env},
        )
        assert proc.returncode == 0, proc.stderr
        env_out[tag] = out.read_bytes()
    assert env_out["a"] == env_out["b"]
    assert env_out["a"] != env_out["c"]
