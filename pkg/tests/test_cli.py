"""Command-line interface: subcommand behavior, exit codes, and
reproducible output files."""

import json
import shutil
import subprocess
import sys

import pytest

from symoc import aircraft
from symoc.cli import main

from conftest import lq_problem

THRUST_ARGS = ["--x0=0,0,1,1,3", "--psi0=0.3,-0.2,1,0.5,-0.5",
               "--lambda=-0.1,-0.5", "--control", "aircraft"]


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    paths = aircraft.export(root / "air")
    from symoc.model import save_problem
    lq = root / "lq.json"
    save_problem(lq_problem(), lq)
    return {"problem": str(paths[0]),
            "trans1": str(paths[1]),
            "trans2": str(paths[2]),
            "scale": str(paths[3]),
            "box": str(paths[4]),
            "lq": str(lq),
            "root": root}


# -- check ------------------------------------------------------------------

def test_check_passes_translation(files, capsys):
    rc = main(["check", files["problem"], files["trans1"],
               "--sample-config", files["box"]])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert doc["tool"] == "symoc"
    assert doc["report"]["passed"] is True
    assert doc["report"]["worst"] == 0.0


def test_check_fails_scaling_with_exit_1(files, capsys):
    rc = main(["check", files["problem"], files["scale"],
               "--sample-config", files["box"]])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 1
    failing = [c["label"] for c in doc["report"]["conditions"]
               if not c["passed"]]
    assert failing == ["X[3]", "X[4]"]


def test_check_infinitesimal_agrees(files, capsys):
    rc = main(["check-infinitesimal", files["problem"], files["scale"],
               "--sample-config", files["box"]])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 1
    assert doc["report"]["kind"] == "infinitesimal"


def test_check_uses_default_box_when_unspecified(files, capsys):
    rc = main(["check", files["problem"], files["trans2"],
               "--samples", "200"])
    capsys.readouterr()
    assert rc == 0


def test_check_output_reruns_byte_identical(files, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        rc = main(["check", files["problem"], files["trans1"],
                   "--sample-config", files["box"], "--output", str(path)])
        assert rc == 0
    assert a.read_bytes() == b.read_bytes()


# -- law --------------------------------------------------------------------

def test_law_prints_pinned_expression(files, capsys):
    rc = main(["law", files["problem"], files["scale"]])
    out = capsys.readouterr().out
    assert rc == 0
    assert out == "psi1*x1 + 2*psi2*x2 + psi3*x3 + 2*psi4*x4\n"


def test_law_json_payload(files, capsys):
    rc = main(["law", files["problem"], files["trans1"], "--json"])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert doc["report"] == {"expr": "psi1", "form": "p",
                             "provenance": files["trans1"]}


# -- conserve / dhdt --------------------------------------------------------

def test_conserve_translation_law_passes(files, capsys):
    rc = main(["conserve", files["problem"], files["trans1"], "--steps",
               "400", *THRUST_ARGS])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert doc["report"]["conservation"]["drift"] == 0.0


def test_conserve_scaling_law_fails(files, capsys):
    rc = main(["conserve", files["problem"], files["scale"], "--steps",
               "400", *THRUST_ARGS])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 1
    assert doc["report"]["conservation"]["drift"] > 1e-2


def test_dhdt_passes_on_thrusting_arc(files, capsys):
    rc = main(["dhdt", files["problem"], "--steps", "400", *THRUST_ARGS])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert doc["report"]["max_residual"] <= 1e-4


# -- extremal ---------------------------------------------------------------

def test_extremal_writes_csv(files, tmp_path):
    out = tmp_path / "traj.csv"
    rc = main(["extremal", files["problem"], "--steps", "100",
               *THRUST_ARGS, "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# symoc 0.1.0"
    assert lines[1] == "# command: extremal"
    assert lines[2].startswith("# config: problem=")
    assert lines[3].split(",")[:3] == ["t", "x1", "x2"]
    assert len(lines) == 4 + 101


def test_extremal_fuel_out_exits_3_with_partial(files, tmp_path, capsys):
    out = tmp_path / "partial.csv"
    rc = main(["extremal", files["problem"], "--steps", "100",
               "--x0=0,0,1,1,0.4", "--psi0=0.3,-0.2,1,0.5,-0.5",
               "--lambda=-0.1,-0.5", "--control", "aircraft",
               "--output", str(out)])
    assert rc == 3
    assert "fuel" in capsys.readouterr().err
    text = out.read_text()
    assert "# partial: " in text


# -- shoot ------------------------------------------------------------------

def test_shoot_recovers_lq(files, capsys):
    rc = main(["shoot", files["lq"], "--form", "p1", "--control", "exprs",
               "--control-expr", "psi1/2"])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert doc["report"]["psi_a"][0] == pytest.approx(2.0, abs=1e-8)


def test_shoot_nonconvergence_exits_4(files, capsys):
    rc = main(["shoot", files["lq"], "--form", "p1", "--control", "exprs",
               "--control-expr", "psi1/2", "--tolerance", "1e-16",
               "--max-iterations", "1"])
    assert rc == 4
    assert "did not converge" in capsys.readouterr().err


# -- pareto -----------------------------------------------------------------

def test_pareto_csv_marks_dominated_points(files, tmp_path):
    out = tmp_path / "sweep.csv"
    rc = main(["pareto", files["problem"], "--grid", "5",
               "--x0=0,0,1,1,3", "--psi0=0.3,-0.2,1,0.5,-0.5",
               "--steps", "100", "--control", "aircraft",
               "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    header = lines[3].split(",")
    assert header == ["lambda1", "lambda2", "I1", "I2", "kept", "failure"]
    kept = [row.split(",")[4] for row in lines[4:]]
    assert kept == ["1", "0", "0", "0", "0"]    # no-thrust point dominates


def test_pareto_dedup_drops_repeated_costs(files, tmp_path):
    out = tmp_path / "dedup.csv"
    rc = main(["pareto", files["problem"], "--grid", "5",
               "--x0=0,0,1,1,3", "--psi0=0,0,0,0,5", "--steps", "100",
               "--control", "aircraft", "--dedup", "--output", str(out)])
    assert rc == 0
    rows = [r.split(",") for r in out.read_text().splitlines()[4:]]
    kept_costs = [(r[2], r[3]) for r in rows if r[4] == "1"]
    assert len(kept_costs) == len(set(kept_costs))


# -- input validation -> exit 2 ---------------------------------------------

def test_missing_file_exits_2(files, capsys):
    rc = main(["check", str(files["root"] / "nope.json"), files["trans1"]])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_json_exits_2(files, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["check", str(bad), files["trans1"]])
    capsys.readouterr()
    assert rc == 2


def test_bad_number_list_exits_2(files, capsys):
    rc = main(["extremal", files["problem"], "--x0=a,b,c,d,e",
               "--psi0=0,0,0,0,0", "--lambda=-1,0"])
    capsys.readouterr()
    assert rc == 2


def test_vector_form_needs_lambda(files, capsys):
    rc = main(["extremal", files["problem"], "--x0=0,0,1,1,3",
               "--psi0=0,0,0,0,0"])
    assert rc == 2
    assert "--lambda" in capsys.readouterr().err


def test_corrupted_group_file_exits_2(files, tmp_path, capsys):
    with open(files["scale"]) as fh:
        grp = json.load(fh)
    grp["X"][0] = "x1 + q9"
    bad = tmp_path / "badgrp.json"
    bad.write_text(json.dumps(grp))
    rc = main(["check", files["problem"], str(bad)])
    capsys.readouterr()
    assert rc == 2


# -- entry points -----------------------------------------------------------

def test_module_invocation():
    out = subprocess.run([sys.executable, "-m", "symoc.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == "symoc 0.1.0"


def test_console_script_installed(files):
    exe = shutil.which("symoc")
    assert exe, "console script 'symoc' not on PATH"
    out = subprocess.run([exe, "law", files["problem"], files["trans2"]],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == "psi2"
