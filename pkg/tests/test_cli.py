from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from walksieve import __version__
from walksieve.blocks import BlockSystem, GeneratorSystem
from walksieve.cli import BOUND_HEADER, main
from walksieve.harness import COLUMNS, parse_rows


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture()
def files(tmp_path):
    inst = tmp_path / "inst.json"
    gens = tmp_path / "gens.json"
    assert main(["instance", "--kind", "coloring", "--R", "3", "--c", "3", "--out", str(inst)]) == 0
    assert main(["generators", "--instance", str(inst), "--seed", "1", "--verify", "--out", str(gens)]) == 0
    return inst, gens


def test_instance_to_stdout(capsys):
    assert main(["instance", "--kind", "ap", "--s", "3", "--R", "5", "--c", "3"]) == 0
    bs = BlockSystem.from_json(capsys.readouterr().out)
    assert bs.kind == "ap" and bs.R == 5 and bs.quotient_index(1) == 729


def test_instance_grid_variants(capsys):
    assert main(["instance", "--kind", "grid", "--R", "2", "--scale", "reduced", "--widths", "1,1"]) == 0
    assert BlockSystem.from_json(capsys.readouterr().out).R == 2
    assert main(["instance", "--kind", "grid-boxes", "--boxes", "0,0,1,1;3,0,4,1"]) == 0
    assert len(BlockSystem.from_json(capsys.readouterr().out).ground) == 8


def test_generators_file(files):
    _, gens = files
    gs = GeneratorSystem.from_json(gens.read_text())
    assert gs.kappa == (39, 46, 54) and gs.seed == 1


def test_spectrum(capsys):
    assert main(["spectrum", "--group", "4", "--gens", "1", "--delta", "0.5"]) == 0
    out = capsys.readouterr()
    rows = read_csv(out.out)
    assert [float(r["eigenvalue"]) for r in rows] == pytest.approx([1, 0, -1, 0])
    summary = json.loads(out.err.strip().splitlines()[-1])
    assert summary["bipartite"] and summary["expander"] and summary["strict_gap"] == pytest.approx(0)


def test_spectrum_capacity_exit_code(capsys):
    assert main(["spectrum", "--group", "2^25", "--random", "3"]) == 3
    assert "capacity" in capsys.readouterr().err


def test_density(files, capsys):
    inst, _ = files
    assert main(["density", "--instance", str(inst)]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert [float(r["density"]) for r in rows] == pytest.approx([1 / 9] * 3)
    assert {r["mode"] for r in rows} == {"exact"}


def test_bound_grid_example(capsys):
    args = ["bound", "--kind", "sieve", "--eta", "1", "--k", "3000", "--L1", "20", "--L2", "40",
            "--density", "0.0625", "--log-group", repr(2600 * math.log(2))]
    assert main(args) == 0
    (row,) = read_csv(capsys.readouterr().out)
    assert tuple(row) == BOUND_HEADER
    assert float(row["total"]) == pytest.approx(16 / 21, abs=1e-8)
    assert row["vacuous"] == "false" and row["window_ok"] == "true"


@pytest.mark.parametrize(
    "kind,extra,expected",
    [("grid", ["--eta", "1", "--k", "2551"], 1.0), ("ap", ["--eta", "0", "--k", "0", "--s", "2"], 6571.0),
     ("coloring-sqrt", ["--eta", repr(64 * math.log(3)), "--k", "1"], 6571.0)],
)
def test_closed_form_bounds(kind, extra, expected, capsys):
    assert main(["bound", "--kind", kind, *extra]) == 0
    (row,) = read_csv(capsys.readouterr().out)
    assert float(row["total"]) == pytest.approx(expected)
    assert row["vacuous"] == "true"


def test_bound_both_modes(files, capsys):
    _, gens = files
    assert main(["bound", "--generators", str(gens), "--eta-mode", "both", "--k", "10,100", "--L1", "1", "--L2", "3",
                 "--density", "0.111", "--log-group", "3.3"]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert [r["mode"] for r in rows] == ["proof-faithful"] * 2 + ["as-stated"] * 2


def test_bound_rejects_degenerate_eta(capsys):
    assert main(["bound", "--p-identity", "0.5", "--p-min", "0.1", "--kind", "grid"]) == 1
    assert "no valid eta" in capsys.readouterr().err


def test_walk_aggregate_and_trials(files, capsys):
    _, gens = files
    assert main(["walk", "--generators", str(gens), "--k", "0,5", "--trials", "200", "--aggregate"]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert rows[0]["freq"] == "0.0" and len(rows) == 2
    assert main(["walk", "--generators", str(gens), "--k", "3", "--trials", "5", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc) == 5 and set(doc[0]) == {"k", "trial", "block_1", "block_2", "block_3", "instance"}


def test_walk_deterministic_across_workers_and_backends(files, capsys):
    _, gens = files
    outs = []
    for extra in ([], ["--workers", "3"], ["--backend", "python"]):
        assert main(["walk", "--generators", str(gens), "--k", "1,7", "--trials", "300", "--seed", "5", *extra]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1] == outs[2]


def test_tampered_generators_exit_code(files, tmp_path, capsys):
    _, gens = files
    doc = json.loads(gens.read_text())
    doc["S"].pop()
    doc["p"].pop()
    doc["p"] = [1 / len(doc["p"])] * len(doc["p"])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["walk", "--generators", str(bad), "--k", "1", "--trials", "3"]) == 2
    assert "invariant violation" in capsys.readouterr().err


def test_alon_roichman_json(tmp_path):
    out = tmp_path / "ar.json"
    assert main(["alon-roichman", "--group", "3^3", "--trials", "100", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["kappa"] == 46 and doc["group"] == [3, 3, 3] and doc["rate"] <= math.exp(-2)


def test_experiment(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instance": {"kind": "coloring", "R": 3, "c": 3}, "ks": [0, 2], "trials": 300}))
    out = tmp_path / "res.csv"
    assert main(["experiment", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    rows = parse_rows(out.read_text(), "csv")
    assert [r.k for r in rows] == [0, 2] and rows[0].freq == 0.0
    assert out.read_text().splitlines()[0] == ",".join(COLUMNS)
    again = tmp_path / "again.csv"
    assert main(["experiment", "--config", str(cfg), "--seed", "3", "--out", str(again), "--workers", "2"]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_experiment_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instance": {"kind": "hexagons"}}))
    assert main(["experiment", "--config", str(cfg)]) == 1
    cfg.write_text(json.dumps({"colour": 3}))
    assert main(["experiment", "--config", str(cfg)]) == 1
    assert main(["density", "--instance", str(tmp_path / "missing.json")]) == 1


def test_experiment_violation_exit_code(tmp_path, monkeypatch):
    from walksieve import cli
    from walksieve.harness import ExperimentResult, ResultRow

    def fake(cfg):
        row = ResultRow(10, 1000, 0.9, 0.86, 0.93, None, 0.1, 0.01, False, True, 0.9)
        return ExperimentResult(cfg, [row], (1,))

    monkeypatch.setattr(cli, "run_sieve_experiment", fake)
    assert main(["experiment", "--out", str(tmp_path / "x.csv")]) == 2


def test_console_script_version():
    proc = subprocess.run([sys.executable, "-m", "walksieve.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
